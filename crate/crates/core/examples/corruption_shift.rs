//! Estimate accuracy under every corruption at every severity.
//!
//!     cargo run --release --example corruption_shift

use lvr_core::corruptions::Corruption;
use lvr_core::estimator::EstimationConfig;
use lvr_core::studies::{severity_ladder, ToySetup};

fn main() -> lvr_core::Result<()> {
    let setup = ToySetup::blobs(2)?;
    let cfg = EstimationConfig::with_areas(50);
    println!("{:<16} {:>3}  {:>7}  {:>7}  {:>7}  {:>7}", "corruption", "sev", "real", "acc1", "acc2", "acc_new");
    for c in Corruption::ALL {
        for p in severity_ladder(&setup, c, &cfg)? {
            let e = &p.evaluation;
            println!(
                "{:<16} {:>3}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}",
                c.name(),
                p.severity,
                e.real_acc,
                e.result.acc1,
                e.result.acc2,
                e.result.acc_new
            );
        }
    }
    Ok(())
}

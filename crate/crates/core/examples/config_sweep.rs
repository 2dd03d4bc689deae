//! Estimation error over area counts and dropout rates on a shifted set.
//!
//!     cargo run --release --example config_sweep

use lvr_core::corruptions::{Corruption, Severity};
use lvr_core::estimator::{sweep, EstimationConfig};
use lvr_core::studies::ToySetup;

fn main() -> lvr_core::Result<()> {
    let setup = ToySetup::blobs(4)?;
    let shifted = setup.corrupted_new(Corruption::Contrast, Severity::new(3)?)?;
    let rows = sweep(
        &setup.model,
        &setup.reference,
        &shifted,
        &[10, 25, 50, 100],
        &[0.1, 0.3, 0.5, 0.7],
        &EstimationConfig::default(),
        9,
    )?;
    println!("real accuracy {:.4}", rows[0].real_acc);
    println!("{:>5}  {:>5}  {:>8}  {:>7}", "areas", "rate", "acc_new", "error");
    for r in &rows {
        println!("{:>5}  {:>5.1}  {:>8.4}  {:>7.4}", r.num_areas, r.dropout_rate, r.result.acc_new, r.abs_error());
    }
    Ok(())
}

//! Train the toy classifier and estimate its accuracy on an unlabeled half
//! from Monte-Carlo dropout passes.
//!
//!     cargo run --release --example dropout_pipeline [seed]

use lvr_core::estimator::{estimate, EstimationConfig};
use lvr_core::nn::{evaluate_accuracy, mc_predict};
use lvr_core::rng::derive;
use lvr_core::studies::ToySetup;

fn main() -> lvr_core::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let setup = ToySetup::blobs(seed)?;
    let cfg = EstimationConfig::with_areas(50);

    let reference = mc_predict(&setup.model, setup.reference.features(), cfg.num_passes, derive(seed, &[10]))?;
    let new = mc_predict(&setup.model, setup.new.features(), cfg.num_passes, derive(seed, &[11]))?;
    // only the reference labels are used
    let r = estimate(&reference, setup.reference.labels(), &new, &cfg)?;

    let real = evaluate_accuracy(&setup.model, setup.new.features(), setup.new.labels())?;
    println!("estimated {:.4} (acc1 {:.4}, acc2 {:.4})", r.acc_new, r.acc1, r.acc2);
    println!("actual    {real:.4}");
    for w in &r.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

//! The estimator on a three-area reference profile, then on raw label matrices.
//!
//!     cargo run --example worked_example

use lvr_core::estimator::{estimate, estimate_from_profile, EstimationConfig, ReferenceProfile};
use lvr_core::io::estimation_to_text;
use lvr_core::{compute_lvr, partition_areas, LabelMatrix};

fn main() -> lvr_core::Result<()> {
    // Per-area accuracies and sizes of a labeled reference set, and how many
    // unlabeled samples fall into each area.
    let profile = ReferenceProfile::from_accuracies(&[0.6, 0.7, 0.8], &[200, 300, 400], 0.70)?;
    let r = estimate_from_profile(&profile, &[300, 400, 500], &EstimationConfig::with_areas(3))?;
    println!("{}", estimation_to_text(&r));

    // The same computation starting from predictions: three passes per sample.
    let reference = LabelMatrix::from_rows(
        &[vec![0, 0, 0], vec![1, 1, 1], vec![2, 1, 2], vec![0, 1, 2], vec![1, 1, 1]],
        3,
    )?;
    let truth = [0, 1, 2, 1, 0];
    let new = LabelMatrix::from_rows(&[vec![2, 2, 2], vec![0, 0, 1], vec![1, 0, 2]], 3)?;
    let lvr = compute_lvr(&new);
    println!("new-set LVRs: {:?}", lvr.values());
    println!("area sizes:   {:?}", partition_areas(&lvr, 3)?.area_sizes());
    let r = estimate(&reference, &truth, &new, &EstimationConfig::with_areas(3))?;
    println!("acc1 {:.4}  acc2 {:.4}  acc_new {:.4}", r.acc1, r.acc2, r.acc_new);
    Ok(())
}

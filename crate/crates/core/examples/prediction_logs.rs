//! Prediction logs are plain text, so any model that can emit T labels per
//! sample can be estimated. This writes a log, reads a hand-written one, and
//! estimates from files.
//!
//!     cargo run --example prediction_logs

use lvr_core::estimator::{estimate, EstimationConfig};
use lvr_core::io::{PredictionLog, PredictionSource};
use lvr_core::LabelMatrix;

const HAND_WRITTEN: &str = "\
lvr-prediction-log 1
num_samples=4
num_passes=4
num_classes=3
source=mutants
master_seed=0
has_truth=false
---
0 0 0 0
2 2 1 2
1 1 1 1
0 2 1 0
";

fn main() -> lvr_core::Result<()> {
    let dir = tempfile::tempdir()?;
    let reference = PredictionLog {
        matrix: LabelMatrix::from_rows(
            &[vec![0, 0, 0, 0], vec![1, 1, 1, 1], vec![2, 2, 0, 2], vec![1, 0, 1, 2], vec![2, 2, 2, 2]],
            3,
        )?,
        truth: Some(vec![0, 1, 0, 1, 2]),
        source: PredictionSource::Mutants,
        master_seed: 0,
    };
    let path = dir.path().join("reference.txt");
    reference.write(&path)?;
    println!("{}", std::fs::read_to_string(&path)?);

    let reference = PredictionLog::read(&path)?;
    let new = PredictionLog::parse(HAND_WRITTEN)?;
    let r = estimate(
        &reference.matrix,
        reference.truth.as_deref().unwrap_or_default(),
        &new.matrix,
        &EstimationConfig::with_areas(4),
    )?;
    println!("acc1 {:.4}  acc2 {:.4}  acc_new {:.4}", r.acc1, r.acc2, r.acc_new);

    // malformed input is reported with its position
    let broken = HAND_WRITTEN.replace("1 1 1 1", "1 1 3 1");
    if let Err(e) = PredictionLog::parse(&broken) {
        println!("{e}");
    }
    Ok(())
}

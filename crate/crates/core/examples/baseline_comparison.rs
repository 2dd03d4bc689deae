//! Label-free estimate against random and cross-entropy-guided selection at
//! labeling budgets 50..180.
//!
//!     cargo run --release --example baseline_comparison

use lvr_core::baselines::{
    ces_select_estimate, compare_report, default_budgets, random_select_estimate, BudgetEstimates,
    CesConfig, FeatureMatrix,
};
use lvr_core::corruptions::{Corruption, Severity};
use lvr_core::estimator::EstimationConfig;
use lvr_core::nn::{hidden_features, predict_labels};
use lvr_core::studies::ToySetup;

fn main() -> lvr_core::Result<()> {
    let setup = ToySetup::blobs(3)?;
    let shifted = setup.corrupted_new(Corruption::GaussianNoise, Severity::new(2)?)?;
    let eval = setup.estimate_on(&shifted, &EstimationConfig::with_areas(50))?;

    let predicted = predict_labels(&setup.model, shifted.features())?;
    let correct: Vec<bool> = predicted.iter().zip(shifted.labels()).map(|(p, y)| p == y).collect();
    let (width, hidden) = hidden_features(&setup.model, shifted.features())?;
    let features = FeatureMatrix::new(width, hidden)?;

    let mut rows = Vec::new();
    for b in default_budgets() {
        let ces = ces_select_estimate(&correct, &features, b, &CesConfig { seed: b as u64, ..CesConfig::default() })?;
        rows.push(BudgetEstimates {
            budget: b,
            random: random_select_estimate(&correct, b, b as u64)?,
            ces: ces.estimate,
        });
    }
    print!("{}", compare_report(&eval.result, &rows, eval.real_acc));
    Ok(())
}

//! Replace dropout passes by a gated ensemble of mutated models, once per
//! mutation operator.
//!
//!     cargo run --release --example mutant_ensemble

use lvr_core::estimator::{estimate, EstimationConfig};
use lvr_core::mutation::{generate_mutants, mutant_predict, MutationConfig, MutationOperator};
use lvr_core::nn::evaluate_accuracy;
use lvr_core::studies::ToySetup;

fn main() -> lvr_core::Result<()> {
    let setup = ToySetup::blobs(1)?;
    let real = evaluate_accuracy(&setup.model, setup.new.features(), setup.new.labels())?;
    println!("actual accuracy {real:.4}");
    println!("{:>6}  {:>9}  {:>8}  {:>8}", "op", "attempts", "estimate", "error");
    for op in MutationOperator::CONCRETE.into_iter().chain([MutationOperator::Random]) {
        let cfg = MutationConfig {
            operator: op,
            num_mutants: 50,
            mutation_ratio: 0.1,
            accuracy_threshold: 0.9,
            seed: 7,
            ..MutationConfig::default()
        };
        let ens = generate_mutants(&setup.model, &setup.reference, &cfg)?;
        let reference = mutant_predict(&ens, setup.reference.features())?;
        let new = mutant_predict(&ens, setup.new.features())?;
        let r = estimate(&reference, setup.reference.labels(), &new, &EstimationConfig::with_areas(50))?;
        println!(
            "{:>6}  {:>9}  {:>8.4}  {:>8.4}",
            op.short_name(),
            ens.gate_report.len(),
            r.acc_new,
            (r.acc_new - real).abs()
        );
    }
    Ok(())
}

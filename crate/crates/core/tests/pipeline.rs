//! End-to-end properties of the in-memory pipeline.

mod common;

use lvr_core::data::{synth_dataset, Dataset, SynthConfig};
use lvr_core::estimator::{estimate, sweep, EstimationConfig};
use lvr_core::mutation::{generate_mutants, mutant_predict, MutationConfig, MutationOperator};
use lvr_core::nn::{evaluate_accuracy, mc_predict, pre_activations, train_sgd, MlpModel, TrainConfig};
use lvr_core::rng::{derive, pass_seed};
use lvr_core::{compute_lvr, Error};

fn small_blobs(seed: u64, noise: f64) -> Dataset {
    synth_dataset(&SynthConfig {
        noise,
        ..SynthConfig::blobs(3, 600, seed)
    })
    .unwrap()
}

fn quick_model(data: &Dataset) -> MlpModel {
    train_sgd(
        data,
        &TrainConfig {
            epochs: 60,
            hidden: vec![32, 32],
            seed: 1,
            ..TrainConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn oracle_matches_on_larger_area_counts() {
    // T != n is allowed by the library; the oracle covers it too
    for seed in 0..200 {
        let mut inst = common::random_instance(50_000 + seed);
        let n = 1 + (seed as usize % 7);
        inst.areas = n;
        let (reference, new) = inst.matrices();
        let cfg = EstimationConfig {
            num_areas: n,
            num_passes: reference.num_passes(),
            ..EstimationConfig::default()
        };
        match (common::oracle_estimate(&inst), estimate(&reference, &inst.truth, &new, &cfg)) {
            (Some(o), Ok(g)) => {
                assert_eq!(o.acc1.to_bits(), g.acc1.to_bits(), "seed {seed}");
                assert_eq!(o.acc2.to_bits(), g.acc2.to_bits(), "seed {seed}");
            }
            (None, Err(Error::DegenerateReference(_))) => {}
            (o, g) => panic!("seed {seed}: oracle {o:?} vs {g:?}"),
        }
    }
}

#[test]
fn noiseless_two_class_blobs_are_learned() {
    let data = synth_dataset(&SynthConfig {
        noise: 0.0,
        ..SynthConfig::blobs(2, 400, 3)
    })
    .unwrap();
    let model = train_sgd(
        &data,
        &TrainConfig {
            epochs: 20,
            seed: 2,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let acc = evaluate_accuracy(&model, data.features(), data.labels()).unwrap();
    assert!(acc >= 0.95, "accuracy {acc}");
}

#[test]
fn dropout_is_unbiased_in_expectation() {
    // output pre-activations are linear in the dropped hidden units, so their
    // mean over many passes must match the deterministic pass
    let model = MlpModel::init(&[3, 8, 2], 0.5, 1.0, 7).unwrap();
    let x = [0.3, -0.8, 0.5];
    let det = pre_activations(&model, &x, None).unwrap();
    let hidden: Vec<f64> = det[0].iter().map(|z| z.max(0.0)).collect();
    let passes = 10_000;
    let mut sum = [0.0; 2];
    for k in 0..passes {
        let z = pre_activations(&model, &x, Some(pass_seed(11, k, 0))).unwrap();
        sum[0] += z[1][0];
        sum[1] += z[1][1];
    }
    let p = model.dropout_rate();
    for j in 0..2 {
        let w = &model.weights(1)[j * 8..(j + 1) * 8];
        let var: f64 = w.iter().zip(&hidden).map(|(w, h)| (w * h).powi(2) * p / (1.0 - p)).sum();
        let sigma = (var / passes as f64).sqrt();
        let mean = sum[j] / passes as f64;
        assert!((mean - det[1][j]).abs() <= 3.0 * sigma, "output {j}: {mean} vs {}", det[1][j]);
    }
}

#[test]
fn gate_starvation_is_reported() {
    let data = small_blobs(1, 0.1);
    let model = quick_model(&data);
    let cfg = MutationConfig {
        operator: MutationOperator::GaussianFuzz,
        mutation_ratio: 1.0,
        fuzz_scale: 10.0,
        accuracy_threshold: 1.0,
        num_mutants: 5,
        max_attempts: Some(40),
        seed: 3,
    };
    match generate_mutants(&model, &data, &cfg) {
        Err(e @ Error::GateStarvation { attempts: 40, .. }) => assert_eq!(e.exit_code(), 5),
        other => panic!("expected starvation, got {:?}", other.map(|e| e.len())),
    }
}

#[test]
fn single_mutant_gives_unit_lvr() {
    let data = small_blobs(2, 0.1);
    let model = quick_model(&data);
    for op in MutationOperator::CONCRETE {
        let cfg = MutationConfig {
            operator: op,
            num_mutants: 1,
            seed: 5,
            ..MutationConfig::default()
        };
        let ens = generate_mutants(&model, &data, &cfg).unwrap();
        let lvr = compute_lvr(&mutant_predict(&ens, data.features()).unwrap());
        assert!(lvr.iter().all(|v| v.value() == 1.0), "{op}");
    }
}

#[test]
fn mutant_estimate_runs_end_to_end() {
    let data = small_blobs(4, 0.1);
    let (train, test) = data.split_at(300);
    let (reference, new) = test.shuffle_split(150, 9);
    let model = quick_model(&train);
    let cfg = MutationConfig {
        num_mutants: 10,
        seed: 8,
        ..MutationConfig::default()
    };
    let ens = generate_mutants(&model, &reference, &cfg).unwrap();
    let r = mutant_predict(&ens, reference.features()).unwrap();
    let n = mutant_predict(&ens, new.features()).unwrap();
    let res = estimate(&r, reference.labels(), &n, &EstimationConfig::with_areas(10)).unwrap();
    assert!(res.acc1.is_finite() && res.acc2.is_finite());
}

#[test]
fn sweep_is_grid_ordered_and_reproducible() {
    let data = small_blobs(5, 0.1);
    let (train, test) = data.split_at(300);
    let (reference, new) = test.shuffle_split(150, 1);
    let model = quick_model(&train);
    let run = || sweep(&model, &reference, &new, &[5, 10], &[0.2, 0.5], &EstimationConfig::default(), 3).unwrap();
    let rows = run();
    let grid: Vec<(usize, f64)> = rows.iter().map(|r| (r.num_areas, r.dropout_rate)).collect();
    assert_eq!(grid, vec![(5, 0.2), (5, 0.5), (10, 0.2), (10, 0.5)]);
    assert_eq!(rows, run());
}

#[test]
fn mc_predict_depends_only_on_seed() {
    let data = small_blobs(6, 0.2);
    let model = quick_model(&data);
    let a = mc_predict(&model, data.features(), 10, derive(1, &[2])).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| mc_predict(&model, data.features(), 10, derive(1, &[2])).unwrap());
    assert_eq!(a, b);
    let c = mc_predict(&model, data.features(), 10, derive(1, &[3])).unwrap();
    assert_ne!(a, c);
}

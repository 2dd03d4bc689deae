//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always show up in the test
//! output; the process fails if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use lvr_core::baselines::{compare_report, default_budgets, random_select_estimate, BudgetEstimates};
use lvr_core::corruptions::{Corruption, Severity};
use lvr_core::data::{synth_dataset, SynthConfig};
use lvr_core::estimator::{estimate, estimate_from_profile, EstimationConfig, ReferenceProfile};
use lvr_core::io::{
    dataset_from_text, dataset_to_text, model_from_text, model_to_text, read_dataset, read_model,
    write_dataset, write_model, PredictionLog, PredictionSource,
};
use lvr_core::lvr::LabelMatrix;
use lvr_core::mutation::{generate_mutants, mutant_predict, switch_neurons, MutationConfig};
use lvr_core::nn::{
    evaluate_accuracy, loss_and_gradients, mc_predict, predict_labels, softmax, train_sgd, MlpModel,
    TrainConfig,
};
use lvr_core::rng::{derive, rng_from};
use lvr_core::studies::{area_agreement, severity_ladder, top_fraction_fit, Evaluation, ToySetup};
use lvr_core::{compute_lvr, Error};
use rand::Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {id:>2} [{}] {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

fn pp(x: f64) -> f64 {
    x * 100.0
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn worked_example(r: &mut Report) {
    let start = Instant::now();
    let profile = ReferenceProfile::from_accuracies(&[0.6, 0.7, 0.8], &[200, 300, 400], 0.70).unwrap();
    let res = estimate_from_profile(&profile, &[300, 400, 500], &EstimationConfig::with_areas(3)).unwrap();
    let elapsed = start.elapsed();
    // hand evaluation of the three formulas
    let acc1 = (300.0 * 0.6 + 400.0 * 0.7 + 500.0 * 0.8) / 1200.0;
    let acc2 = (500.0 / 1200.0) / (400.0 / 900.0) * 0.70;
    let expected = [(res.acc1, acc1, 0.716667), (res.acc2, acc2, 0.656250), (res.acc_new, (acc1 + acc2) / 2.0, 0.686458)];
    let ok = expected
        .iter()
        .all(|&(got, hand, printed)| (got - hand).abs() < 1e-6 && (got - printed).abs() < 1e-6);
    r.line(
        1,
        "worked example",
        ok && elapsed < Duration::from_secs(1),
        format!(
            "acc1 {:.6} acc2 {:.6} acc_new {:.6} in {:?}; known discrepancy: the variant 72.22% / 66.35% / 69.29% \
             is not produced by these inputs (0.7222 weights the area accuracies by reference sizes instead of new sizes; \
             the ratio term evaluates to 0.65625, not 0.6635)",
            res.acc1, res.acc2, res.acc_new, elapsed
        ),
    );
}

fn oracle_equivalence(r: &mut Report) {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut degenerate = 0;
    for seed in 0..1000 {
        let inst = common::random_instance(seed);
        let (reference, new) = inst.matrices();
        let got = estimate(&reference, &inst.truth, &new, &EstimationConfig::with_areas(inst.areas));
        match (common::oracle_estimate(&inst), got) {
            (Some(o), Ok(g)) => {
                let same = [(o.acc1, g.acc1), (o.acc2, g.acc2), (o.acc_new, g.acc_new), (o.acc_ori, g.acc_ori)]
                    .iter()
                    .all(|(a, b)| a.to_bits() == b.to_bits());
                if !same {
                    mismatches += 1;
                }
            }
            (None, Err(Error::DegenerateReference(_))) => degenerate += 1,
            _ => mismatches += 1,
        }
    }
    let elapsed = start.elapsed();
    r.line(
        2,
        "oracle equivalence",
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("1000 instances, {mismatches} mismatches ({degenerate} degenerate on both sides) in {elapsed:?}"),
    );
}

fn self_estimation(r: &mut Report) {
    // acc2 is undefined when the top area is empty, so such draws are skipped
    let (mut bad, mut done, mut skipped) = (0, 0, 0);
    for seed in 10_000.. {
        if done == 100 {
            break;
        }
        let inst = common::random_instance(seed);
        if common::oracle_estimate(&inst).is_none() {
            skipped += 1;
            continue;
        }
        done += 1;
        let (reference, _) = inst.matrices();
        let correct = inst
            .reference
            .iter()
            .zip(&inst.truth)
            .filter(|(row, &y)| common::oracle_dominant(row, inst.num_classes).0 == y)
            .count();
        let acc = correct as f64 / inst.reference.len() as f64;
        let res = estimate(&reference, &inst.truth, &reference, &EstimationConfig::with_areas(inst.areas)).unwrap();
        if [res.acc1, res.acc2, res.acc_new].iter().any(|v| *v != acc) {
            bad += 1;
        }
    }
    r.line(3, "self-estimation identity", bad == 0, format!("100 instances, {bad} inexact ({skipped} degenerate draws skipped)"));
}

struct Toy {
    setups: Vec<ToySetup>,
}

fn toy_runs(r: &mut Report) -> Toy {
    let cfg = EstimationConfig::with_areas(50);
    let start = Instant::now();
    let setups: Vec<ToySetup> = SEEDS.iter().map(|&s| ToySetup::blobs(s).unwrap()).collect();
    let in_dist: Vec<Evaluation> = setups.iter().map(|s| s.estimate_on(&s.new, &cfg).unwrap()).collect();
    let elapsed = start.elapsed();
    let errors: Vec<String> = in_dist.iter().map(|e| format!("{:.2}", pp(e.error()))).collect();
    let within = in_dist.iter().filter(|e| e.error() <= 0.03).count();
    r.line(
        4,
        "in-distribution estimate",
        within >= 4 && elapsed < Duration::from_secs(120),
        format!("|acc_new - true| in pp per seed [{}]; {within}/5 within 3 pp; {elapsed:?}", errors.join(", ")),
    );
    Toy { setups }
}

fn shift_and_regression(r: &mut Report, toy: &Toy) {
    let cfg = EstimationConfig::with_areas(50);
    let ladders: Vec<_> = toy
        .setups
        .iter()
        .map(|s| severity_ladder(s, Corruption::GaussianNoise, &cfg).unwrap())
        .collect();

    let mut medians = Vec::new();
    let mut closer = 0;
    let mut runs = 0;
    for level in 1..=3 {
        let mut errs = Vec::new();
        for ladder in &ladders {
            let e = &ladder[level].evaluation;
            errs.push(e.error());
            runs += 1;
            if e.error() <= e.acc1_error().min(e.acc2_error()) + 0.02 {
                closer += 1;
            }
        }
        medians.push(median(errs));
    }
    let share = closer as f64 / runs as f64;
    r.line(
        5,
        "gaussian-noise shift",
        medians.iter().all(|&m| m <= 0.06) && share >= 0.6,
        format!(
            "median error pp at severity 1..3 [{}]; combined within 2 pp of the better part in {closer}/{runs} runs",
            medians.iter().map(|m| format!("{:.2}", pp(*m))).collect::<Vec<_>>().join(", ")
        ),
    );

    let rs: Vec<f64> = ladders.iter().map(|l| top_fraction_fit(l).unwrap().pearson_r).collect();
    r.line(
        6,
        "top-area fraction tracks accuracy",
        rs.iter().all(|&v| v >= 0.9),
        format!(
            "Pearson r over severities 0..4 per seed [{}]",
            rs.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

fn area_agreement_check(r: &mut Report, toy: &Toy) {
    let mut worst: f64 = 0.0;
    let mut areas = 0;
    for s in &toy.setups {
        let rows = area_agreement(&s.model, &s.reference, &s.new, 50, 50, derive(s.seed, &[40])).unwrap();
        for row in rows.iter().filter(|a| a.first_size >= 30 && a.second_size >= 30) {
            areas += 1;
            worst = worst.max((row.first_acc.unwrap() - row.second_acc.unwrap()).abs());
        }
    }
    r.line(
        7,
        "per-area accuracy agreement",
        areas > 0 && worst <= 0.10,
        format!("{areas} areas with >= 30 samples in both halves over 5 seeds; largest gap {:.2} pp", pp(worst)),
    );
}

fn mutation_suite(r: &mut Report, toy: &Toy) {
    let s = &toy.setups[0];
    let cfg = MutationConfig {
        num_mutants: 50,
        mutation_ratio: 0.1,
        accuracy_threshold: 0.9,
        seed: 77,
        ..MutationConfig::default()
    };
    let ens = generate_mutants(&s.model, &s.reference, &cfg).unwrap();
    let floor = 0.9 * evaluate_accuracy(&s.model, s.reference.features(), s.reference.labels()).unwrap();
    let compliant = ens.len() == 50
        && ens
            .mutants
            .iter()
            .all(|m| evaluate_accuracy(m, s.reference.features(), s.reference.labels()).unwrap() >= floor);

    let zero = generate_mutants(&s.model, &s.reference, &MutationConfig { mutation_ratio: 0.0, ..cfg.clone() }).unwrap();
    let lvr = compute_lvr(&mutant_predict(&zero, s.new.features()).unwrap());
    let all_ones = lvr.iter().all(|v| v.dominant_count == v.passes);

    let mut involution = true;
    for seed in 0..100 {
        let mut rng = rng_from(derive(seed, &[5]));
        let sizes = [rng.random_range(1..6), rng.random_range(2..8), rng.random_range(2..8), rng.random_range(2..5)];
        let model = MlpModel::init(&sizes, 0.5, 1.0, seed).unwrap();
        let layer = rng.random_range(0..2);
        let width = sizes[layer + 1];
        let (a, b) = (rng.random_range(0..width), rng.random_range(0..width));
        let mut twice = model.clone();
        switch_neurons(&mut twice, layer, a, b);
        switch_neurons(&mut twice, layer, a, b);
        involution &= twice == model;
    }
    r.line(
        8,
        "mutation suite",
        compliant && all_ones && involution,
        format!(
            "{} mutants, all >= gate {floor:.4}: {compliant}; ratio-0 LVR all ones: {all_ones}; switch involution on 100 models: {involution}",
            ens.len()
        ),
    );
}

fn numerics(r: &mut Report, toy: &Toy) {
    // central differences on a small model with a fixed dropout mask
    let mut worst_rel: f64 = 0.0;
    for seed in 0..5u64 {
        let mut model = MlpModel::init(&[4, 6, 5, 3], 0.5, 1.0, seed).unwrap();
        let mut rng = rng_from(derive(seed, &[9]));
        // zero biases put units exactly on the ReLU kink whenever all their
        // inputs are dropped; move them to a differentiable point
        for l in 0..model.num_layers() {
            for b in model.biases_mut(l) {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let xs: Vec<f64> = (0..8 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
        let feats = lvr_core::data::Features::new(4, &xs).unwrap();
        let mask = Some(derive(seed, &[10]));
        let (_, g) = loss_and_gradients(&model, feats, &labels, mask).unwrap();
        let h = 1e-5;
        for l in 0..model.num_layers() {
            for i in 0..model.weights(l).len() {
                let mut plus = model.clone();
                plus.weights_mut(l)[i] += h;
                let mut minus = model.clone();
                minus.weights_mut(l)[i] -= h;
                let num = (loss_and_gradients(&plus, feats, &labels, mask).unwrap().0
                    - loss_and_gradients(&minus, feats, &labels, mask).unwrap().0)
                    / (2.0 * h);
                let ana = g.weights[l][i];
                worst_rel = worst_rel.max((num - ana).abs() / num.abs().max(ana.abs()).max(1e-6));
            }
            for i in 0..model.biases(l).len() {
                let mut plus = model.clone();
                plus.biases_mut(l)[i] += h;
                let mut minus = model.clone();
                minus.biases_mut(l)[i] -= h;
                let num = (loss_and_gradients(&plus, feats, &labels, mask).unwrap().0
                    - loss_and_gradients(&minus, feats, &labels, mask).unwrap().0)
                    / (2.0 * h);
                let ana = g.biases[l][i];
                worst_rel = worst_rel.max((num - ana).abs() / num.abs().max(ana.abs()).max(1e-6));
            }
        }
    }

    let mut rng = rng_from(3);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..1000 {
        let scale = [1.0, 10.0, 500.0][rng.random_range(0..3)];
        let z: Vec<f64> = (0..rng.random_range(2..12)).map(|_| rng.random_range(-scale..scale)).collect();
        worst_sum = worst_sum.max((softmax(&z).iter().sum::<f64>() - 1.0).abs());
    }

    let s = &toy.setups[0];
    let run = || {
        (
            mc_predict(&s.model, s.new.features(), 20, 5).unwrap(),
            predict_labels(&s.model, s.new.features()).unwrap(),
        )
    };
    let repeat = run() == run();
    let small = synth_dataset(&SynthConfig::blobs(3, 300, 1)).unwrap();
    let tcfg = TrainConfig { epochs: 3, seed: 4, ..TrainConfig::default() };
    let retrain = train_sgd(&small, &tcfg).unwrap() == train_sgd(&small, &tcfg).unwrap();
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let mcfg = MutationConfig { num_mutants: 5, seed: 3, ..MutationConfig::default() };
    let on = |n| {
        pool(n).install(|| {
            let m = mc_predict(&s.model, s.new.features(), 20, 5).unwrap();
            let e = generate_mutants(&s.model, &s.reference, &mcfg).unwrap();
            (m, e.mutants, e.gate_report.len())
        })
    };
    let threads = on(1) == on(4);

    r.line(
        9,
        "numerics",
        worst_rel <= 1e-4 && worst_sum <= 1e-9 && repeat && retrain && threads,
        format!(
            "gradient check max relative error {worst_rel:.2e}; softmax max |sum - 1| {worst_sum:.1e}; \
             repeated runs identical: {}; 1 vs 4 threads identical: {threads}",
            repeat && retrain
        ),
    );
}

fn baselines(r: &mut Report, toy: &Toy) {
    let s = &toy.setups[0];
    let shifted = s.corrupted_new(Corruption::GaussianNoise, Severity::new(2).unwrap()).unwrap();
    let predicted = predict_labels(&s.model, shifted.features()).unwrap();
    let correct: Vec<bool> = predicted.iter().zip(shifted.labels()).map(|(p, y)| p == y).collect();
    let acc = correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64;
    let mut worst_z: f64 = 0.0;
    for &b in &default_budgets() {
        let mean = (0..1000u64)
            .map(|seed| random_select_estimate(&correct, b, derive(seed, &[b as u64])).unwrap())
            .sum::<f64>()
            / 1000.0;
        // standard error of a mean of 1000 budget-sized draws
        let se = (acc * (1.0 - acc) / (b as f64 * 1000.0)).sqrt();
        worst_z = worst_z.max((mean - acc).abs() / se);
    }
    let eval = s.estimate_on(&shifted, &EstimationConfig::with_areas(50)).unwrap();
    let est: Vec<BudgetEstimates> = default_budgets()
        .into_iter()
        .map(|b| BudgetEstimates { budget: b, random: 0.0, ces: 0.0 })
        .collect();
    let table = compare_report(&eval.result, &est, acc);
    let budgets: Vec<usize> = table.rows.iter().map(|row| row.budget).collect();
    let rows_ok = budgets == (50..=180).step_by(10).collect::<Vec<_>>();
    r.line(
        10,
        "baselines",
        worst_z <= 3.0 && rows_ok,
        format!(
            "random-selection mean over 1000 seeds off by at most {worst_z:.3} standard errors of the mean across budgets; \
             comparison table rows {}",
            table.rows.len()
        ),
    );
}

fn round_trips(r: &mut Report, toy: &Toy) {
    let s = &toy.setups[0];
    let dir = tempfile::tempdir().unwrap();
    let cfg = EstimationConfig::with_areas(50);
    let ref_log = PredictionLog {
        matrix: mc_predict(&s.model, s.reference.features(), 50, 1).unwrap(),
        truth: Some(s.reference.labels().to_vec()),
        source: PredictionSource::Dropout,
        master_seed: 1,
    };
    let new_log = PredictionLog {
        matrix: mc_predict(&s.model, s.new.features(), 50, 2).unwrap(),
        truth: None,
        source: PredictionSource::Dropout,
        master_seed: 2,
    };
    let (rp, np) = (dir.path().join("ref.txt"), dir.path().join("new.txt"));
    ref_log.write(&rp).unwrap();
    new_log.write(&np).unwrap();
    let (ref_back, new_back) = (PredictionLog::read(&rp).unwrap(), PredictionLog::read(&np).unwrap());
    let logs_ok = ref_back == ref_log && new_back == new_log;

    let mp = dir.path().join("model.txt");
    write_model(&s.model, &mp).unwrap();
    let back = read_model(&mp).unwrap();
    let bits = |m: &MlpModel| -> Vec<u64> {
        (0..m.num_layers())
            .flat_map(|l| m.weights(l).iter().chain(m.biases(l)).map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    let model_ok = bits(&back) == bits(&s.model)
        && back == s.model
        && model_from_text(&model_to_text(&s.model)).unwrap() == s.model;

    let dp = dir.path().join("data.txt");
    write_dataset(&s.reference, &dp).unwrap();
    let dback = read_dataset(&dp).unwrap();
    let data_ok = dback.raw_features().iter().map(|v| v.to_bits()).eq(s.reference.raw_features().iter().map(|v| v.to_bits()))
        && dback == s.reference
        && dataset_from_text(&dataset_to_text(&s.reference)).unwrap() == s.reference;

    let mem = estimate(&ref_log.matrix, s.reference.labels(), &new_log.matrix, &cfg).unwrap();
    let file = estimate(&ref_back.matrix, ref_back.truth.as_ref().unwrap(), &new_back.matrix, &cfg).unwrap();
    let est_ok = mem == file && mem.acc_new.to_bits() == file.acc_new.to_bits();

    // a hand-authored log is accepted too
    let hand = PredictionLog::parse("lvr-prediction-log 1\nnum_samples=1\nnum_passes=2\nnum_classes=2\nsource=dropout\nmaster_seed=0\nhas_truth=false\n---\n0 1\n");
    let hand_ok = hand.map(|h| h.matrix == LabelMatrix::from_rows(&[vec![0, 1]], 2).unwrap()).unwrap_or(false);

    r.line(
        11,
        "format round-trips",
        logs_ok && model_ok && data_ok && est_ok && hand_ok,
        format!(
            "prediction logs {logs_ok}, model {model_ok}, dataset {data_ok}, file-mediated estimate identical {est_ok}, hand-written log {hand_ok}"
        ),
    );
}

fn main() {
    let mut r = Report { failures: 0 };
    worked_example(&mut r);
    oracle_equivalence(&mut r);
    self_estimation(&mut r);
    let toy = toy_runs(&mut r);
    shift_and_regression(&mut r, &toy);
    area_agreement_check(&mut r, &toy);
    mutation_suite(&mut r, &toy);
    numerics(&mut r, &toy);
    baselines(&mut r, &toy);
    round_trips(&mut r, &toy);
    println!("{} of 11 criteria passed", 11 - r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}

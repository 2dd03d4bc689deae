//! Command-line front end. The `lvr` binary is a thin wrapper around [`run`].
//!
//! Every command takes `--seed` (default from `LVR_SEED`) and `--out`, a
//! directory that receives the command's files plus `manifest.json`. The
//! manifest echoes the full parsed command, so [`Command::from_manifest`] can
//! re-run it.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::{
    ces_select_estimate, compare_report, default_budgets, random_select_estimate, BudgetEstimates,
    CesConfig, FeatureMatrix, SelectionBudget,
};
use crate::corruptions::{corrupt_dataset, Corruption, ImageShape, Severity};
use crate::data::{synth_dataset, Dataset, SynthConfig, SynthKind};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate, estimate_acc1, estimate_from_profile, sweep, EmptyAreaPolicy, EstimationConfig,
    ReferenceProfile,
};
use crate::io::{
    estimation_to_json_line, estimation_to_text, read_dataset, read_model, write_atomic,
    write_dataset, write_model, PredictionLog, PredictionSource,
};
use crate::manifest::{EnsembleManifest, RunManifest};
use crate::mutation::{generate_mutants, mutant_predict, MutationConfig, MutationOperator};
use crate::nn::{evaluate_accuracy, hidden_features, mc_predict, predict_labels, TrainConfig};
use crate::rng::{derive, DEFAULT_SEED, SEED_ENV};
use crate::studies::{area_agreement, severity_ladder, top_fraction_fit, ToySetup};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "lvr", version, about = "Label-free accuracy estimation from label variation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Synthesize or load a dataset, train the toy classifier, and write the
    /// model plus train / reference / new splits.
    Train(TrainArgs),
    /// Write a prediction log of T labels per sample, from dropout passes or
    /// a mutant ensemble.
    Predict(PredictArgs),
    /// Estimate accuracy on a new log from a labeled reference log.
    Estimate(EstimateArgs),
    /// Estimation error over a grid of area counts and dropout rates.
    Sweep(SweepArgs),
    /// Apply an image corruption to every row of a dataset.
    Corrupt(CorruptArgs),
    /// Compare the estimator with label-budgeted selection baselines.
    Baseline(BaselineArgs),
    /// Toy-scale per-area agreement and top-fraction regression studies.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// Master seed; every random draw of the command derives from it.
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Labeled dataset file; synthesized when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "blobs")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Blob feature width.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Blob center distance from the cube center.
    #[arg(long, default_value_t = 0.3)]
    pub radius: f64,
    /// Leading samples used for training; the rest is split into reference and new halves.
    #[arg(long, default_value_t = 3000)]
    pub train_size: usize,
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Monte-Carlo dropout passes.
    #[arg(long, default_value_t = 50)]
    pub passes: usize,
    /// Dropout rate; defaults to the model's own.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Use an ensemble of this many mutants instead of dropout.
    #[arg(long)]
    pub mutants: Option<usize>,
    #[arg(long, default_value = "random")]
    pub operator: MutationOperator,
    #[arg(long, default_value_t = 0.1)]
    pub ratio: f64,
    /// Relative accuracy gate for mutants.
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub fuzz_scale: f64,
    /// Labeled data for the mutant gate; defaults to `--data`.
    #[arg(long)]
    pub gate_data: Option<PathBuf>,
    /// Leave the true-label column out of the log.
    #[arg(long)]
    pub no_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Reference prediction log with true labels.
    #[arg(long, required_unless_present = "profile", requires = "new")]
    pub reference: Option<PathBuf>,
    /// Prediction log of the new set.
    #[arg(long)]
    pub new: Option<PathBuf>,
    /// JSON reference profile (`area_accuracy`, `sizes`, `acc_ori`) used
    /// instead of a reference log; needs `--new-sizes`.
    #[arg(long, conflicts_with = "reference", requires = "new_sizes")]
    pub profile: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub new_sizes: Option<Vec<usize>>,
    /// Number of areas; defaults to the number of passes.
    #[arg(long)]
    pub areas: Option<usize>,
    #[arg(long, default_value = "zero")]
    pub empty_policy: EmptyAreaPolicy,
    /// Clamp the ratio estimate to [0, 1].
    #[arg(long)]
    pub clamp: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,20,50,100")]
    pub areas_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7")]
    pub rates_list: Vec<f64>,
    #[arg(long, default_value = "zero")]
    pub empty_policy: EmptyAreaPolicy,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub transform: Corruption,
    /// 0 (identity) to 4.
    #[arg(long)]
    pub severity: u8,
    /// `HxW` or `HxWxC`; defaults to a square single-channel image.
    #[arg(long)]
    pub shape: Option<ImageShape>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled reference dataset for the label-free estimate.
    #[arg(long)]
    pub reference: PathBuf,
    /// Labeled new dataset; baselines may only look at the budgeted labels.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    /// Dropout passes and areas for the label-free estimate.
    #[arg(long, default_value_t = 50)]
    pub passes: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplicateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "gaussian-noise")]
    pub corruption: Corruption,
    #[arg(long, default_value_t = 50)]
    pub areas: usize,
    /// Minimum samples per half for an area to count in the agreement summary.
    #[arg(long, default_value_t = 30)]
    pub min_size: usize,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Estimate(_) => "estimate",
            Command::Sweep(_) => "sweep",
            Command::Corrupt(_) => "corrupt",
            Command::Baseline(_) => "baseline",
            Command::Replicate(_) => "replicate",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Train(a) => &a.common,
            Command::Predict(a) => &a.common,
            Command::Estimate(a) => &a.common,
            Command::Sweep(a) => &a.common,
            Command::Corrupt(a) => &a.common,
            Command::Baseline(a) => &a.common,
            Command::Replicate(a) => &a.common,
        }
    }

    fn common_mut(&mut self) -> &mut Common {
        match self {
            Command::Train(a) => &mut a.common,
            Command::Predict(a) => &mut a.common,
            Command::Estimate(a) => &mut a.common,
            Command::Sweep(a) => &mut a.common,
            Command::Corrupt(a) => &mut a.common,
            Command::Baseline(a) => &mut a.common,
            Command::Replicate(a) => &mut a.common,
        }
    }

    /// Rebuild the command recorded in a manifest, writing to `out` instead.
    pub fn from_manifest(manifest: &RunManifest, out: &Path) -> Result<Self> {
        let mut cmd: Command = serde_json::from_value(manifest.config.clone())?;
        cmd.common_mut().out = out.to_path_buf();
        Ok(cmd)
    }

    /// Run the command, writing its files and manifest into `--out`.
    pub fn execute(&self, stdout: &mut dyn Write) -> Result<RunManifest> {
        let out = &self.common().out;
        std::fs::create_dir_all(out)?;
        let mut ctx = Ctx {
            manifest: RunManifest::new(self.name(), serde_json::to_value(self)?),
            out: out.clone(),
            stdout,
        };
        let status = match self {
            Command::Train(a) => train(a, &mut ctx),
            Command::Predict(a) => predict(a, &mut ctx),
            Command::Estimate(a) => estimate_cmd(a, &mut ctx),
            Command::Sweep(a) => sweep_cmd(a, &mut ctx),
            Command::Corrupt(a) => corrupt(a, &mut ctx),
            Command::Baseline(a) => baseline(a, &mut ctx),
            Command::Replicate(a) => replicate(a, &mut ctx),
        };
        // A degenerate reference still leaves a fallback report behind.
        if status.is_ok() || matches!(status, Err(Error::DegenerateReference(_))) {
            ctx.manifest.write(&out.join(MANIFEST_FILE))?;
        }
        status.map(|()| ctx.manifest)
    }
}

struct Ctx<'a> {
    manifest: RunManifest,
    out: PathBuf,
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.add_input(path)
    }

    fn output(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.out.join(name);
        write_atomic(&p, contents.as_bytes())?;
        self.manifest.add_output(&p)?;
        Ok(p)
    }

    fn record(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.out.join(name);
        self.manifest.add_output(&p)?;
        Ok(p)
    }

    fn say(&mut self, text: &str) -> Result<()> {
        self.stdout.write_all(text.as_bytes())?;
        Ok(())
    }
}

fn load_dataset(ctx: &mut Ctx, path: &Path) -> Result<Dataset> {
    ctx.input(path)?;
    read_dataset(path)
}

fn json_lines<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut s = String::new();
    for r in rows {
        s += &serde_json::to_string(&r)?;
        s.push('\n');
    }
    Ok(s)
}

fn train(a: &TrainArgs, ctx: &mut Ctx) -> Result<()> {
    let seed = a.common.seed;
    let data = match &a.data {
        Some(p) => load_dataset(ctx, p)?,
        None => synth_dataset(&SynthConfig {
            kind: a.kind,
            num_classes: a.classes,
            num_samples: a.samples,
            noise: a.noise,
            dim: a.dim,
            center_radius: a.radius,
            seed: derive(seed, &[1]),
        })?,
    };
    let cfg = TrainConfig {
        hidden: a.hidden.clone(),
        dropout_rate: a.rate,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: derive(seed, &[2]),
        init_scale: 1.0,
    };
    let setup = ToySetup::from_dataset(&data, a.train_size, &cfg, seed)?;
    for (name, d) in [("train.txt", &setup.train), ("reference.txt", &setup.reference), ("new.txt", &setup.new)] {
        write_dataset(d, &ctx.out.join(name))?;
        ctx.record(name)?;
    }
    write_model(&setup.model, &ctx.out.join("model.txt"))?;
    ctx.record("model.txt")?;
    let mut report = String::new();
    for (name, d) in [("train", &setup.train), ("reference", &setup.reference), ("new", &setup.new)] {
        let acc = evaluate_accuracy(&setup.model, d.features(), d.labels())?;
        report += &format!("{name:<10} {:>5} samples  accuracy {acc:.4}\n", d.len());
    }
    ctx.say(&report)
}

fn predict(a: &PredictArgs, ctx: &mut Ctx) -> Result<()> {
    ctx.input(&a.model)?;
    let mut model = read_model(&a.model)?;
    let data = load_dataset(ctx, &a.data)?;
    let truth = (!a.no_truth).then(|| data.labels().to_vec());
    let log = match a.mutants {
        None => {
            if let Some(p) = a.rate {
                model = model.with_dropout_rate(p)?;
            }
            PredictionLog {
                matrix: mc_predict(&model, data.features(), a.passes, a.common.seed)?,
                truth,
                source: PredictionSource::Dropout,
                master_seed: a.common.seed,
            }
        }
        Some(k) => {
            let gate = match &a.gate_data {
                Some(p) => load_dataset(ctx, p)?,
                None => data.clone(),
            };
            let cfg = MutationConfig {
                operator: a.operator,
                mutation_ratio: a.ratio,
                accuracy_threshold: a.threshold,
                num_mutants: k,
                seed: a.common.seed,
                fuzz_scale: a.fuzz_scale,
                max_attempts: None,
            };
            let ens = generate_mutants(&model, &gate, &cfg)?;
            EnsembleManifest::from_ensemble(&ens).write(&ctx.out.join("ensemble.json"))?;
            ctx.record("ensemble.json")?;
            ctx.say(&format!(
                "{} mutants accepted out of {} candidates (gate {:.4})\n",
                ens.len(),
                ens.gate_report.len(),
                ens.gate_floor()
            ))?;
            PredictionLog {
                matrix: mutant_predict(&ens, data.features())?,
                truth,
                source: PredictionSource::Mutants,
                master_seed: a.common.seed,
            }
        }
    };
    log.write(&ctx.out.join("predictions.txt"))?;
    ctx.record("predictions.txt")?;
    ctx.say(&format!(
        "{} samples x {} predictions written\n",
        log.matrix.num_samples(),
        log.matrix.num_passes()
    ))
}

/// Reference profile given directly as per-area accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub area_accuracy: Vec<f64>,
    pub sizes: Vec<usize>,
    pub acc_ori: f64,
}

fn estimate_cmd(a: &EstimateArgs, ctx: &mut Ctx) -> Result<()> {
    let (result, cfg) = if let Some(p) = &a.profile {
        ctx.input(p)?;
        let pf: ProfileFile = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        let profile = ReferenceProfile::from_accuracies(&pf.area_accuracy, &pf.sizes, pf.acc_ori)?;
        let n = a.areas.unwrap_or(pf.sizes.len());
        if n != pf.sizes.len() {
            return Err(Error::config(format!("profile has {} areas, not {n}", pf.sizes.len())));
        }
        let cfg = EstimationConfig {
            num_areas: n,
            num_passes: n,
            empty_area_policy: a.empty_policy,
            clamp_to_unit: a.clamp,
        };
        let new_sizes = a.new_sizes.as_deref().unwrap_or_default();
        (estimate_from_profile(&profile, new_sizes, &cfg), cfg)
    } else {
        let (rp, np) = (a.reference.as_ref().unwrap(), a.new.as_ref().unwrap());
        ctx.input(rp)?;
        ctx.input(np)?;
        let reference = PredictionLog::read(rp)?;
        let new = PredictionLog::read(np)?;
        let truth = reference
            .truth
            .as_ref()
            .ok_or_else(|| Error::input("reference log has no true-label column"))?;
        let t = reference.matrix.num_passes();
        let cfg = EstimationConfig {
            num_areas: a.areas.unwrap_or(t),
            num_passes: t,
            empty_area_policy: a.empty_policy,
            clamp_to_unit: a.clamp,
        };
        match estimate(&reference.matrix, truth, &new.matrix, &cfg) {
            Err(e @ Error::DegenerateReference(_)) => {
                let (acc1, _) = estimate_acc1(&reference.matrix, truth, &new.matrix, &cfg)?;
                ctx.output(
                    "estimate.txt",
                    &format!("acc1     {acc1:.4}\nacc2     undefined\nacc_new  undefined\nwarning: {e}\n"),
                )?;
                ctx.say(&format!("{e}\nfallback: acc1 only = {acc1:.4}\n"))?;
                return Err(e);
            }
            r => (r, cfg),
        }
    };
    let result = result?;
    let text = estimation_to_text(&result);
    ctx.output("estimate.txt", &text)?;
    ctx.output("estimate.jsonl", &estimation_to_json_line(&result)?)?;
    ctx.say(&format!("areas {}  passes {}\n{text}", cfg.num_areas, cfg.num_passes))
}

fn sweep_cmd(a: &SweepArgs, ctx: &mut Ctx) -> Result<()> {
    ctx.input(&a.model)?;
    let model = read_model(&a.model)?;
    let reference = load_dataset(ctx, &a.reference)?;
    let new = load_dataset(ctx, &a.new)?;
    let base = EstimationConfig {
        empty_area_policy: a.empty_policy,
        ..EstimationConfig::default()
    };
    let rows = sweep(&model, &reference, &new, &a.areas_list, &a.rates_list, &base, a.common.seed)?;
    let mut table = format!(
        "{:>6}  {:>5}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}\n",
        "areas", "rate", "acc1", "acc2", "acc_new", "real", "error"
    );
    for r in &rows {
        table += &format!(
            "{:>6}  {:>5.2}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}\n",
            r.num_areas,
            r.dropout_rate,
            r.result.acc1,
            r.result.acc2,
            r.result.acc_new,
            r.real_acc,
            r.abs_error()
        );
    }
    ctx.output("sweep.txt", &table)?;
    ctx.output("sweep.jsonl", &json_lines(&rows)?)?;
    ctx.say(&table)
}

fn corrupt(a: &CorruptArgs, ctx: &mut Ctx) -> Result<()> {
    let data = load_dataset(ctx, &a.data)?;
    let severity = Severity::new(a.severity)?;
    let shape = match a.shape {
        Some(s) => s,
        None => ImageShape::square_for(data.dim())?,
    };
    let shifted = corrupt_dataset(&data, a.transform, severity, shape, a.common.seed)?;
    write_dataset(&shifted, &ctx.out.join("corrupted.txt"))?;
    ctx.record("corrupted.txt")?;
    ctx.say(&format!(
        "{} at severity {} applied to {} samples\n",
        a.transform.name(),
        a.severity,
        shifted.len()
    ))
}

fn baseline(a: &BaselineArgs, ctx: &mut Ctx) -> Result<()> {
    let seed = a.common.seed;
    ctx.input(&a.model)?;
    let model = read_model(&a.model)?;
    let reference = load_dataset(ctx, &a.reference)?;
    let new = load_dataset(ctx, &a.data)?;
    let budget = SelectionBudget {
        sizes: a.budgets.clone().unwrap_or_else(default_budgets),
        seed,
    };
    budget.validate(new.len())?;

    let cfg = EstimationConfig::with_areas(a.passes);
    let ref_m = mc_predict(&model, reference.features(), a.passes, derive(seed, &[10]))?;
    let new_m = mc_predict(&model, new.features(), a.passes, derive(seed, &[11]))?;
    let lvr = estimate(&ref_m, reference.labels(), &new_m, &cfg)?;

    let predicted = predict_labels(&model, new.features())?;
    let correct: Vec<bool> = predicted.iter().zip(new.labels()).map(|(p, y)| p == y).collect();
    let true_acc = correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64;
    let (width, hidden) = hidden_features(&model, new.features())?;
    let features = FeatureMatrix::new(width, hidden)?;

    let mut estimates = Vec::with_capacity(budget.sizes.len());
    let mut warnings = Vec::new();
    for &b in &budget.sizes {
        let random = random_select_estimate(&correct, b, derive(seed, &[30, b as u64]))?;
        let ces = ces_select_estimate(
            &correct,
            &features,
            b,
            &CesConfig {
                seed: derive(seed, &[31, b as u64]),
                ..CesConfig::default()
            },
        )?;
        warnings.extend(ces.warnings);
        estimates.push(BudgetEstimates {
            budget: b,
            random,
            ces: ces.estimate,
        });
    }
    let mut table = compare_report(&lvr, &estimates, true_acc);
    warnings.dedup();
    table.notes.extend(warnings);
    ctx.output("estimates.jsonl", &json_lines(&estimates)?)?;
    ctx.output("comparison.jsonl", &json_lines(&table.rows)?)?;
    ctx.output("comparison.json", &(serde_json::to_string_pretty(&table)? + "\n"))?;
    let text = table.to_string();
    ctx.output("comparison.txt", &text)?;
    ctx.say(&text)
}

/// Summary of the replication studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub min_size: usize,
    pub qualifying_areas: Vec<usize>,
    pub max_gap: Option<f64>,
    pub corruption: Corruption,
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
}

fn replicate(a: &ReplicateArgs, ctx: &mut Ctx) -> Result<()> {
    let setup = ToySetup::blobs(a.common.seed)?;
    let agreement = area_agreement(
        &setup.model,
        &setup.reference,
        &setup.new,
        a.areas,
        a.areas,
        derive(a.common.seed, &[40]),
    )?;
    let qualifying: Vec<_> = agreement
        .iter()
        .filter(|r| r.first_size >= a.min_size && r.second_size >= a.min_size)
        .collect();
    let max_gap = qualifying
        .iter()
        .filter_map(|r| Some((r.first_acc? - r.second_acc?).abs()))
        .reduce(f64::max);
    let points = severity_ladder(&setup, a.corruption, &EstimationConfig::with_areas(a.areas))?;
    let fit = top_fraction_fit(&points)?;
    let summary = ReplicateSummary {
        min_size: a.min_size,
        qualifying_areas: qualifying.iter().map(|r| r.area).collect(),
        max_gap,
        corruption: a.corruption,
        slope: fit.slope,
        intercept: fit.intercept,
        pearson_r: fit.pearson_r,
    };
    ctx.output("agreement.jsonl", &json_lines(&agreement)?)?;
    ctx.output("shift.jsonl", &json_lines(&points)?)?;
    ctx.output("summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;

    let mut text = format!("per-area accuracy, areas with >= {} samples in both halves\n", a.min_size);
    text += &format!("{:>5}  {:>6}  {:>6}  {:>8}  {:>8}\n", "area", "n1", "n2", "acc1", "acc2");
    for r in &qualifying {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        text += &format!(
            "{:>5}  {:>6}  {:>6}  {:>8}  {:>8}\n",
            r.area,
            r.first_size,
            r.second_size,
            fmt(r.first_acc),
            fmt(r.second_acc)
        );
    }
    if let Some(g) = max_gap {
        text += &format!("largest gap {g:.4}\n");
    }
    text += &format!("\n{} severity ladder\n", a.corruption.name());
    text += &format!("{:>8}  {:>8}  {:>8}  {:>8}\n", "severity", "real", "top", "acc_new");
    for p in &points {
        text += &format!(
            "{:>8}  {:>8.4}  {:>8.4}  {:>8.4}\n",
            p.severity, p.evaluation.real_acc, p.evaluation.top_fraction, p.evaluation.result.acc_new
        );
    }
    text += &format!(
        "top fraction = {:.4} * accuracy + {:.4}  (r = {:.4})\n",
        fit.slope, fit.intercept, fit.pearson_r
    );
    ctx.output("summary.txt", &text)?;
    ctx.say(&text)
}

/// Parse `args` (including the program name), run, and return the exit code.
/// Usage errors exit with the configuration code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                Error::config("").exit_code()
            } else {
                0
            };
            let msg = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(msg.as_bytes()) } else { stderr.write_all(msg.as_bytes()) };
            return code;
        }
    };
    match cli.command.execute(stdout) {
        Ok(_) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

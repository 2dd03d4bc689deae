//! Desk-scale experiment drivers shared by the CLI, the examples and the
//! acceptance tests.

use serde::{Deserialize, Serialize};

use crate::corruptions::{corrupt_dataset, Corruption, ImageShape, Severity};
use crate::data::{synth_dataset, Dataset, SynthConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimationConfig, EstimationResult};
use crate::lvr::{area_accuracy, compute_lvr, partition_areas};
use crate::nn::{evaluate_accuracy, mc_predict, train_sgd, MlpModel, TrainConfig};
use crate::rng::derive;

/// A trained toy classifier with a labeled reference half and a held-out
/// "new" half of its test split.
#[derive(Debug, Clone)]
pub struct ToySetup {
    pub train: Dataset,
    pub reference: Dataset,
    pub new: Dataset,
    pub model: MlpModel,
    pub seed: u64,
}

impl ToySetup {
    /// 5,000 three-class blob samples: 3,000 for training, the remaining
    /// 2,000 split evenly into reference and new halves.
    pub fn blobs(seed: u64) -> Result<Self> {
        let data = synth_dataset(&SynthConfig::blobs(3, 5000, derive(seed, &[1])))?;
        Self::from_dataset(&data, 3000, &TrainConfig { seed: derive(seed, &[2]), ..TrainConfig::default() }, seed)
    }

    pub fn from_dataset(data: &Dataset, train_size: usize, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        if train_size >= data.len() {
            return Err(Error::config("training split leaves no test data"));
        }
        let (train, test) = data.split_at(train_size);
        let half = test.len() / 2;
        let (reference, new) = test.shuffle_split(half, derive(seed, &[3]));
        let model = train_sgd(&train, cfg)?;
        Ok(Self {
            train,
            reference,
            new,
            model,
            seed,
        })
    }

    /// Estimate the accuracy of `new` against the reference half.
    pub fn estimate_on(&self, new: &Dataset, cfg: &EstimationConfig) -> Result<Evaluation> {
        let ref_m = mc_predict(&self.model, self.reference.features(), cfg.num_passes, derive(self.seed, &[10]))?;
        let new_m = mc_predict(&self.model, new.features(), cfg.num_passes, derive(self.seed, &[11]))?;
        let mut result = estimate(&ref_m, self.reference.labels(), &new_m, cfg)?;
        result.acc_ori_deterministic = Some(evaluate_accuracy(
            &self.model,
            self.reference.features(),
            self.reference.labels(),
        )?);
        let real_acc = evaluate_accuracy(&self.model, new.features(), new.labels())?;
        let top = cfg.num_areas - 1;
        Ok(Evaluation {
            real_acc,
            top_fraction: result.per_area[top].new_size as f64 / new.len() as f64,
            result,
        })
    }

    pub fn corrupted_new(&self, corruption: Corruption, severity: Severity) -> Result<Dataset> {
        let shape = ImageShape::square_for(self.new.dim())?;
        corrupt_dataset(&self.new, corruption, severity, shape, derive(self.seed, &[20, severity.level() as u64]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub real_acc: f64,
    /// Share of new samples in the top area.
    pub top_fraction: f64,
    pub result: EstimationResult,
}

impl Evaluation {
    pub fn error(&self) -> f64 {
        (self.result.acc_new - self.real_acc).abs()
    }

    pub fn acc1_error(&self) -> f64 {
        (self.result.acc1 - self.real_acc).abs()
    }

    pub fn acc2_error(&self) -> f64 {
        (self.result.acc2 - self.real_acc).abs()
    }
}

/// Accuracy of the same area in two labeled sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaAgreement {
    pub area: usize,
    pub lvr_low: f64,
    pub lvr_high: f64,
    pub first_size: usize,
    pub second_size: usize,
    pub first_acc: Option<f64>,
    pub second_acc: Option<f64>,
}

/// Per-area accuracy of `model` on two labeled halves, judged on the
/// dominant label of `num_passes` dropout passes.
pub fn area_agreement(
    model: &MlpModel,
    first: &Dataset,
    second: &Dataset,
    num_areas: usize,
    num_passes: usize,
    seed: u64,
) -> Result<Vec<AreaAgreement>> {
    let per_set = |d: &Dataset, s: u64| -> Result<Vec<crate::lvr::AreaAccuracy>> {
        let m = mc_predict(model, d.features(), num_passes, s)?;
        let p = partition_areas(&compute_lvr(&m), num_areas)?;
        area_accuracy(&p, d.labels(), &m.dominant_labels())
    };
    let a = per_set(first, derive(seed, &[0]))?;
    let b = per_set(second, derive(seed, &[1]))?;
    Ok(a.iter()
        .zip(&b)
        .enumerate()
        .map(|(t, (x, y))| AreaAgreement {
            area: t,
            lvr_low: t as f64 / num_areas as f64,
            lvr_high: (t + 1) as f64 / num_areas as f64,
            first_size: x.size,
            second_size: y.size,
            first_acc: x.accuracy(),
            second_acc: y.accuracy(),
        })
        .collect())
}

/// Least-squares line `y = slope * x + intercept` with Pearson's r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::input("need at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::input("a constant series has no linear fit"));
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        pearson_r: sxy / (sxx * syy).sqrt(),
    })
}

/// One point of the top-fraction vs accuracy study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPoint {
    pub corruption: Corruption,
    pub severity: usize,
    pub evaluation: Evaluation,
}

/// Evaluate the estimator on the new half corrupted at every severity.
pub fn severity_ladder(
    setup: &ToySetup,
    corruption: Corruption,
    cfg: &EstimationConfig,
) -> Result<Vec<ShiftPoint>> {
    Severity::all()
        .map(|s| {
            let shifted = setup.corrupted_new(corruption, s)?;
            Ok(ShiftPoint {
                corruption,
                severity: s.level(),
                evaluation: setup.estimate_on(&shifted, cfg)?,
            })
        })
        .collect()
}

/// Fit real accuracy against the top-area fraction over `points`.
pub fn top_fraction_fit(points: &[ShiftPoint]) -> Result<LinearFit> {
    let xs: Vec<f64> = points.iter().map(|p| p.evaluation.real_acc).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.evaluation.top_fraction).collect();
    linear_fit(&xs, &ys)
}

//! Label-free accuracy estimation from area statistics.
//!
//! Two estimates are combined:
//!
//! * `acc1` transfers each area's accuracy on the labeled reference set to the
//!   number of new samples landing in that area.
//! * `acc2` scales the reference accuracy by how the share of top-area
//!   (fully confident) samples changes between the reference and the new set.
//!
//! The final estimate is their plain average.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lvr::{area_accuracy, compute_lvr, partition_areas, AreaPartition, LabelMatrix};
use crate::nn::{evaluate_accuracy, mc_predict, MlpModel};

/// What to do with an area that holds new samples but no reference samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyAreaPolicy {
    /// Count the area's new samples as wrong.
    #[default]
    Zero,
    /// Borrow the accuracy of the closest non-empty area by index (lower index on ties).
    NearestNonempty,
}

impl std::str::FromStr for EmptyAreaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "nearest-nonempty" | "nearest" => Ok(Self::NearestNonempty),
            other => Err(Error::config(format!("unknown empty-area policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub num_areas: usize,
    pub num_passes: usize,
    pub empty_area_policy: EmptyAreaPolicy,
    pub clamp_to_unit: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self::with_areas(50)
    }
}

impl EstimationConfig {
    /// `n` areas and `T = n` passes.
    pub fn with_areas(num_areas: usize) -> Self {
        Self {
            num_areas,
            num_passes: num_areas,
            empty_area_policy: EmptyAreaPolicy::Zero,
            clamp_to_unit: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_areas == 0 {
            return Err(Error::config("number of areas must be at least 1"));
        }
        if self.num_passes == 0 {
            return Err(Error::config("number of passes must be at least 1"));
        }
        Ok(())
    }
}

/// Per-area counts on the labeled reference set.
///
/// `correct` is a count for data-derived profiles and `accuracy * size` for
/// profiles built from published summary numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaStat {
    pub size: usize,
    pub correct: f64,
}

impl AreaStat {
    pub fn accuracy(&self) -> Option<f64> {
        (self.size > 0).then(|| self.correct / self.size as f64)
    }
}

/// Everything the estimator needs to know about the labeled reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    pub areas: Vec<AreaStat>,
    pub acc_ori: f64,
}

impl ReferenceProfile {
    /// Profile of a labeled prediction matrix. Correctness is judged on each
    /// sample's dominant label.
    pub fn from_labeled(matrix: &LabelMatrix, truth: &[usize], num_areas: usize) -> Result<Self> {
        if matrix.num_samples() == 0 {
            return Err(Error::input("reference set is empty"));
        }
        let partition = partition_areas(&compute_lvr(matrix), num_areas)?;
        let dominant = matrix.dominant_labels();
        let per_area = area_accuracy(&partition, truth, &dominant)?;
        let correct: usize = per_area.iter().map(|a| a.correct).sum();
        Ok(Self {
            areas: per_area
                .iter()
                .map(|a| AreaStat {
                    size: a.size,
                    correct: a.correct as f64,
                })
                .collect(),
            acc_ori: correct as f64 / matrix.num_samples() as f64,
        })
    }

    /// Profile from per-area accuracies and sizes, with a separately stated
    /// overall reference accuracy.
    pub fn from_accuracies(accuracies: &[f64], sizes: &[usize], acc_ori: f64) -> Result<Self> {
        if accuracies.len() != sizes.len() || sizes.is_empty() {
            return Err(Error::input(format!(
                "{} area accuracies for {} area sizes",
                accuracies.len(),
                sizes.len()
            )));
        }
        if sizes.iter().sum::<usize>() == 0 {
            return Err(Error::input("reference set is empty"));
        }
        Ok(Self {
            areas: accuracies
                .iter()
                .zip(sizes)
                .map(|(&a, &s)| AreaStat {
                    size: s,
                    correct: a * s as f64,
                })
                .collect(),
            acc_ori,
        })
    }

    pub fn num_areas(&self) -> usize {
        self.areas.len()
    }

    pub fn len(&self) -> usize {
        self.areas.iter().map(|a| a.size).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn nearest_nonempty(&self, area: usize) -> Option<usize> {
        (0..self.areas.len())
            .filter(|&j| self.areas[j].size > 0)
            .min_by_key(|&j| (j.abs_diff(area), j))
    }
}

/// One row of the per-area diagnostics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRow {
    pub area: usize,
    pub ori_size: usize,
    pub new_size: usize,
    pub accuracy: Option<f64>,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub acc1: f64,
    pub acc2: f64,
    pub acc_new: f64,
    pub acc_ori: f64,
    /// Reference accuracy of the deterministic forward pass, when a model is at hand.
    pub acc_ori_deterministic: Option<f64>,
    pub per_area: Vec<AreaRow>,
    pub warnings: Vec<String>,
}

/// Area-transfer estimate and the per-area table.
pub fn acc1_from_profile(
    profile: &ReferenceProfile,
    new_sizes: &[usize],
    policy: EmptyAreaPolicy,
) -> Result<(f64, Vec<AreaRow>, Vec<String>)> {
    check_sizes(profile, new_sizes)?;
    let new_len: usize = new_sizes.iter().sum();
    if new_len == 0 {
        return Err(Error::input("new set is empty"));
    }
    let mut correct_num = 0.0;
    let mut rows = Vec::with_capacity(new_sizes.len());
    let mut warnings = Vec::new();
    for (i, (stat, &new_size)) in profile.areas.iter().zip(new_sizes).enumerate() {
        if stat.size > 0 {
            correct_num += new_size as f64 * stat.correct / stat.size as f64;
        } else if new_size > 0 {
            match policy {
                EmptyAreaPolicy::Zero => warnings.push(format!(
                    "area {i} holds {new_size} new samples but no reference samples; counted as accuracy 0"
                )),
                EmptyAreaPolicy::NearestNonempty => {
                    // profile is non-empty, so some area has samples
                    let j = profile
                        .nearest_nonempty(i)
                        .ok_or_else(|| Error::input("reference set is empty"))?;
                    let donor = profile.areas[j];
                    correct_num += new_size as f64 * donor.correct / donor.size as f64;
                    warnings.push(format!(
                        "area {i} holds {new_size} new samples but no reference samples; borrowed accuracy of area {j}"
                    ));
                }
            }
        }
        rows.push(AreaRow {
            area: i,
            ori_size: stat.size,
            new_size,
            accuracy: stat.accuracy(),
            empty: stat.size == 0,
        });
    }
    Ok((correct_num / new_len as f64, rows, warnings))
}

/// High-confidence ratio estimate.
pub fn acc2_from_profile(
    profile: &ReferenceProfile,
    new_sizes: &[usize],
    clamp_to_unit: bool,
) -> Result<(f64, Vec<String>)> {
    check_sizes(profile, new_sizes)?;
    let top = profile.num_areas() - 1;
    let ori_top = profile.areas[top].size;
    if ori_top == 0 {
        return Err(Error::DegenerateReference(format!(
            "top area {top} of the reference set is empty"
        )));
    }
    let new_len: usize = new_sizes.iter().sum();
    if new_len == 0 {
        return Err(Error::input("new set is empty"));
    }
    let new_frac = new_sizes[top] as f64 / new_len as f64;
    let ori_frac = ori_top as f64 / profile.len() as f64;
    let acc2 = new_frac / ori_frac * profile.acc_ori;
    let mut warnings = Vec::new();
    if clamp_to_unit && !(0.0..=1.0).contains(&acc2) {
        warnings.push(format!("acc2 = {acc2:.6} clamped to [0, 1]"));
        return Ok((acc2.clamp(0.0, 1.0), warnings));
    }
    Ok((acc2, warnings))
}

pub fn estimate_from_profile(
    profile: &ReferenceProfile,
    new_sizes: &[usize],
    cfg: &EstimationConfig,
) -> Result<EstimationResult> {
    cfg.validate()?;
    let (acc1, per_area, mut warnings) =
        acc1_from_profile(profile, new_sizes, cfg.empty_area_policy)?;
    let (acc2, w2) = acc2_from_profile(profile, new_sizes, cfg.clamp_to_unit)?;
    warnings.extend(w2);
    Ok(EstimationResult {
        acc1,
        acc2,
        acc_new: (acc1 + acc2) / 2.0,
        acc_ori: profile.acc_ori,
        acc_ori_deterministic: None,
        per_area,
        warnings,
    })
}

fn check_sizes(profile: &ReferenceProfile, new_sizes: &[usize]) -> Result<()> {
    if profile.num_areas() == 0 {
        return Err(Error::config("number of areas must be at least 1"));
    }
    if new_sizes.len() != profile.num_areas() {
        return Err(Error::input(format!(
            "{} new area sizes for {} reference areas",
            new_sizes.len(),
            profile.num_areas()
        )));
    }
    Ok(())
}

fn prepare(
    reference: &LabelMatrix,
    truth: &[usize],
    new: &LabelMatrix,
    cfg: &EstimationConfig,
) -> Result<(ReferenceProfile, AreaPartition)> {
    cfg.validate()?;
    if truth.len() != reference.num_samples() {
        return Err(Error::input(format!(
            "{} reference labels for {} reference samples",
            truth.len(),
            reference.num_samples()
        )));
    }
    for (name, m) in [("reference", reference), ("new", new)] {
        if m.num_passes() != cfg.num_passes {
            return Err(Error::config(format!(
                "{name} matrix has {} passes, configuration expects {}",
                m.num_passes(),
                cfg.num_passes
            )));
        }
    }
    if reference.num_classes() != new.num_classes() {
        return Err(Error::input(format!(
            "reference has {} classes, new set has {}",
            reference.num_classes(),
            new.num_classes()
        )));
    }
    if let Some(&y) = truth.iter().find(|&&y| y >= reference.num_classes()) {
        return Err(Error::input(format!("true label {y} out of range")));
    }
    if new.num_samples() == 0 {
        return Err(Error::input("new set is empty"));
    }
    let profile = ReferenceProfile::from_labeled(reference, truth, cfg.num_areas)?;
    let new_partition = partition_areas(&compute_lvr(new), cfg.num_areas)?;
    Ok((profile, new_partition))
}

pub fn estimate_acc1(
    reference: &LabelMatrix,
    truth: &[usize],
    new: &LabelMatrix,
    cfg: &EstimationConfig,
) -> Result<(f64, Vec<AreaRow>)> {
    let (profile, part) = prepare(reference, truth, new, cfg)?;
    let (acc1, rows, _) = acc1_from_profile(&profile, part.area_sizes(), cfg.empty_area_policy)?;
    Ok((acc1, rows))
}

pub fn estimate_acc2(
    reference: &LabelMatrix,
    truth: &[usize],
    new: &LabelMatrix,
    cfg: &EstimationConfig,
) -> Result<f64> {
    let (profile, part) = prepare(reference, truth, new, cfg)?;
    acc2_from_profile(&profile, part.area_sizes(), cfg.clamp_to_unit).map(|(a, _)| a)
}

/// Full estimate of the new set's accuracy from a labeled reference matrix.
pub fn estimate(
    reference: &LabelMatrix,
    truth: &[usize],
    new: &LabelMatrix,
    cfg: &EstimationConfig,
) -> Result<EstimationResult> {
    let (profile, part) = prepare(reference, truth, new, cfg)?;
    estimate_from_profile(&profile, part.area_sizes(), cfg)
}

/// One grid point of a configuration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub num_areas: usize,
    pub dropout_rate: f64,
    /// Deterministic-forward accuracy on the new set.
    pub real_acc: f64,
    pub result: EstimationResult,
}

impl SweepRow {
    pub fn abs_error(&self) -> f64 {
        (self.result.acc_new - self.real_acc).abs()
    }
}

/// Re-run Monte-Carlo prediction for every `(areas, rate)` pair with `T = areas`
/// and estimate the new set's accuracy. Rows come back in grid order,
/// areas-major.
pub fn sweep(
    model: &MlpModel,
    reference: &Dataset,
    new: &Dataset,
    area_counts: &[usize],
    dropout_rates: &[f64],
    base: &EstimationConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let real_acc = evaluate_accuracy(model, new.features(), new.labels())?;
    let acc_ori_det = evaluate_accuracy(model, reference.features(), reference.labels())?;
    let grid: Vec<(usize, f64)> = area_counts
        .iter()
        .flat_map(|&n| dropout_rates.iter().map(move |&p| (n, p)))
        .collect();
    grid.into_par_iter()
        .map(|(n, p)| {
            let m = model.with_dropout_rate(p)?;
            let cfg = EstimationConfig {
                num_areas: n,
                num_passes: n,
                ..base.clone()
            };
            let ref_m = mc_predict(&m, reference.features(), n, seed)?;
            let new_m = mc_predict(&m, new.features(), n, seed ^ 0x5eed)?;
            let mut result = estimate(&ref_m, reference.labels(), &new_m, &cfg)?;
            result.acc_ori_deterministic = Some(acc_ori_det);
            Ok(SweepRow {
                num_areas: n,
                dropout_rate: p,
                real_acc,
                result,
            })
        })
        .collect()
}

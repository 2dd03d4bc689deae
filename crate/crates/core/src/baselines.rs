//! Label-budgeted comparison estimators.
//!
//! Both baselines label a subset of the new data and report the model's
//! accuracy on it: one picks the subset uniformly, the other grows it greedily
//! so that its binned feature distribution stays close (in cross-entropy) to
//! that of the whole set.

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimationResult;
use crate::rng::{derive, rng_from};

/// Labeling budgets 50, 60, ..., 180.
pub fn default_budgets() -> Vec<usize> {
    (50..=180).step_by(10).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionBudget {
    pub sizes: Vec<usize>,
    pub seed: u64,
}

impl SelectionBudget {
    pub fn validate(&self, dataset_size: usize) -> Result<()> {
        match self.sizes.iter().find(|&&b| b == 0 || b > dataset_size) {
            Some(b) => Err(Error::config(format!(
                "budget {b} outside [1, {dataset_size}]"
            ))),
            None => Ok(()),
        }
    }
}

/// Row-major `N x D` matrix of last-hidden-layer activations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::input("feature matrix shape is inconsistent"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("feature matrix has non-finite entries"));
        }
        Ok(Self { dim, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn get(&self, i: usize, d: usize) -> f64 {
        self.values[i * self.dim + d]
    }
}

fn accuracy_of(correct: &[bool], subset: &[usize]) -> f64 {
    subset.iter().filter(|&&i| correct[i]).count() as f64 / subset.len() as f64
}

/// Accuracy on a uniform without-replacement sample of `budget` items.
/// `correct[i]` says whether the model got sample `i` right.
pub fn random_select_estimate(correct: &[bool], budget: usize, seed: u64) -> Result<f64> {
    if budget == 0 || budget > correct.len() {
        return Err(Error::config(format!(
            "budget {budget} outside [1, {}]",
            correct.len()
        )));
    }
    let picked = index::sample(&mut rng_from(seed), correct.len(), budget).into_vec();
    Ok(accuracy_of(correct, &picked))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesConfig {
    pub initial_size: usize,
    pub num_groups: usize,
    pub group_size: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for CesConfig {
    fn default() -> Self {
        Self {
            initial_size: 30,
            num_groups: 30,
            group_size: 5,
            bins: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CesOutcome {
    pub estimate: f64,
    pub selected: Vec<usize>,
    pub cross_entropy: f64,
    pub warnings: Vec<String>,
}

/// Per-dimension equal-width histograms of the full set.
///
/// Dimensions with zero spread carry no information and are dropped.
#[derive(Debug, Clone)]
pub struct BinnedFeatures {
    bins: usize,
    /// `codes[i * dims + d]`: bin of sample `i` in kept dimension `d`.
    codes: Vec<usize>,
    dims: usize,
    /// Smoothed full-set distribution, `dims x bins`.
    reference: Vec<f64>,
}

impl BinnedFeatures {
    pub fn new(features: &FeatureMatrix, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("need at least one bin"));
        }
        if features.is_empty() {
            return Err(Error::input("feature matrix is empty"));
        }
        let n = features.len();
        let mut kept = Vec::new();
        for d in 0..features.dim() {
            let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let v = features.get(i, d);
                (lo.min(v), hi.max(v))
            });
            if hi > lo {
                kept.push((d, lo, hi));
            }
        }
        let dims = kept.len();
        let mut codes = vec![0; n * dims];
        for i in 0..n {
            for (k, &(d, lo, hi)) in kept.iter().enumerate() {
                let pos = (features.get(i, d) - lo) / (hi - lo) * bins as f64;
                codes[i * dims + k] = (pos as usize).min(bins - 1);
            }
        }
        let mut binned = Self {
            bins,
            codes,
            dims,
            reference: Vec::new(),
        };
        let all: Vec<usize> = (0..n).collect();
        binned.reference = binned.distribution(&all);
        Ok(binned)
    }

    /// Number of informative dimensions.
    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Add-one smoothed per-dimension histogram of `subset`.
    pub fn distribution(&self, subset: &[usize]) -> Vec<f64> {
        let mut counts = vec![1.0; self.dims * self.bins];
        for &i in subset {
            for d in 0..self.dims {
                counts[d * self.bins + self.codes[i * self.dims + d]] += 1.0;
            }
        }
        let denom = subset.len() as f64 + self.bins as f64;
        counts.iter_mut().for_each(|c| *c /= denom);
        counts
    }

    /// `-sum_d sum_b p_full(d, b) ln q_subset(d, b)`; minimal when `q = p`.
    pub fn cross_entropy(&self, subset: &[usize]) -> f64 {
        let q = self.distribution(subset);
        -self
            .reference
            .iter()
            .zip(&q)
            .map(|(p, q)| p * q.ln())
            .sum::<f64>()
    }
}

/// Greedy cross-entropy-controlled selection. Starts from a random seed set
/// and repeatedly adds whichever of `num_groups` random candidate groups
/// leaves the subset's binned feature distribution closest to the full set.
pub fn ces_select(features: &FeatureMatrix, budget: usize, cfg: &CesConfig) -> Result<(Vec<usize>, Vec<String>)> {
    let n = features.len();
    if cfg.initial_size == 0 || cfg.group_size == 0 || cfg.num_groups == 0 {
        return Err(Error::config("CES sizes must be positive"));
    }
    if budget < cfg.initial_size {
        return Err(Error::config(format!(
            "budget {budget} is smaller than the initial selection {}",
            cfg.initial_size
        )));
    }
    if budget > n {
        return Err(Error::config(format!("budget {budget} exceeds {n} samples")));
    }
    let binned = BinnedFeatures::new(features, cfg.bins)?;
    let mut rng = rng_from(cfg.seed);
    if binned.dims() == 0 {
        let picked = index::sample(&mut rng, n, budget).into_vec();
        return Ok((
            picked,
            vec!["features have zero variance in every dimension; fell back to random selection".into()],
        ));
    }
    let mut pool: Vec<usize> = (0..n).collect();
    pool.shuffle(&mut rng);
    let mut selected: Vec<usize> = pool.split_off(n - cfg.initial_size);
    let mut round = 0u64;
    while selected.len() < budget {
        let take = cfg.group_size.min(budget - selected.len());
        let mut round_rng = rng_from(derive(cfg.seed, &[round]));
        let groups: Vec<Vec<usize>> = (0..cfg.num_groups)
            .map(|_| {
                index::sample(&mut round_rng, pool.len(), take.min(pool.len()))
                    .into_iter()
                    .collect()
            })
            .collect();
        let best = groups
            .par_iter()
            .enumerate()
            .map(|(g, positions)| {
                let mut cand = selected.clone();
                cand.extend(positions.iter().map(|&p| pool[p]));
                (binned.cross_entropy(&cand), g)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, g)| g)
            .expect("at least one group");
        let mut positions = groups[best].clone();
        positions.sort_unstable_by(|a, b| b.cmp(a));
        for p in positions {
            selected.push(pool.swap_remove(p));
        }
        round += 1;
    }
    Ok((selected, Vec::new()))
}

pub fn ces_select_estimate(
    correct: &[bool],
    features: &FeatureMatrix,
    budget: usize,
    cfg: &CesConfig,
) -> Result<CesOutcome> {
    if correct.len() != features.len() {
        return Err(Error::input(format!(
            "{} correctness flags for {} feature rows",
            correct.len(),
            features.len()
        )));
    }
    let (selected, warnings) = ces_select(features, budget, cfg)?;
    let cross_entropy = BinnedFeatures::new(features, cfg.bins)
        .map(|b| b.cross_entropy(&selected))
        .unwrap_or(f64::NAN);
    Ok(CesOutcome {
        estimate: accuracy_of(correct, &selected),
        selected,
        cross_entropy,
        warnings,
    })
}

/// Estimates of the selection baselines at one budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEstimates {
    pub budget: usize,
    pub random: f64,
    pub ces: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub budget: usize,
    pub random_error: f64,
    pub ces_error: f64,
    /// Budget-free: identical in every row.
    pub lvr_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub true_accuracy: f64,
    pub lvr_estimate: f64,
    pub rows: Vec<ComparisonRow>,
    pub notes: Vec<String>,
}

pub fn compare_report(
    lvr: &EstimationResult,
    baselines: &[BudgetEstimates],
    true_acc: f64,
) -> ComparisonTable {
    let lvr_error = (lvr.acc_new - true_acc).abs();
    ComparisonTable {
        true_accuracy: true_acc,
        lvr_estimate: lvr.acc_new,
        rows: baselines
            .iter()
            .map(|b| ComparisonRow {
                budget: b.budget,
                random_error: (b.random - true_acc).abs(),
                ces_error: (b.ces - true_acc).abs(),
                lvr_error,
            })
            .collect(),
        notes: vec!["PACE is not implemented; no column is reported for it".into()],
    }
}

impl std::fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "true accuracy {:.4}, label-free estimate {:.4}",
            self.true_accuracy, self.lvr_estimate
        )?;
        writeln!(f, "{:>6}  {:>10}  {:>10}  {:>10}", "budget", "random", "ces", "lvr")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>6}  {:>10.4}  {:>10.4}  {:>10.4}",
                r.budget, r.random_error, r.ces_error, r.lvr_error
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

//! Model-level mutation operators and gated mutant ensembles.
//!
//! A mutant ensemble is an alternative source of stochastic predictions: the
//! `k`-th column of its label matrix is the deterministic prediction of the
//! `k`-th mutant, so the matrix plugs into the same LVR estimator as dropout
//! passes.
//!
//! Element populations per operator:
//!
//! | operator                   | element                  | population                      |
//! |----------------------------|--------------------------|---------------------------------|
//! | `GaussianFuzz`             | single weight            | all weights                     |
//! | `WeightShuffle`            | neuron (incoming weights)| all hidden and output neurons   |
//! | `NeuronEffectBlock`        | hidden neuron            | all hidden neurons              |
//! | `NeuronActivationInverse`  | hidden neuron            | all hidden neurons              |
//! | `NeuronSwitch`             | disjoint pair in a layer | `sum(floor(width / 2))`         |
//!
//! Each mutation touches `round(ratio * population)` elements.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Features};
use crate::error::{Error, Result};
use crate::lvr::LabelMatrix;
use crate::nn::{evaluate_accuracy, predict_labels, MlpModel};
use crate::rng::{derive, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MutationOperator {
    GaussianFuzz,
    WeightShuffle,
    NeuronEffectBlock,
    NeuronActivationInverse,
    NeuronSwitch,
    /// Pick one of the five concrete operators per mutant.
    Random,
}

impl MutationOperator {
    pub const CONCRETE: [MutationOperator; 5] = [
        Self::GaussianFuzz,
        Self::WeightShuffle,
        Self::NeuronEffectBlock,
        Self::NeuronActivationInverse,
        Self::NeuronSwitch,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Self::GaussianFuzz => "GF",
            Self::WeightShuffle => "WS",
            Self::NeuronEffectBlock => "NEB",
            Self::NeuronActivationInverse => "NAI",
            Self::NeuronSwitch => "NS",
            Self::Random => "random",
        }
    }
}

impl std::fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for MutationOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "gf" | "gaussian-fuzz" => Self::GaussianFuzz,
            "ws" | "weight-shuffle" => Self::WeightShuffle,
            "neb" | "neuron-effect-block" => Self::NeuronEffectBlock,
            "nai" | "neuron-activation-inverse" => Self::NeuronActivationInverse,
            "ns" | "neuron-switch" => Self::NeuronSwitch,
            "random" => Self::Random,
            other => return Err(Error::config(format!("unknown mutation operator `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    pub operator: MutationOperator,
    pub mutation_ratio: f64,
    /// Relative gate: a mutant must keep this fraction of the original accuracy.
    pub accuracy_threshold: f64,
    pub num_mutants: usize,
    pub seed: u64,
    /// Multiplier on the per-layer weight standard deviation used by `GaussianFuzz`.
    pub fuzz_scale: f64,
    /// Candidate cap; `None` means `20 * num_mutants`.
    pub max_attempts: Option<usize>,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            operator: MutationOperator::Random,
            mutation_ratio: 0.1,
            accuracy_threshold: 0.9,
            num_mutants: 50,
            seed: 0,
            fuzz_scale: 1.0,
            max_attempts: None,
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mutation_ratio) {
            return Err(Error::config("mutation ratio must be in [0, 1]"));
        }
        if !(self.accuracy_threshold > 0.0 && self.accuracy_threshold <= 1.0) {
            return Err(Error::config("accuracy threshold must be in (0, 1]"));
        }
        if self.num_mutants == 0 {
            return Err(Error::config("need at least one mutant"));
        }
        if !(self.fuzz_scale >= 0.0 && self.fuzz_scale.is_finite()) {
            return Err(Error::config("fuzz scale must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn attempt_cap(&self) -> usize {
        self.max_attempts.unwrap_or(20 * self.num_mutants)
    }
}

/// What a single mutation did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub operator: MutationOperator,
    pub seed: u64,
    pub population: usize,
    /// Indices of touched elements in the operator's own numbering (see module docs).
    pub touched: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mutant {
    pub model: MlpModel,
    pub record: MutationRecord,
}

/// `(layer, neuron)` for every hidden neuron, in global order.
fn hidden_neurons(model: &MlpModel) -> Vec<(usize, usize)> {
    let sizes = model.layer_sizes();
    (1..sizes.len() - 1)
        .flat_map(|l| (0..sizes[l]).map(move |j| (l - 1, j)))
        .collect()
}

/// `(layer, neuron)` for every neuron with incoming weights.
fn weighted_neurons(model: &MlpModel) -> Vec<(usize, usize)> {
    let sizes = model.layer_sizes();
    (1..sizes.len())
        .flat_map(|l| (0..sizes[l]).map(move |j| (l - 1, j)))
        .collect()
}

/// Disjoint neuron pairs `(layer, a, b)` within each hidden layer, drawn from
/// `seed` and the layer widths only.
fn switch_slots(model: &MlpModel, seed: u64) -> Vec<(usize, usize, usize)> {
    let sizes = model.layer_sizes();
    let mut slots = Vec::new();
    for l in 1..sizes.len() - 1 {
        let mut idx: Vec<usize> = (0..sizes[l]).collect();
        idx.shuffle(&mut rng_from(derive(seed, &[0x5157, l as u64])));
        slots.extend(idx.chunks_exact(2).map(|p| (l - 1, p[0], p[1])));
    }
    slots
}

/// Swap the incoming weights and biases of neurons `a` and `b` in weight
/// layer `layer`; outgoing weights stay, so the two units trade roles for the
/// next layer. Applying the same switch twice restores the model.
pub fn switch_neurons(model: &mut MlpModel, layer: usize, a: usize, b: usize) {
    let fan_in = model.layer_sizes()[layer];
    let w = model.weights_mut(layer);
    for i in 0..fan_in {
        w.swap(a * fan_in + i, b * fan_in + i);
    }
    model.biases_mut(layer).swap(a, b);
}

/// Multiply the outgoing weights of hidden neuron `neuron` in weight layer
/// `layer` by `factor`.
fn scale_outgoing(model: &mut MlpModel, layer: usize, neuron: usize, factor: f64) {
    let width = model.layer_sizes()[layer + 1];
    let next = model.weights_mut(layer + 1);
    let fan_out = next.len() / width;
    for k in 0..fan_out {
        next[k * width + neuron] *= factor;
    }
}

fn pick(rng: &mut impl Rng, population: usize, ratio: f64) -> Vec<usize> {
    let count = ((ratio * population as f64).round() as usize).min(population);
    let mut v = index::sample(rng, population, count).into_vec();
    v.sort_unstable();
    v
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Apply one mutation drawn from `mutant_seed`.
pub fn mutate_model(model: &MlpModel, cfg: &MutationConfig, mutant_seed: u64) -> Result<Mutant> {
    cfg.validate()?;
    let mut rng = rng_from(mutant_seed);
    let operator = match cfg.operator {
        MutationOperator::Random => {
            let applicable: Vec<MutationOperator> = MutationOperator::CONCRETE
                .into_iter()
                .filter(|&op| op != MutationOperator::NeuronSwitch || !switch_slots(model, 0).is_empty())
                .collect();
            applicable[rng.random_range(0..applicable.len())]
        }
        op => op,
    };
    let mut out = model.clone();
    let (population, touched) = match operator {
        MutationOperator::GaussianFuzz => {
            let offsets: Vec<usize> = (0..model.num_layers())
                .scan(0, |acc, l| {
                    let start = *acc;
                    *acc += model.weights(l).len();
                    Some(start)
                })
                .collect();
            let sigmas: Vec<f64> = (0..model.num_layers())
                .map(|l| std_dev(model.weights(l)) * cfg.fuzz_scale)
                .collect();
            let population = model.num_weights();
            let touched = pick(&mut rng, population, cfg.mutation_ratio);
            for &g in &touched {
                let l = offsets.partition_point(|&o| o <= g) - 1;
                let noise = if sigmas[l] > 0.0 {
                    Normal::new(0.0, sigmas[l]).expect("positive sigma").sample(&mut rng)
                } else {
                    0.0
                };
                out.weights_mut(l)[g - offsets[l]] += noise;
            }
            (population, touched)
        }
        MutationOperator::WeightShuffle => {
            let neurons = weighted_neurons(model);
            let touched = pick(&mut rng, neurons.len(), cfg.mutation_ratio);
            for &g in &touched {
                let (l, j) = neurons[g];
                let fan_in = model.layer_sizes()[l];
                out.weights_mut(l)[j * fan_in..(j + 1) * fan_in].shuffle(&mut rng);
            }
            (neurons.len(), touched)
        }
        MutationOperator::NeuronEffectBlock | MutationOperator::NeuronActivationInverse => {
            let factor = if operator == MutationOperator::NeuronEffectBlock {
                0.0
            } else {
                -1.0
            };
            let neurons = hidden_neurons(model);
            let touched = pick(&mut rng, neurons.len(), cfg.mutation_ratio);
            for &g in &touched {
                let (l, j) = neurons[g];
                scale_outgoing(&mut out, l, j, factor);
            }
            (neurons.len(), touched)
        }
        MutationOperator::NeuronSwitch => {
            let slots = switch_slots(model, mutant_seed);
            if slots.is_empty() {
                if cfg.mutation_ratio > 0.0 {
                    return Err(Error::OperatorInapplicable {
                        operator: operator.to_string(),
                        reason: "no hidden layer has at least two neurons".into(),
                    });
                }
                (0, Vec::new())
            } else {
                let touched = pick(&mut rng, slots.len(), cfg.mutation_ratio);
                for &s in &touched {
                    let (l, a, b) = slots[s];
                    switch_neurons(&mut out, l, a, b);
                }
                (slots.len(), touched)
            }
        }
        MutationOperator::Random => unreachable!("resolved above"),
    };
    Ok(Mutant {
        model: out,
        record: MutationRecord {
            operator,
            seed: mutant_seed,
            population,
            touched,
        },
    })
}

/// Outcome of gating one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateEntry {
    pub attempt: usize,
    pub seed: u64,
    pub operator: MutationOperator,
    pub accuracy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutantEnsemble {
    pub mutants: Vec<MlpModel>,
    pub provenance: Vec<MutationRecord>,
    pub gate_report: Vec<GateEntry>,
    pub base_accuracy: f64,
    pub accuracy_threshold: f64,
}

impl MutantEnsemble {
    pub fn len(&self) -> usize {
        self.mutants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutants.is_empty()
    }

    /// Minimum accuracy a candidate needed to pass the gate.
    pub fn gate_floor(&self) -> f64 {
        self.accuracy_threshold * self.base_accuracy
    }
}

/// Draw candidates until `num_mutants` pass the relative accuracy gate on
/// `reference`. Candidate `a` uses seed `derive(cfg.seed, [a])`; candidates
/// are evaluated in parallel batches but accepted strictly in attempt order.
pub fn generate_mutants(model: &MlpModel, reference: &Dataset, cfg: &MutationConfig) -> Result<MutantEnsemble> {
    cfg.validate()?;
    if reference.is_empty() {
        return Err(Error::input("reference set for the mutant gate is empty"));
    }
    let base_accuracy = evaluate_accuracy(model, reference.features(), reference.labels())?;
    let floor = cfg.accuracy_threshold * base_accuracy;
    let cap = cfg.attempt_cap();
    let batch = rayon::current_num_threads().max(4);

    let mut ens = MutantEnsemble {
        mutants: Vec::with_capacity(cfg.num_mutants),
        provenance: Vec::with_capacity(cfg.num_mutants),
        gate_report: Vec::new(),
        base_accuracy,
        accuracy_threshold: cfg.accuracy_threshold,
    };
    let mut next = 0;
    while ens.mutants.len() < cfg.num_mutants && next < cap {
        let end = (next + batch.max(cfg.num_mutants - ens.mutants.len())).min(cap);
        let evaluated: Vec<Result<(Mutant, f64)>> = (next..end)
            .into_par_iter()
            .map(|a| {
                let m = mutate_model(model, cfg, derive(cfg.seed, &[a as u64]))?;
                let acc = evaluate_accuracy(&m.model, reference.features(), reference.labels())?;
                Ok((m, acc))
            })
            .collect();
        for (a, item) in (next..end).zip(evaluated) {
            let (mutant, accuracy) = item?;
            let accepted = accuracy >= floor;
            ens.gate_report.push(GateEntry {
                attempt: a,
                seed: mutant.record.seed,
                operator: mutant.record.operator,
                accuracy,
                accepted,
            });
            if accepted {
                ens.mutants.push(mutant.model);
                ens.provenance.push(mutant.record);
                if ens.mutants.len() == cfg.num_mutants {
                    break;
                }
            }
        }
        next = end;
    }
    if ens.mutants.len() < cfg.num_mutants {
        let attempts = ens.gate_report.len();
        return Err(Error::GateStarvation {
            accepted: ens.mutants.len(),
            attempts,
            needed: cfg.num_mutants,
            rate: ens.mutants.len() as f64 / attempts.max(1) as f64,
        });
    }
    Ok(ens)
}

/// Label matrix with one column per mutant (deterministic predictions).
pub fn mutant_predict(ensemble: &MutantEnsemble, xs: Features<'_>) -> Result<LabelMatrix> {
    let first = ensemble
        .mutants
        .first()
        .ok_or_else(|| Error::input("mutant ensemble is empty"))?;
    let k = ensemble.len();
    let columns: Vec<Vec<usize>> = ensemble
        .mutants
        .iter()
        .map(|m| predict_labels(m, xs))
        .collect::<Result<_>>()?;
    let n = xs.len();
    let mut labels = Vec::with_capacity(n * k);
    for i in 0..n {
        labels.extend(columns.iter().map(|c| c[i]));
    }
    LabelMatrix::new(n, k, first.num_classes(), labels)
}

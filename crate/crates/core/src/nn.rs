//! A small fully connected classifier with inverted dropout.
//!
//! Hidden layers use ReLU followed by dropout; the output layer is a softmax.
//! Dropout is only active in training and in Monte-Carlo passes, and because
//! surviving activations are scaled by `1 / (1 - p)` at drop time the
//! deterministic pass needs no rescaling.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Features};
use crate::error::{Error, Result};
use crate::lvr::LabelMatrix;
use crate::rng::{derive, pass_seed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    /// `weights[l]` is row-major `layer_sizes[l + 1] x layer_sizes[l]`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    dropout_rate: f64,
}

impl MlpModel {
    /// All-zero parameters.
    pub fn zeros(layer_sizes: &[usize], dropout_rate: f64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        check_rate(dropout_rate)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes
                .windows(2)
                .map(|w| vec![0.0; w[0] * w[1]])
                .collect(),
            biases: layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            dropout_rate,
        })
    }

    /// Weights uniform in `±scale * sqrt(6 / fan_in)`, zero biases.
    pub fn init(layer_sizes: &[usize], dropout_rate: f64, scale: f64, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(layer_sizes, dropout_rate)?;
        let mut rng = rng_from(seed);
        for (l, w) in m.weights.iter_mut().enumerate() {
            let limit = scale * (6.0 / layer_sizes[l] as f64).sqrt();
            for v in w.iter_mut() {
                *v = if limit > 0.0 {
                    rng.random_range(-limit..=limit)
                } else {
                    0.0
                };
            }
        }
        Ok(m)
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        dropout_rate: f64,
    ) -> Result<Self> {
        check_sizes(&layer_sizes)?;
        check_rate(dropout_rate)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != layer_sizes.len() - 1 {
            return Err(Error::input("one weight matrix and bias vector per layer"));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::DimensionMismatch {
                    expected: pair[0] * pair[1],
                    actual: weights[l].len(),
                });
            }
            if biases[l].len() != pair[1] {
                return Err(Error::DimensionMismatch {
                    expected: pair[1],
                    actual: biases[l].len(),
                });
            }
        }
        if weights.iter().chain(&biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::input("model parameters must be finite"));
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            dropout_rate,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight layers.
    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn with_dropout_rate(&self, p: f64) -> Result<Self> {
        check_rate(p)?;
        Ok(Self {
            dropout_rate: p,
            ..self.clone()
        })
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn num_weights(&self) -> usize {
        self.weights.iter().map(Vec::len).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::config("a model needs an input and an output layer"));
    }
    if sizes.contains(&0) {
        return Err(Error::config("layer widths must be positive"));
    }
    if *sizes.last().unwrap() < 2 {
        return Err(Error::config("a classifier needs at least two classes"));
    }
    Ok(())
}

fn check_rate(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("dropout rate {p} outside [0, 1)")));
    }
    Ok(())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry, smallest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Intermediate values of one forward pass.
struct Trace {
    /// Pre-activations per layer.
    z: Vec<Vec<f64>>,
    /// Layer inputs: `a[0]` is the sample, `a[l]` the (dropped) output of hidden layer `l`.
    a: Vec<Vec<f64>>,
    /// Dropout scale per hidden unit: 0 or `1/(1-p)`, or 1 when dropout is off.
    masks: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn run<R: Rng>(model: &MlpModel, x: &[f64], mut rng: Option<&mut R>) -> Trace {
    let layers = model.num_layers();
    let p = model.dropout_rate;
    let keep_scale = 1.0 / (1.0 - p);
    let mut z_all = Vec::with_capacity(layers);
    let mut a_all = Vec::with_capacity(layers);
    let mut masks = Vec::with_capacity(layers - 1);
    let mut input = x.to_vec();
    for l in 0..layers {
        let (fan_in, fan_out) = (model.layer_sizes[l], model.layer_sizes[l + 1]);
        let w = &model.weights[l];
        let z: Vec<f64> = (0..fan_out)
            .map(|j| {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                model.biases[l][j] + row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        a_all.push(std::mem::take(&mut input));
        if l + 1 < layers {
            let mask: Vec<f64> = match rng.as_deref_mut() {
                Some(r) if p > 0.0 => (0..fan_out)
                    .map(|_| if r.random::<f64>() < p { 0.0 } else { keep_scale })
                    .collect(),
                _ => vec![1.0; fan_out],
            };
            input = z
                .iter()
                .zip(&mask)
                .map(|(&v, &m)| v.max(0.0) * m)
                .collect();
            masks.push(mask);
        }
        z_all.push(z);
    }
    let probs = softmax(z_all.last().unwrap());
    Trace {
        z: z_all,
        a: a_all,
        masks,
        probs,
    }
}

type NoRng = rand_chacha::ChaCha8Rng;

/// Class probabilities with dropout disabled.
pub fn forward_deterministic(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    model.check_input(x)?;
    Ok(run::<NoRng>(model, x, None).probs)
}

/// Class probabilities of one Monte-Carlo dropout pass. Fully determined by
/// `(model, x, pass_seed)`.
pub fn forward_dropout(model: &MlpModel, x: &[f64], pass_seed: u64) -> Result<Vec<f64>> {
    model.check_input(x)?;
    let mut rng = rng_from(pass_seed);
    Ok(run(model, x, Some(&mut rng)).probs)
}

/// Pre-activations of every layer, with dropout when `pass_seed` is given.
pub fn pre_activations(model: &MlpModel, x: &[f64], pass_seed: Option<u64>) -> Result<Vec<Vec<f64>>> {
    model.check_input(x)?;
    Ok(match pass_seed {
        Some(s) => run(model, x, Some(&mut rng_from(s))).z,
        None => run::<NoRng>(model, x, None).z,
    })
}

/// Deterministic activations of the last hidden layer (the input itself for a
/// model without hidden layers), as an `N x D` row-major matrix.
pub fn hidden_features(model: &MlpModel, xs: Features<'_>) -> Result<(usize, Vec<f64>)> {
    if xs.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: xs.dim(),
        });
    }
    let width = model.layer_sizes[model.layer_sizes.len() - 2];
    let rows: Vec<Vec<f64>> = xs
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| run::<NoRng>(model, x, None).a.pop().unwrap())
        .collect();
    Ok((width, rows.concat()))
}

/// Deterministic argmax prediction for every row.
pub fn predict_labels(model: &MlpModel, xs: Features<'_>) -> Result<Vec<usize>> {
    if xs.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: xs.dim(),
        });
    }
    Ok(xs
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| argmax(&run::<NoRng>(model, x, None).probs))
        .collect())
}

/// `T` Monte-Carlo dropout predictions per sample. Pass `k` on sample `i` uses
/// the seed derived from `(master_seed, k, i)`, so the output does not depend
/// on thread scheduling.
pub fn mc_predict(
    model: &MlpModel,
    xs: Features<'_>,
    num_passes: usize,
    master_seed: u64,
) -> Result<LabelMatrix> {
    if num_passes == 0 {
        return Err(Error::config("number of passes must be at least 1"));
    }
    if xs.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: xs.dim(),
        });
    }
    let rows: Vec<&[f64]> = xs.rows().collect();
    let labels: Vec<Vec<usize>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            (0..num_passes)
                .map(|k| {
                    let mut rng = rng_from(pass_seed(master_seed, k, i));
                    argmax(&run(model, x, Some(&mut rng)).probs)
                })
                .collect()
        })
        .collect();
    LabelMatrix::new(rows.len(), num_passes, model.num_classes(), labels.concat())
}

/// Fraction of samples whose deterministic prediction equals the label.
pub fn evaluate_accuracy(model: &MlpModel, xs: Features<'_>, labels: &[usize]) -> Result<f64> {
    if xs.len() != labels.len() {
        return Err(Error::input(format!(
            "{} samples but {} labels",
            xs.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::input("cannot evaluate accuracy on an empty set"));
    }
    let pred = predict_labels(model, xs)?;
    let correct = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

fn accumulate<R: Rng>(
    model: &MlpModel,
    x: &[f64],
    y: usize,
    rng: Option<&mut R>,
    grads: &mut Gradients,
) -> f64 {
    let t = run(model, x, rng);
    let layers = model.num_layers();
    let loss = -t.probs[y].max(1e-300).ln();
    let mut delta: Vec<f64> = t.probs.clone();
    delta[y] -= 1.0;
    for l in (0..layers).rev() {
        let fan_in = model.layer_sizes[l];
        let input = &t.a[l];
        for (j, &d) in delta.iter().enumerate() {
            grads.biases[l][j] += d;
            let row = &mut grads.weights[l][j * fan_in..(j + 1) * fan_in];
            for (g, &a) in row.iter_mut().zip(input) {
                *g += d * a;
            }
        }
        if l == 0 {
            break;
        }
        let w = &model.weights[l];
        let z_prev = &t.z[l - 1];
        let mask = &t.masks[l - 1];
        delta = (0..fan_in)
            .map(|i| {
                if z_prev[i] <= 0.0 || mask[i] == 0.0 {
                    return 0.0;
                }
                let back: f64 = delta
                    .iter()
                    .enumerate()
                    .map(|(j, &d)| d * w[j * fan_in + i])
                    .sum();
                back * mask[i]
            })
            .collect();
    }
    loss
}

/// Mean cross-entropy over `xs` and its gradient. With `dropout_seed`, one
/// generator seeded from it draws the masks for all samples in order.
pub fn loss_and_gradients(
    model: &MlpModel,
    xs: Features<'_>,
    labels: &[usize],
    dropout_seed: Option<u64>,
) -> Result<(f64, Gradients)> {
    if xs.len() != labels.len() || xs.is_empty() {
        return Err(Error::input("need a non-empty batch with one label per sample"));
    }
    if xs.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: xs.dim(),
        });
    }
    let mut grads = Gradients::zeros_like(model);
    let mut rng = dropout_seed.map(rng_from);
    let mut loss = 0.0;
    for (x, &y) in xs.rows().zip(labels) {
        loss += accumulate(model, x, y, rng.as_mut(), &mut grads);
    }
    let n = labels.len() as f64;
    for g in grads.weights.iter_mut().chain(grads.biases.iter_mut()) {
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok((loss / n, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            dropout_rate: 0.5,
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

/// Mini-batch SGD on cross-entropy with dropout active. Single-threaded so
/// the update order, and hence the result, depends only on `cfg`.
pub fn train_sgd(data: &Dataset, cfg: &TrainConfig) -> Result<MlpModel> {
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    if cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 {
        return Err(Error::config("learning rate must be positive"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let mut sizes = vec![data.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(data.num_classes());
    let mut model = MlpModel::init(&sizes, cfg.dropout_rate, cfg.init_scale, derive(cfg.seed, &[0]))?;
    let mut order_rng = rng_from(derive(cfg.seed, &[1]));
    let mut mask_rng = rng_from(derive(cfg.seed, &[2]));
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(&model);
            for &i in batch {
                accumulate(&model, data.row(i), data.labels()[i], Some(&mut mask_rng), &mut grads);
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&grads.weights) {
                w.iter_mut().zip(g).for_each(|(w, g)| *w -= step * g);
            }
            for (b, g) in model.biases.iter_mut().zip(&grads.biases) {
                b.iter_mut().zip(g).for_each(|(b, g)| *b -= step * g);
            }
        }
    }
    Ok(model)
}

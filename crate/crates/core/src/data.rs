//! Labeled feature datasets and small synthetic generators.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Row-major labeled feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    num_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(dim: usize, num_classes: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("feature dimension must be positive"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                actual: features.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::input(format!("label {y} outside [0, {num_classes})")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("features must be finite"));
        }
        Ok(Self {
            dim,
            num_classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> Features<'_> {
        Features {
            dim: self.dim,
            data: &self.features,
        }
    }

    pub fn raw_features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            dim: self.dim,
            num_classes: self.num_classes,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Split into `[0, at)` and `[at, len)`.
    pub fn split_at(&self, at: usize) -> (Dataset, Dataset) {
        let at = at.min(self.len());
        let (a, b): (Vec<usize>, Vec<usize>) = (0..self.len()).partition(|&i| i < at);
        (self.subset(&a), self.subset(&b))
    }

    /// Shuffle with `seed`, then split off the first `at` samples.
    pub fn shuffle_split(&self, at: usize, seed: u64) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng_from(seed));
        let at = at.min(self.len());
        (self.subset(&idx[..at]), self.subset(&idx[at..]))
    }

    /// Replace the feature rows, keeping labels.
    pub fn with_features(&self, features: Vec<f64>) -> Result<Dataset> {
        Dataset::new(self.dim, self.num_classes, features, self.labels.clone())
    }
}

/// Borrowed view of feature rows.
#[derive(Debug, Clone, Copy)]
pub struct Features<'a> {
    dim: usize,
    data: &'a [f64],
}

impl<'a> Features<'a> {
    pub fn new(dim: usize, data: &'a [f64]) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &'a [f64]> {
        self.data.chunks(self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Gaussian clusters around class centers inside the unit cube.
    Blobs,
    /// Two interleaved half circles in the plane.
    TwoMoons,
    /// Concentric rings in the plane, one per class.
    Rings,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Self::Blobs),
            "two-moons" | "moons" => Ok(Self::TwoMoons),
            "rings" => Ok(Self::Rings),
            other => Err(Error::config(format!("unknown dataset kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub num_classes: usize,
    pub num_samples: usize,
    /// Within-class standard deviation.
    pub noise: f64,
    /// Feature width for blobs; moons and rings are always two-dimensional.
    pub dim: usize,
    /// Distance of each blob center from the cube center.
    pub center_radius: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Default blob setup: 64 features in `[0, 1]` (an 8x8 grayscale image).
    pub fn blobs(num_classes: usize, num_samples: usize, seed: u64) -> Self {
        Self {
            kind: SynthKind::Blobs,
            num_classes,
            num_samples,
            noise: 0.1,
            dim: 64,
            center_radius: 0.3,
            seed,
        }
    }
}

/// Generate a labeled dataset. Classes are balanced to within one sample and
/// the sample order is shuffled.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.num_classes < 2 {
        return Err(Error::config("need at least two classes"));
    }
    if cfg.num_samples == 0 {
        return Err(Error::config("need at least one sample"));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::config("noise must be a finite non-negative number"));
    }
    let mut rng = rng_from(cfg.seed);
    let mut labels: Vec<usize> = (0..cfg.num_samples).map(|i| i % cfg.num_classes).collect();
    labels.shuffle(&mut rng);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");

    let (dim, features) = match cfg.kind {
        SynthKind::Blobs => {
            if cfg.dim == 0 {
                return Err(Error::config("blob dimension must be positive"));
            }
            let centers: Vec<Vec<f64>> = (0..cfg.num_classes)
                .map(|_| {
                    let dir: Vec<f64> = (0..cfg.dim).map(|_| gauss.sample(&mut rng)).collect();
                    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                    dir.iter().map(|v| 0.5 + cfg.center_radius * v / norm).collect()
                })
                .collect();
            let mut f = Vec::with_capacity(cfg.num_samples * cfg.dim);
            for &y in &labels {
                for &c in &centers[y] {
                    f.push((c + cfg.noise * gauss.sample(&mut rng)).clamp(0.0, 1.0));
                }
            }
            (cfg.dim, f)
        }
        SynthKind::TwoMoons => {
            if cfg.num_classes != 2 {
                return Err(Error::config("two-moons has exactly two classes"));
            }
            let mut f = Vec::with_capacity(cfg.num_samples * 2);
            for &y in &labels {
                let theta = rng.random_range(0.0..std::f64::consts::PI);
                let (x0, x1) = if y == 0 {
                    (theta.cos(), theta.sin())
                } else {
                    (1.0 - theta.cos(), 0.5 - theta.sin())
                };
                f.push(x0 + cfg.noise * gauss.sample(&mut rng));
                f.push(x1 + cfg.noise * gauss.sample(&mut rng));
            }
            (2, f)
        }
        SynthKind::Rings => {
            let mut f = Vec::with_capacity(cfg.num_samples * 2);
            for &y in &labels {
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let r = (y + 1) as f64 + cfg.noise * gauss.sample(&mut rng);
                f.push(r * theta.cos());
                f.push(r * theta.sin());
            }
            (2, f)
        }
    };
    Dataset::new(dim, cfg.num_classes, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let cfg = SynthConfig::blobs(3, 300, 9);
        assert_eq!(synth_dataset(&cfg).unwrap(), synth_dataset(&cfg).unwrap());
        let other = SynthConfig { seed: 10, ..cfg };
        assert_ne!(synth_dataset(&cfg).unwrap(), synth_dataset(&other).unwrap());
    }

    #[test]
    fn classes_are_balanced() {
        for kind in [SynthKind::Blobs, SynthKind::Rings] {
            let cfg = SynthConfig {
                kind,
                ..SynthConfig::blobs(4, 103, 1)
            };
            let d = synth_dataset(&cfg).unwrap();
            let mut counts = [0usize; 4];
            for &y in d.labels() {
                counts[y] += 1;
            }
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{counts:?}");
        }
    }

    #[test]
    fn one_sample_per_class() {
        let d = synth_dataset(&SynthConfig::blobs(5, 5, 3)).unwrap();
        let mut l = d.labels().to_vec();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn blobs_stay_in_unit_range() {
        let d = synth_dataset(&SynthConfig::blobs(3, 200, 4)).unwrap();
        assert!(d.raw_features().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(d.dim(), 64);
    }

    #[test]
    fn moons_need_two_classes() {
        let cfg = SynthConfig {
            kind: SynthKind::TwoMoons,
            ..SynthConfig::blobs(3, 10, 0)
        };
        assert!(synth_dataset(&cfg).is_err());
        let d = synth_dataset(&SynthConfig { num_classes: 2, ..cfg }).unwrap();
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn splits_partition_the_data() {
        let d = synth_dataset(&SynthConfig::blobs(3, 50, 2)).unwrap();
        let (a, b) = d.shuffle_split(20, 5);
        assert_eq!((a.len(), b.len()), (20, 30));
        let (a, b) = d.split_at(10);
        assert_eq!(a.row(0), d.row(0));
        assert_eq!(b.row(0), d.row(10));
    }
}

//! Shared helpers: a brute-force reimplementation of the estimator and random
//! instance generation.

#![allow(dead_code)]

use lvr_core::LabelMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub num_classes: usize,
    pub areas: usize,
    pub reference: Vec<Vec<usize>>,
    pub truth: Vec<usize>,
    pub new: Vec<Vec<usize>>,
}

impl Instance {
    pub fn matrices(&self) -> (LabelMatrix, LabelMatrix) {
        (
            LabelMatrix::from_rows(&self.reference, self.num_classes).unwrap(),
            LabelMatrix::from_rows(&self.new, self.num_classes).unwrap(),
        )
    }
}

fn noisy_rows(rng: &mut ChaCha8Rng, n: usize, t: usize, c: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| {
            let base = rng.random_range(0..c);
            // mostly stable samples, some very unstable ones
            let flip = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.9) };
            (0..t)
                .map(|_| if rng.random_bool(flip) { rng.random_range(0..c) } else { base })
                .collect()
        })
        .collect()
}

/// N <= 200, T = n <= 10, C <= 5.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = lvr_core::rng::rng_from(seed);
    let c = rng.random_range(2..=5);
    let t = rng.random_range(1..=10);
    let n_ori = rng.random_range(1..=200);
    let n_new = rng.random_range(1..=200);
    let reference = noisy_rows(&mut rng, n_ori, t, c);
    let truth = reference
        .iter()
        .map(|r| if rng.random_bool(0.7) { r[0] } else { rng.random_range(0..c) })
        .collect();
    let new = noisy_rows(&mut rng, n_new, t, c);
    Instance {
        num_classes: c,
        areas: t,
        reference,
        truth,
        new,
    }
}

/// Most frequent label, smallest on ties, and its count.
pub fn oracle_dominant(row: &[usize], c: usize) -> (usize, usize) {
    let mut best = (0, 0);
    for label in 0..c {
        let count = row.iter().filter(|&&l| l == label).count();
        if count > best.1 {
            best = (label, count);
        }
    }
    best
}

/// Area `t` with `t/n < k/T <= (t+1)/n`, found by scanning.
pub fn oracle_area(k: usize, t_passes: usize, n: usize) -> usize {
    (0..n)
        .find(|&t| t * t_passes < k * n && k * n <= (t + 1) * t_passes)
        .expect("an LVR in (0, 1] falls in some area")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub acc1: f64,
    pub acc2: f64,
    pub acc_new: f64,
    pub acc_ori: f64,
}

/// Brute-force estimate with empty areas counted as zero. `None` when the
/// reference top area is empty.
pub fn oracle_estimate(inst: &Instance) -> Option<OracleResult> {
    let n = inst.areas;
    let c = inst.num_classes;
    let mut size = vec![0usize; n];
    let mut correct = vec![0usize; n];
    for (row, &y) in inst.reference.iter().zip(&inst.truth) {
        let (label, k) = oracle_dominant(row, c);
        let a = oracle_area(k, row.len(), n);
        size[a] += 1;
        if label == y {
            correct[a] += 1;
        }
    }
    let mut new_size = vec![0usize; n];
    for row in &inst.new {
        new_size[oracle_area(oracle_dominant(row, c).1, row.len(), n)] += 1;
    }
    let n_ori = inst.reference.len();
    let n_new = inst.new.len();
    let acc_ori = correct.iter().sum::<usize>() as f64 / n_ori as f64;
    let mut num = 0.0;
    for t in 0..n {
        if size[t] > 0 {
            num += new_size[t] as f64 * correct[t] as f64 / size[t] as f64;
        }
    }
    let acc1 = num / n_new as f64;
    if size[n - 1] == 0 {
        return None;
    }
    let acc2 = (new_size[n - 1] as f64 / n_new as f64) / (size[n - 1] as f64 / n_ori as f64) * acc_ori;
    Some(OracleResult {
        acc1,
        acc2,
        acc_new: (acc1 + acc2) / 2.0,
        acc_ori,
    })
}

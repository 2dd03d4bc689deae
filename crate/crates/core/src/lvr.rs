//! Label Variation Ratio and the area partition built on top of it.
//!
//! A sample's LVR is the share of its `T` stochastic predictions that agree
//! with the most frequent (dominant) label. Samples close to a decision
//! boundary flip labels under perturbation and get a low ratio; samples deep
//! inside a class region keep a ratio of 1.
//!
//! LVR values are always of the form `k / T` with `1 <= k <= T`, so they are
//! kept as integer pairs and the area assignment is done in integer arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N x T` matrix of predicted class labels, one row per sample and one column
/// per stochastic pass (or per mutant).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    num_samples: usize,
    num_passes: usize,
    num_classes: usize,
    labels: Vec<usize>,
}

impl LabelMatrix {
    /// Build from row-major labels. Fails if the shape does not match or any
    /// label falls outside `[0, num_classes)`.
    pub fn new(
        num_samples: usize,
        num_passes: usize,
        num_classes: usize,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if num_passes == 0 {
            return Err(Error::input("label matrix needs at least one pass"));
        }
        if num_classes < 2 {
            return Err(Error::input("label matrix needs at least two classes"));
        }
        if labels.len() != num_samples * num_passes {
            return Err(Error::DimensionMismatch {
                expected: num_samples * num_passes,
                actual: labels.len(),
            });
        }
        if let Some((idx, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::input(format!(
                "label {l} at sample {}, pass {} is outside [0, {num_classes})",
                idx / num_passes,
                idx % num_passes
            )));
        }
        Ok(Self {
            num_samples,
            num_passes,
            num_classes,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<usize>], num_classes: usize) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != t) {
            return Err(Error::input(format!(
                "row {i} has {} entries, expected {t}",
                r.len()
            )));
        }
        Self::new(rows.len(), t, num_classes, rows.concat())
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_passes(&self) -> usize {
        self.num_passes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.labels[i * self.num_passes..(i + 1) * self.num_passes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.labels.chunks(self.num_passes)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// Dominant label of every row.
    pub fn dominant_labels(&self) -> Vec<usize> {
        self.rows()
            .map(|r| count_dominant(r, self.num_classes).0)
            .collect()
    }
}

/// Most frequent label in `row` and its count. Ties go to the smallest label.
pub fn dominant_label(row: &[usize], num_classes: usize) -> Result<(usize, usize)> {
    if row.is_empty() {
        return Err(Error::input("cannot take the dominant label of an empty row"));
    }
    if let Some(&l) = row.iter().find(|&&l| l >= num_classes) {
        return Err(Error::input(format!(
            "label {l} is outside [0, {num_classes})"
        )));
    }
    Ok(count_dominant(row, num_classes))
}

fn count_dominant(row: &[usize], num_classes: usize) -> (usize, usize) {
    let mut counts = vec![0usize; num_classes];
    for &l in row {
        counts[l] += 1;
    }
    // strict `>` keeps the first (smallest) label on ties
    let mut best = (0, counts[0]);
    for (label, &c) in counts.iter().enumerate().skip(1) {
        if c > best.1 {
            best = (label, c);
        }
    }
    best
}

/// An exact LVR value `dominant_count / passes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lvr {
    pub dominant_count: usize,
    pub passes: usize,
}

impl Lvr {
    pub fn value(self) -> f64 {
        self.dominant_count as f64 / self.passes as f64
    }

    /// Index `t` of the area with `t/n < k/T <= (t+1)/n`, i.e. `ceil(k n / T) - 1`.
    pub fn area(self, num_areas: usize) -> usize {
        let num = self.dominant_count as u128 * num_areas as u128;
        let den = self.passes as u128;
        (num.div_ceil(den) - 1) as usize
    }
}

/// Per-sample LVR values sharing one pass count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LvrVector {
    passes: usize,
    counts: Vec<usize>,
}

impl LvrVector {
    pub fn from_counts(passes: usize, counts: Vec<usize>) -> Result<Self> {
        if passes == 0 {
            return Err(Error::input("LVR needs at least one pass"));
        }
        if let Some(&k) = counts.iter().find(|&&k| k == 0 || k > passes) {
            return Err(Error::input(format!(
                "dominant count {k} is outside [1, {passes}]"
            )));
        }
        Ok(Self { passes, counts })
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, i: usize) -> Lvr {
        Lvr {
            dominant_count: self.counts[i],
            passes: self.passes,
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn iter(&self) -> impl Iterator<Item = Lvr> + '_ {
        self.counts.iter().map(|&k| Lvr {
            dominant_count: k,
            passes: self.passes,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.iter().map(Lvr::value).collect()
    }
}

pub fn compute_lvr(matrix: &LabelMatrix) -> LvrVector {
    LvrVector {
        passes: matrix.num_passes(),
        counts: matrix
            .rows()
            .map(|r| count_dominant(r, matrix.num_classes()).1)
            .collect(),
    }
}

/// Assignment of samples to `num_areas` equal-width LVR intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaPartition {
    num_areas: usize,
    assignment: Vec<usize>,
    area_sizes: Vec<usize>,
}

impl AreaPartition {
    pub fn num_areas(&self) -> usize {
        self.num_areas
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn area_sizes(&self) -> &[usize] {
        &self.area_sizes
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Size of the highest-LVR area.
    pub fn top_area_size(&self) -> usize {
        self.area_sizes[self.num_areas - 1]
    }

    pub fn members(&self, area: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == area)
            .map(|(i, _)| i)
    }
}

pub fn partition_areas(lvr: &LvrVector, num_areas: usize) -> Result<AreaPartition> {
    if num_areas == 0 {
        return Err(Error::config("number of areas must be at least 1"));
    }
    let assignment: Vec<usize> = lvr.iter().map(|v| v.area(num_areas)).collect();
    let mut area_sizes = vec![0; num_areas];
    for &a in &assignment {
        area_sizes[a] += 1;
    }
    Ok(AreaPartition {
        num_areas,
        assignment,
        area_sizes,
    })
}

/// Accuracy of one area. `None` marks an area without reference samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaAccuracy {
    pub size: usize,
    pub correct: usize,
}

impl AreaAccuracy {
    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.size > 0).then(|| self.correct as f64 / self.size as f64)
    }
}

/// Per-area accuracy of `predicted` against `truth`.
pub fn area_accuracy(
    partition: &AreaPartition,
    truth: &[usize],
    predicted: &[usize],
) -> Result<Vec<AreaAccuracy>> {
    if truth.len() != partition.len() || predicted.len() != partition.len() {
        return Err(Error::input(format!(
            "length mismatch: partition has {}, truth {}, predictions {}",
            partition.len(),
            truth.len(),
            predicted.len()
        )));
    }
    let mut out = vec![
        AreaAccuracy {
            size: 0,
            correct: 0
        };
        partition.num_areas()
    ];
    for ((&area, &y), &p) in partition.assignment.iter().zip(truth).zip(predicted) {
        out[area].size += 1;
        if y == p {
            out[area].correct += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dominant_label_examples() {
        assert_eq!(dominant_label(&[3, 3, 3], 4).unwrap(), (3, 3));
        assert_eq!(dominant_label(&[1, 1, 2, 2], 3).unwrap(), (1, 2));
        assert_eq!(dominant_label(&[2, 2, 1, 1], 3).unwrap(), (1, 2));
        assert_eq!(dominant_label(&[0, 1, 1, 1, 2], 3).unwrap(), (1, 3));
        assert!(matches!(
            dominant_label(&[], 3),
            Err(Error::InvalidInput(_))
        ));
        assert!(dominant_label(&[0, 3], 3).is_err());
    }

    #[test]
    fn lvr_examples() {
        let m = LabelMatrix::from_rows(&[vec![3, 3, 3, 3], vec![1, 1, 2, 2]], 4).unwrap();
        assert_eq!(compute_lvr(&m).values(), vec![1.0, 0.5]);
        let m = LabelMatrix::from_rows(&[vec![0, 1, 1, 1, 2]], 3).unwrap();
        assert_eq!(compute_lvr(&m).values(), vec![0.6]);
    }

    #[test]
    fn area_examples() {
        let lvr = |k, t| Lvr {
            dominant_count: k,
            passes: t,
        };
        assert_eq!(lvr(4, 4).area(2), 1);
        assert_eq!(lvr(2, 4).area(2), 0);
        assert_eq!(lvr(1, 50).area(50), 0);
        assert_eq!(lvr(50, 50).area(50), 49);
        assert_eq!(lvr(3, 5).area(1), 0);
    }

    #[test]
    fn zero_areas_rejected() {
        let v = LvrVector::from_counts(4, vec![1, 4]).unwrap();
        assert!(matches!(partition_areas(&v, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn matrix_rejects_out_of_range_and_ragged() {
        assert!(LabelMatrix::new(1, 2, 3, vec![0, 3]).is_err());
        assert!(LabelMatrix::new(1, 2, 3, vec![0]).is_err());
        assert!(LabelMatrix::from_rows(&[vec![0, 1], vec![1]], 2).is_err());
        assert!(LvrVector::from_counts(3, vec![0]).is_err());
        assert!(LvrVector::from_counts(3, vec![4]).is_err());
    }

    #[test]
    fn area_accuracy_counts() {
        let v = LvrVector::from_counts(3, vec![3, 3, 3, 1]).unwrap();
        let p = partition_areas(&v, 3).unwrap();
        let acc = area_accuracy(&p, &[0, 1, 2, 0], &[0, 1, 0, 0]).unwrap();
        assert_eq!(acc[2].accuracy(), Some(2.0 / 3.0));
        assert_eq!(acc[0].accuracy(), Some(1.0));
        assert!(acc[1].is_empty());
        assert_eq!(acc[1].accuracy(), None);
        assert!(area_accuracy(&p, &[0, 1], &[0, 1, 0, 0]).is_err());
    }

    #[test]
    fn integer_area_matches_rational_interval_exhaustively() {
        for t in 1..=64usize {
            for n in 1..=64usize {
                for k in 1..=t {
                    let area = Lvr {
                        dominant_count: k,
                        passes: t,
                    }
                    .area(n);
                    // t_a/n < k/t <= (t_a+1)/n  <=>  t_a*t < k*n <= (t_a+1)*t
                    let hits: Vec<usize> = (0..n)
                        .filter(|&a| a * t < k * n && k * n <= (a + 1) * t)
                        .collect();
                    assert_eq!(hits, vec![area], "k={k} T={t} n={n}");
                }
            }
        }
    }

    #[test]
    fn t_equals_n_gives_one_lvr_per_area() {
        for t in 1..=30 {
            for k in 1..=t {
                let a = Lvr {
                    dominant_count: k,
                    passes: t,
                }
                .area(t);
                assert_eq!(a, k - 1);
            }
        }
    }

    fn matrix_strategy() -> impl Strategy<Value = (LabelMatrix, usize)> {
        (1usize..40, 1usize..12, 2usize..6, 1usize..12).prop_flat_map(|(n, t, c, areas)| {
            proptest::collection::vec(0..c, n * t)
                .prop_map(move |l| (LabelMatrix::new(n, t, c, l).unwrap(), areas))
        })
    }

    proptest! {
        #[test]
        fn lvr_values_are_valid_fractions((m, _) in matrix_strategy()) {
            let v = compute_lvr(&m);
            for x in v.iter() {
                prop_assert!(x.dominant_count >= 1 && x.dominant_count <= m.num_passes());
                let f = x.value();
                prop_assert!(f > 0.0 && f <= 1.0);
            }
        }

        #[test]
        fn partition_is_exhaustive((m, areas) in matrix_strategy()) {
            let p = partition_areas(&compute_lvr(&m), areas).unwrap();
            prop_assert_eq!(p.area_sizes().iter().sum::<usize>(), m.num_samples());
            prop_assert!(p.assignment().iter().all(|&a| a < areas));
            let single = partition_areas(&compute_lvr(&m), 1).unwrap();
            prop_assert!(single.assignment().iter().all(|&a| a == 0));
        }

        #[test]
        fn column_permutation_keeps_lvr((m, _) in matrix_strategy(), rot in 0usize..12) {
            let t = m.num_passes();
            let rows: Vec<Vec<usize>> = m
                .rows()
                .map(|r| {
                    let mut r = r.to_vec();
                    r.rotate_left(rot % t);
                    r.reverse();
                    r
                })
                .collect();
            let shuffled = LabelMatrix::from_rows(&rows, m.num_classes()).unwrap();
            prop_assert_eq!(compute_lvr(&m), compute_lvr(&shuffled));
        }

        #[test]
        fn row_permutation_permutes_assignment((m, areas) in matrix_strategy()) {
            let mut rows: Vec<Vec<usize>> = m.rows().map(<[usize]>::to_vec).collect();
            rows.reverse();
            let rev = LabelMatrix::from_rows(&rows, m.num_classes()).unwrap();
            let a = partition_areas(&compute_lvr(&m), areas).unwrap();
            let b = partition_areas(&compute_lvr(&rev), areas).unwrap();
            let mut back = b.assignment().to_vec();
            back.reverse();
            prop_assert_eq!(a.assignment(), &back[..]);
        }
    }
}

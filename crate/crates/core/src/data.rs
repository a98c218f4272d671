//! Labelled feature datasets, the seeded Gaussian-blob generator, and
//! ratio splits.

use alloc::{format, vec::Vec};

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Distance of each class mean from the origin before jitter.
pub const CLUSTER_SCALE: f64 = 3.0;
/// Half-width of the seeded uniform jitter added to every mean coordinate.
pub const MEAN_JITTER: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("features"));
        }
        Ok(Dataset {
            features,
            labels,
            classes,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }
}

/// Unjittered class centres. With `dim ≥ classes` these are the scaled unit
/// vectors `CLUSTER_SCALE·e_k`; otherwise the classes sit on a circle in the
/// first two coordinates with the same nearest-neighbour spacing.
fn base_means(classes: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|k| {
            let mut mean = alloc::vec![0.0; dim];
            if dim >= classes {
                mean[k] = CLUSTER_SCALE;
            } else {
                let angle = 2.0 * core::f64::consts::PI * k as f64 / classes as f64;
                mean[0] = CLUSTER_SCALE * libm::cos(angle);
                mean[1] = CLUSTER_SCALE * libm::sin(angle);
            }
            mean
        })
        .collect()
}

/// `classes` isotropic Gaussian clusters of `n_per_class` points each with
/// standard deviation `overlap`. Rows are grouped by class.
pub fn gen_synthetic(
    classes: usize,
    n_per_class: usize,
    dim: usize,
    overlap: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 || n_per_class == 0 || dim < 2 {
        return Err(Error::InvalidConfig(format!(
            "need classes >= 2, n_per_class >= 1, dim >= 2; got {classes}, {n_per_class}, {dim}"
        )));
    }
    if !(overlap >= 0.0 && overlap.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "overlap must be finite and non-negative, got {overlap}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Uniform::new_inclusive(-MEAN_JITTER, MEAN_JITTER)
        .map_err(|e| Error::InvalidConfig(format!("jitter distribution: {e}")))?;
    let mut means = base_means(classes, dim);
    for v in means.iter_mut().flatten() {
        *v += jitter.sample(&mut rng);
    }

    let n = classes * n_per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            for &mu in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + overlap * z);
            }
            labels.push(k);
        }
    }
    Dataset::new(Matrix::from_vec(n, dim, data)?, labels, classes)
}

/// Train/validation/test proportions and the shuffle seed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.7,
            val: 0.2,
            test: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let ratios = [self.train, self.val, self.test];
        if ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "split ratios must be positive, got {ratios:?}"
            )));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split ratios sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Split sizes for `n` samples by largest-remainder rounding; ties in the
    /// remainder go to the earlier split.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        self.validate()?;
        let ratios = [self.train, self.val, self.test];
        let exact = ratios.map(|r| r * n as f64);
        let mut sizes = exact.map(|x| libm::floor(x) as usize);
        let assigned: usize = sizes.iter().sum();
        let mut by_remainder = [0usize, 1, 2];
        by_remainder.sort_by(|&a, &b| {
            let ra = exact[a] - libm::floor(exact[a]);
            let rb = exact[b] - libm::floor(exact[b]);
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in by_remainder.iter().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        Ok(sizes)
    }
}

/// Seeded permutation followed by contiguous cuts into train, validation and
/// test. Not stratified.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let [n_train, n_val, n_test] = spec.sizes(dataset.len())?;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::Empty("split (dataset too small for the ratios)"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (train, rest) = order.split_at(n_train);
    let (val, test) = rest.split_at(n_val);
    Ok((
        dataset.subset(train),
        dataset.subset(val),
        dataset.subset(test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratios(train: f64, val: f64, test: f64) -> SplitSpec {
        SplitSpec {
            train,
            val,
            test,
            seed: 3,
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_synthetic(4, 50, 6, 1.5, 42).unwrap();
        assert_eq!(a, gen_synthetic(4, 50, 6, 1.5, 42).unwrap());
        assert_ne!(a, gen_synthetic(4, 50, 6, 1.5, 43).unwrap());
        assert_eq!(a.len(), 200);
        assert_eq!(a.dim(), 6);
        assert_eq!(a.labels().iter().filter(|&&y| y == 3).count(), 50);
    }

    #[test]
    fn zero_overlap_gives_point_masses() {
        let d = gen_synthetic(3, 5, 2, 0.0, 1).unwrap();
        for k in 0..3 {
            let rows: Vec<&[f64]> = (0..d.len())
                .filter(|&i| d.labels()[i] == k)
                .map(|i| d.features().row(i))
                .collect();
            assert!(rows.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn generator_rejects_bad_sizes() {
        assert!(gen_synthetic(1, 5, 2, 1.0, 0).is_err());
        assert!(gen_synthetic(2, 0, 2, 1.0, 0).is_err());
        assert!(gen_synthetic(2, 5, 1, 1.0, 0).is_err());
        assert!(gen_synthetic(2, 5, 2, -1.0, 0).is_err());
    }

    #[test]
    fn split_sizes_follow_ratios() {
        assert_eq!(ratios(0.7, 0.2, 0.1).sizes(100).unwrap(), [70, 20, 10]);
        assert_eq!(ratios(0.2, 0.3, 0.5).sizes(10).unwrap(), [2, 3, 5]);
        assert_eq!(
            ratios(0.7, 0.2, 0.1)
                .sizes(3803)
                .unwrap()
                .iter()
                .sum::<usize>(),
            3803
        );
        assert!(ratios(0.7, 0.2, 0.2).sizes(10).is_err());
        assert!(ratios(1.1, -0.2, 0.1).sizes(10).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let d = gen_synthetic(3, 10, 2, 1.0, 8).unwrap();
        let (a, b, c) = split(&d, &ratios(0.7, 0.2, 0.1)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (21, 6, 3));
        let key = |r: &[f64], y: usize| (r.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y);
        let mut all: Vec<_> = [&a, &b, &c]
            .iter()
            .flat_map(|s| (0..s.len()).map(move |i| key(s.features().row(i), s.labels()[i])))
            .collect();
        let mut orig: Vec<_> = (0..d.len())
            .map(|i| key(d.features().row(i), d.labels()[i]))
            .collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_needs_enough_samples() {
        let d = gen_synthetic(2, 2, 2, 1.0, 8).unwrap();
        assert!(split(&d, &ratios(0.7, 0.2, 0.1)).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(Matrix::zeros(2, 2), alloc::vec![0], 2).is_err());
        assert!(Dataset::new(Matrix::zeros(1, 2), alloc::vec![2], 2).is_err());
    }
}

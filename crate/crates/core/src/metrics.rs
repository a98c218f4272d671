//! Equal-width confidence binning, hard ECE, and macro-averaged
//! classification metrics.
//!
//! Bin `m` (0-based) covers the half-open interval `(m/M, (m+1)/M]`. A
//! confidence of exactly 0 belongs to no such interval and is put in bin 0.

use alloc::{format, vec, vec::Vec};

use crate::error::{Error, Result};

const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// One sample's predicted distribution together with its true label.
///
/// `predicted_class` and `confidence` are always derived from `probs`
/// (lowest index wins ties) and cannot be set independently.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionRecord {
    probs: Vec<f64>,
    predicted_class: usize,
    confidence: f64,
    true_class: usize,
}

impl PredictionRecord {
    pub fn new(probs: Vec<f64>, true_class: usize) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidProbabilities(format!(
                "entry {p} is negative or non-finite"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        if true_class >= probs.len() {
            return Err(Error::LabelOutOfRange {
                label: true_class,
                classes: probs.len(),
            });
        }
        let predicted_class = argmax(&probs);
        let confidence = probs[predicted_class];
        Ok(PredictionRecord {
            probs,
            predicted_class,
            confidence,
            true_class,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn predicted_class(&self) -> usize {
        self.predicted_class
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn true_class(&self) -> usize {
        self.true_class
    }

    pub fn is_correct(&self) -> bool {
        self.predicted_class == self.true_class
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bin {
    pub count: usize,
    /// Fraction of the bin's samples predicted correctly (0 when empty).
    pub acc: f64,
    /// Mean confidence of the bin's samples (0 when empty).
    pub conf: f64,
}

/// Per-bin accuracy and confidence over `M` equal-width bins.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReliabilityTable {
    bins: Vec<Bin>,
    n: usize,
}

impl ReliabilityTable {
    /// Builds a table from precomputed bins; `n` is the sum of the counts.
    pub fn from_bins(bins: Vec<Bin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::ZeroBins);
        }
        for (m, b) in bins.iter().enumerate() {
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            if !in_unit(b.acc) || !in_unit(b.conf) {
                return Err(Error::InvalidConfig(format!(
                    "bin {m} has acc/conf outside [0, 1]"
                )));
            }
            if b.count == 0 && (b.acc != 0.0 || b.conf != 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "empty bin {m} must carry zero acc and conf"
                )));
            }
        }
        let n = bins.iter().map(|b| b.count).sum();
        Ok(ReliabilityTable { bins, n })
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Lower and upper edge of bin `m`.
    pub fn edges(&self, m: usize) -> (f64, f64) {
        bin_edges(m, self.bins.len())
    }
}

pub(crate) fn bin_edges(m: usize, bins: usize) -> (f64, f64) {
    (m as f64 / bins as f64, (m + 1) as f64 / bins as f64)
}

/// Maps a confidence to its 0-based bin.
pub fn bin_index(confidence: f64, bins: usize) -> Result<usize> {
    if bins == 0 {
        return Err(Error::ZeroBins);
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::ConfidenceOutOfRange(confidence));
    }
    if confidence == 0.0 {
        return Ok(0);
    }
    // ceil gives the right answer up to one ulp of rounding in the product;
    // the edge comparisons below settle it against the exact f64 edges.
    let mut m = (libm::ceil(confidence * bins as f64) as usize).clamp(1, bins) - 1;
    while m > 0 && confidence <= bin_edges(m, bins).0 {
        m -= 1;
    }
    while m + 1 < bins && confidence > bin_edges(m, bins).1 {
        m += 1;
    }
    Ok(m)
}

pub fn build_reliability_table(
    records: &[PredictionRecord],
    bins: usize,
) -> Result<ReliabilityTable> {
    let first = records.first().ok_or(Error::Empty("prediction records"))?;
    if bins == 0 {
        return Err(Error::ZeroBins);
    }
    let classes = first.num_classes();
    let mut counts = vec![0usize; bins];
    let mut correct = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    for (i, r) in records.iter().enumerate() {
        if r.num_classes() != classes {
            return Err(Error::DimensionMismatch(format!(
                "record {i} has {} classes, expected {classes}",
                r.num_classes()
            )));
        }
        let m = bin_index(r.confidence(), bins)?;
        counts[m] += 1;
        correct[m] += usize::from(r.is_correct());
        conf_sum[m] += r.confidence();
    }
    let bins = counts
        .iter()
        .zip(&correct)
        .zip(&conf_sum)
        .map(|((&count, &hits), &sum)| {
            if count == 0 {
                Bin::default()
            } else {
                Bin {
                    count,
                    acc: hits as f64 / count as f64,
                    conf: sum / count as f64,
                }
            }
        })
        .collect();
    Ok(ReliabilityTable {
        bins,
        n: records.len(),
    })
}

/// Expected calibration error: the count-weighted mean of `|acc - conf|`.
pub fn ece(table: &ReliabilityTable) -> Result<f64> {
    if table.n == 0 {
        return Err(Error::Empty("reliability table"));
    }
    let n = table.n as f64;
    Ok(table
        .bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| (b.count as f64 / n) * (b.acc - b.conf).abs())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Macro-averaged precision, recall and F1 over `classes` classes plus
/// overall accuracy. Zero denominators score 0.
pub fn classification_report(
    records: &[PredictionRecord],
    classes: usize,
) -> Result<ClassificationReport> {
    if records.is_empty() {
        return Err(Error::Empty("prediction records"));
    }
    if classes == 0 {
        return Err(Error::InvalidConfig("class count must be positive".into()));
    }
    let mut tp = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    let mut actual = vec![0usize; classes];
    for r in records {
        let (p, y) = (r.predicted_class(), r.true_class());
        for label in [p, y] {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
        }
        predicted[p] += 1;
        actual[y] += 1;
        if p == y {
            tp[p] += 1;
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let per_class: Vec<ClassMetrics> = (0..classes)
        .map(|c| {
            let precision = ratio(tp[c], predicted[c]);
            let recall = ratio(tp[c], actual[c]);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let k = classes as f64;
    Ok(ClassificationReport {
        macro_precision: per_class.iter().map(|c| c.precision).sum::<f64>() / k,
        macro_recall: per_class.iter().map(|c| c.recall).sum::<f64>() / k,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k,
        accuracy: ratio(tp.iter().sum(), records.len()),
        per_class,
    })
}

//! Differentiable ECE surrogate and the curriculum-weighted training objective.
//!
//! Hard ECE counts correct predictions per bin with a 0-1 indicator. The
//! surrogate replaces that indicator with `S(tan(πq - π/2))`, where `S` is
//! the logistic sigmoid and `q` is a probability. Bin membership is still
//! decided by the hard confidence and is held fixed when differentiating.
//!
//! The combined objective is `nll + w · soft_ece`, where `w` ramps linearly
//! from 0 at epoch `s_e` to `γ_E` at epoch `N` (curriculum), or stays at
//! `γ_E` throughout (fixed weight).

use alloc::{format, vec, vec::Vec};
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{argmax, bin_index};

/// Which probability feeds the soft correctness indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum IndicatorVariant {
    /// The sample's confidence (its maximum probability).
    #[default]
    MaxProb,
    /// The probability assigned to the true class.
    TrueClassProb,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossConfig {
    /// Target weight of the ECE term.
    pub gamma_e: f64,
    /// First epoch (0-based) at which the ECE term has non-zero weight.
    pub s_e: usize,
    /// Total number of training epochs `N`.
    pub total_epochs: usize,
    /// Number of bins used by the surrogate during training.
    pub m_train: usize,
    /// Probabilities are clamped to `[epsilon, 1 - epsilon]`.
    pub epsilon: f64,
    pub indicator_variant: IndicatorVariant,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma_e: 0.05,
            s_e: 0,
            total_epochs: 50,
            m_train: 10,
            epsilon: 1e-6,
            indicator_variant: IndicatorVariant::MaxProb,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma_e.is_finite() || self.gamma_e < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma_e must be finite and non-negative, got {}",
                self.gamma_e
            )));
        }
        if self.total_epochs == 0 || self.s_e >= self.total_epochs {
            return Err(Error::InvalidConfig(format!(
                "need s_e < total_epochs, got s_e = {} and N = {}",
                self.s_e, self.total_epochs
            )));
        }
        if self.m_train == 0 {
            return Err(Error::ZeroBins);
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Loss components for one batch plus the gradient of `total` w.r.t. logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub nll: f64,
    pub soft_ece: f64,
    pub ece_weight: f64,
    pub total: f64,
    pub grad_logits: Matrix,
}

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty("logits"));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    Ok(out)
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    let mut data = Vec::with_capacity(logits.rows() * logits.cols());
    for row in logits.iter_rows() {
        data.extend(softmax(row)?);
    }
    Matrix::from_vec(logits.rows(), logits.cols(), data)
}

fn check_batch(probs: &Matrix, labels: &[usize]) -> Result<()> {
    if probs.rows() == 0 {
        return Err(Error::Empty("batch"));
    }
    if labels.len() != probs.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a batch of {}",
            labels.len(),
            probs.rows()
        )));
    }
    let classes = probs.cols();
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    if !probs.is_finite() {
        return Err(Error::NonFinite("probabilities"));
    }
    Ok(())
}

/// Mean negative log-likelihood of the labels and its gradient with respect
/// to the logits that produced `probs`, `(p - onehot(y)) / batch`.
pub fn nll_loss(probs: &Matrix, labels: &[usize], epsilon: f64) -> Result<(f64, Matrix)> {
    check_batch(probs, labels)?;
    let n = probs.rows() as f64;
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        loss -= libm::log(probs.get(i, y).max(epsilon));
        let row = grad.row_mut(i);
        row[y] -= 1.0;
        for g in row {
            *g /= n;
        }
    }
    Ok((loss / n, grad))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `S(tan(πp' - π/2))` with `p'` clamped to `[epsilon, 1 - epsilon]`.
pub fn soft_indicator(p: f64, epsilon: f64) -> f64 {
    let p = p.clamp(epsilon, 1.0 - epsilon);
    sigmoid(libm::tan(PI * p - PI / 2.0))
}

/// Derivative of [`soft_indicator`] in `p`; zero where the clamp is active.
pub fn soft_indicator_derivative(p: f64, epsilon: f64) -> f64 {
    if p < epsilon || p > 1.0 - epsilon {
        return 0.0;
    }
    let t = libm::tan(PI * p - PI / 2.0);
    let s = sigmoid(t);
    // d/dp tan(πp - π/2) = π·sec² = π(1 + tan²)
    s * (1.0 - s) * PI * (1.0 + t * t)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Forward value and gradient with respect to the probabilities.
fn soft_ece_with_prob_grad(
    probs: &Matrix,
    labels: &[usize],
    bins: usize,
    variant: IndicatorVariant,
    epsilon: f64,
) -> Result<(f64, Matrix)> {
    check_batch(probs, labels)?;
    if bins == 0 {
        return Err(Error::ZeroBins);
    }
    let n = probs.rows();
    let mut count = vec![0usize; bins];
    let mut soft_sum = vec![0.0f64; bins];
    let mut conf_sum = vec![0.0f64; bins];
    let mut members = Vec::with_capacity(n);
    for (i, &y) in labels.iter().enumerate() {
        let row = probs.row(i);
        let predicted = argmax(row);
        let conf = row[predicted];
        let q = match variant {
            IndicatorVariant::MaxProb => conf,
            IndicatorVariant::TrueClassProb => row[y],
        };
        let m = bin_index(conf.min(1.0), bins)?;
        count[m] += 1;
        soft_sum[m] += soft_indicator(q, epsilon);
        conf_sum[m] += conf;
        members.push((m, predicted, q));
    }

    let total = n as f64;
    let mut value = 0.0;
    let mut direction = vec![0.0f64; bins];
    for m in 0..bins {
        if count[m] == 0 {
            continue;
        }
        let c = count[m] as f64;
        let gap = soft_sum[m] / c - conf_sum[m] / c;
        value += (c / total) * gap.abs();
        // (|B|/n)·sign(gap)·(1/|B|) per sample
        direction[m] = sign(gap) / total;
    }

    let mut grad = Matrix::zeros(n, probs.cols());
    for (i, &(m, predicted, q)) in members.iter().enumerate() {
        let d = direction[m];
        if d == 0.0 {
            continue;
        }
        let ds = soft_indicator_derivative(q, epsilon);
        let row = grad.row_mut(i);
        match variant {
            IndicatorVariant::MaxProb => row[predicted] += d * (ds - 1.0),
            IndicatorVariant::TrueClassProb => {
                row[labels[i]] += d * ds;
                row[predicted] -= d;
            }
        }
    }
    Ok((value, grad))
}

/// Pulls a gradient w.r.t. softmax outputs back to the logits:
/// `dz_j = p_j (g_j - Σ_k p_k g_k)`.
fn softmax_backward(probs: &Matrix, grad_probs: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..probs.rows() {
        let p = probs.row(i);
        let g = grad_probs.row(i);
        let inner: f64 = p.iter().zip(g).map(|(p, g)| p * g).sum();
        for ((o, &p), &g) in out.row_mut(i).iter_mut().zip(p).zip(g) {
            *o = p * (g - inner);
        }
    }
    out
}

/// Soft ECE of a batch of probability vectors.
pub fn soft_ece(
    probs: &Matrix,
    labels: &[usize],
    bins: usize,
    variant: IndicatorVariant,
    epsilon: f64,
) -> Result<f64> {
    soft_ece_with_prob_grad(probs, labels, bins, variant, epsilon).map(|(v, _)| v)
}

/// Gradient of [`soft_ece`] with respect to the logits.
pub fn soft_ece_grad(
    logits: &Matrix,
    labels: &[usize],
    bins: usize,
    variant: IndicatorVariant,
    epsilon: f64,
) -> Result<Matrix> {
    let probs = softmax_rows(logits)?;
    let (_, grad_probs) = soft_ece_with_prob_grad(&probs, labels, bins, variant, epsilon)?;
    Ok(softmax_backward(&probs, &grad_probs))
}

/// ECE weight at 0-based epoch `epoch`: zero before `s_e`, then
/// `(epoch - s_e) / (N - s_e) · γ_E`.
pub fn curriculum_weight(epoch: usize, config: &LossConfig) -> Result<f64> {
    let total = config.total_epochs;
    if epoch > total {
        return Err(Error::EpochOutOfRange { epoch, total });
    }
    if config.s_e >= total {
        return Err(Error::InvalidConfig(format!(
            "need s_e < total_epochs, got s_e = {} and N = {total}",
            config.s_e
        )));
    }
    if epoch < config.s_e {
        return Ok(0.0);
    }
    let progress = (epoch - config.s_e) as f64 / (total - config.s_e) as f64;
    Ok(progress * config.gamma_e)
}

/// `nll + w · soft_ece` with an explicit weight. When `weight` is zero the
/// gradient is exactly the NLL gradient.
pub fn weighted_loss(
    logits: &Matrix,
    labels: &[usize],
    weight: f64,
    config: &LossConfig,
) -> Result<LossValue> {
    let probs = softmax_rows(logits)?;
    let (nll, mut grad_logits) = nll_loss(&probs, labels, config.epsilon)?;
    let (soft, grad_probs) = soft_ece_with_prob_grad(
        &probs,
        labels,
        config.m_train,
        config.indicator_variant,
        config.epsilon,
    )?;
    if weight != 0.0 {
        let ece_grad = softmax_backward(&probs, &grad_probs);
        for (g, e) in grad_logits
            .as_mut_slice()
            .iter_mut()
            .zip(ece_grad.as_slice())
        {
            *g += weight * e;
        }
    }
    Ok(LossValue {
        nll,
        soft_ece: soft,
        ece_weight: weight,
        total: nll + weight * soft,
        grad_logits,
    })
}

/// Combined objective at epoch `epoch`. With `curriculum` the ECE weight
/// follows [`curriculum_weight`]; otherwise it is `γ_E` at every epoch.
pub fn combined_loss(
    logits: &Matrix,
    labels: &[usize],
    epoch: usize,
    config: &LossConfig,
    curriculum: bool,
) -> Result<LossValue> {
    config.validate()?;
    let weight = if curriculum {
        curriculum_weight(epoch, config)?
    } else {
        config.gamma_e
    };
    weighted_loss(logits, labels, weight, config)
}

/// The ECE weight that makes `γ_E · soft_ece` match `nll` in magnitude.
pub fn auto_gamma(nll: f64, soft_ece: f64) -> Result<f64> {
    if !(nll > 0.0 && soft_ece > 0.0) || !nll.is_finite() || !soft_ece.is_finite() {
        return Err(Error::NonPositiveLoss { nll, soft_ece });
    }
    Ok(nll / soft_ece)
}

//! Softmax classifier: `input → [affine → tanh] → affine → logits`.
//!
//! Weights are stored `fan_in × fan_out` so a batch forward is `X·W + b`.

use alloc::{format, vec, vec::Vec};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::{weighted_loss, LossConfig, LossValue};
use crate::matrix::Matrix;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weights: Matrix::zeros(self.weights.rows(), self.weights.cols()),
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn same_shape(&self, other: &Layer) -> bool {
        self.weights.rows() == other.weights.rows()
            && self.weights.cols() == other.weights.cols()
            && self.bias.len() == other.bias.len()
    }

    fn apply(&self, input: &Matrix) -> Result<Matrix> {
        let mut out = input.matmul(&self.weights)?;
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    /// Present for the one-hidden-layer architecture.
    pub hidden: Option<Layer>,
    pub output: Layer,
}

impl ModelParams {
    pub fn input_dim(&self) -> usize {
        self.hidden.as_ref().unwrap_or(&self.output).weights.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.as_ref().map_or(0, |h| h.bias.len())
    }

    pub fn num_classes(&self) -> usize {
        self.output.bias.len()
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.hidden.iter().chain(core::iter::once(&self.output))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.hidden
            .iter_mut()
            .chain(core::iter::once(&mut self.output))
    }

    pub fn num_params(&self) -> usize {
        self.layers()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// All parameters in a fixed order: per layer (hidden first), weights
    /// row-major then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in self.layers() {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Copy of `self` with parameters replaced from a [`flatten`]-ordered slice.
    ///
    /// [`flatten`]: ModelParams::flatten
    pub fn with_flat(&self, values: &[f64]) -> Result<ModelParams> {
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        let mut out = self.clone();
        let mut rest = values;
        for l in out.layers_mut() {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&rest[..w.len()]);
            rest = &rest[w.len()..];
            let b = l.bias.len();
            l.bias.copy_from_slice(&rest[..b]);
            rest = &rest[b..];
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    fn zeros_like(&self) -> ModelParams {
        ModelParams {
            hidden: self.hidden.as_ref().map(Layer::zeros_like),
            output: self.output.zeros_like(),
        }
    }

    fn same_shape(&self, other: &ModelParams) -> bool {
        let hidden = match (&self.hidden, &other.hidden) {
            (None, None) => true,
            (Some(a), Some(b)) => a.same_shape(b),
            _ => false,
        };
        hidden && self.output.same_shape(&other.output)
    }
}

fn init_layer(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Result<Layer> {
    let bound = 1.0 / libm::sqrt(fan_in as f64);
    let dist = Uniform::new_inclusive(-bound, bound)
        .map_err(|e| Error::InvalidConfig(format!("weight distribution: {e}")))?;
    let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
    Ok(Layer {
        weights: Matrix::from_vec(fan_in, fan_out, data)?,
        bias: vec![0.0; fan_out],
    })
}

/// Weights uniform in `±1/sqrt(fan_in)`, biases zero. `hidden_dim = 0`
/// gives a single linear layer.
pub fn init_model(
    input_dim: usize,
    hidden_dim: usize,
    classes: usize,
    seed: u64,
) -> Result<ModelParams> {
    if input_dim == 0 {
        return Err(Error::InvalidConfig("input_dim must be at least 1".into()));
    }
    if classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = if hidden_dim > 0 {
        Some(init_layer(input_dim, hidden_dim, &mut rng)?)
    } else {
        None
    };
    let output_fan_in = if hidden_dim > 0 {
        hidden_dim
    } else {
        input_dim
    };
    let output = init_layer(output_fan_in, classes, &mut rng)?;
    Ok(ModelParams { hidden, output })
}

struct Activations {
    hidden: Option<Matrix>,
    logits: Matrix,
}

fn forward_with_activations(params: &ModelParams, features: &Matrix) -> Result<Activations> {
    if features.cols() != params.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "features have {} columns, model expects {}",
            features.cols(),
            params.input_dim()
        )));
    }
    match &params.hidden {
        Some(h) => {
            let mut act = h.apply(features)?;
            for v in act.as_mut_slice() {
                *v = libm::tanh(*v);
            }
            let logits = params.output.apply(&act)?;
            Ok(Activations {
                hidden: Some(act),
                logits,
            })
        }
        None => Ok(Activations {
            hidden: None,
            logits: params.output.apply(features)?,
        }),
    }
}

pub fn forward(params: &ModelParams, features: &Matrix) -> Result<Matrix> {
    forward_with_activations(params, features).map(|a| a.logits)
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

/// Loss, parameter gradients and the logits of the forward pass.
pub(crate) fn backward_weighted(
    params: &ModelParams,
    features: &Matrix,
    labels: &[usize],
    weight: f64,
    loss: &LossConfig,
) -> Result<(LossValue, ModelParams, Matrix)> {
    let acts = forward_with_activations(params, features)?;
    let value = weighted_loss(&acts.logits, labels, weight, loss)?;
    let g = &value.grad_logits;
    let mut grads = params.zeros_like();
    match (&params.hidden, &acts.hidden) {
        (Some(_), Some(h)) => {
            grads.output.weights = h.t_matmul(g)?;
            grads.output.bias = column_sums(g);
            let mut pre = g.matmul_t(&params.output.weights)?;
            for (d, a) in pre.as_mut_slice().iter_mut().zip(h.as_slice()) {
                *d *= 1.0 - a * a;
            }
            let hidden = grads.hidden.as_mut().expect("shape mirrors params");
            hidden.weights = features.t_matmul(&pre)?;
            hidden.bias = column_sums(&pre);
        }
        _ => {
            grads.output.weights = features.t_matmul(g)?;
            grads.output.bias = column_sums(g);
        }
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("parameter gradients"));
    }
    Ok((value, grads, acts.logits))
}

/// Loss at epoch `epoch` under `config`'s training mode, and its gradient
/// with respect to every parameter.
pub fn backward(
    params: &ModelParams,
    features: &Matrix,
    labels: &[usize],
    epoch: usize,
    config: &TrainConfig,
) -> Result<(LossValue, ModelParams)> {
    let weight = config.ece_weight(epoch)?;
    backward_weighted(params, features, labels, weight, &config.loss).map(|(v, g, _)| (v, g))
}

/// `params - learning_rate · grads`, elementwise.
pub fn sgd_step(
    params: &ModelParams,
    grads: &ModelParams,
    learning_rate: f64,
) -> Result<ModelParams> {
    if !params.same_shape(grads) {
        return Err(Error::DimensionMismatch(
            "gradient shape differs from parameter shape".into(),
        ));
    }
    let mut out = params.clone();
    for (layer, grad) in out.layers_mut().zip(grads.layers()) {
        for (p, g) in layer
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(grad.weights.as_slice())
        {
            *p -= learning_rate * g;
        }
        for (p, g) in layer.bias.iter_mut().zip(&grad.bias) {
            *p -= learning_rate * g;
        }
    }
    Ok(out)
}

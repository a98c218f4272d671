//! Calibration metrics, a differentiable expected-calibration-error loss, and
//! a small classifier trainer that uses it.
//!
//! The crate is `no_std` (with `alloc`). File formats, rendering and the
//! command line live in the `calib` crate.
//!
//! Layout:
//! - [`metrics`]: binning, reliability tables, hard ECE, macro P/R/F1.
//! - [`loss`]: softmax, NLL, the sigmoid-of-tangent soft indicator, soft ECE
//!   and its analytic gradient, the curriculum weight ramp.
//! - [`model`]: linear / one-hidden-layer tanh classifier with hand-written
//!   backpropagation and SGD.
//! - [`trainer`]: vanilla, curriculum and fixed-weight training protocols.
//! - [`data`]: seeded Gaussian-blob datasets and ratio splits.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod trainer;

pub use data::{gen_synthetic, split, Dataset, SplitSpec};
pub use error::{Error, Result};
pub use loss::{
    auto_gamma, combined_loss, curriculum_weight, nll_loss, soft_ece, soft_ece_grad,
    soft_indicator, soft_indicator_derivative, softmax, softmax_rows, weighted_loss,
    IndicatorVariant, LossConfig, LossValue,
};
pub use matrix::Matrix;
pub use metrics::{
    argmax, bin_index, build_reliability_table, classification_report, ece, Bin, ClassMetrics,
    ClassificationReport, PredictionRecord, ReliabilityTable,
};
pub use model::{backward, forward, init_model, sgd_step, Layer, ModelParams};
pub use trainer::{
    evaluate, measure_gamma, train, train_with_observer, EpochStats, Evaluation, TrainConfig,
    TrainMode, TrainReport, EVAL_BINS,
};

//! Mini-batch SGD training under the three protocols: plain NLL, NLL plus a
//! curriculum-ramped soft-ECE term, and NLL plus a constant-weight term.
//!
//! Everything is a deterministic function of the data and the config.

use alloc::{format, vec::Vec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{auto_gamma, curriculum_weight, softmax, LossConfig};
use crate::metrics::{
    argmax, build_reliability_table, classification_report, ece, ClassificationReport,
    PredictionRecord, ReliabilityTable,
};
use crate::model::{backward_weighted, forward, init_model, sgd_step, ModelParams};

/// Bins used for held-out calibration metrics.
pub const EVAL_BINS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrainMode {
    /// NLL only.
    VanillaNll,
    /// NLL plus soft ECE with the linearly ramped weight.
    #[default]
    CalibratedCurriculum,
    /// NLL plus soft ECE at a constant weight `γ_E`.
    CalibratedFixed,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// `loss.total_epochs` must equal `epochs`.
    pub loss: LossConfig,
    pub mode: TrainMode,
    /// 0 selects the linear model.
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.001,
            seed: 0,
            loss: LossConfig::default(),
            mode: TrainMode::default(),
            hidden_dim: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.loss.total_epochs != self.epochs {
            return Err(Error::InvalidConfig(format!(
                "loss.total_epochs ({}) differs from epochs ({})",
                self.loss.total_epochs, self.epochs
            )));
        }
        self.loss.validate()
    }

    /// ECE weight applied during 0-based epoch `epoch`.
    pub fn ece_weight(&self, epoch: usize) -> Result<f64> {
        match self.mode {
            TrainMode::VanillaNll => Ok(0.0),
            TrainMode::CalibratedCurriculum => curriculum_weight(epoch, &self.loss),
            TrainMode::CalibratedFixed => Ok(self.loss.gamma_e),
        }
    }
}

/// Per-epoch loss components, averaged over samples.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    pub epoch: usize,
    pub ece_weight: f64,
    pub nll: f64,
    pub soft_ece: f64,
    /// `nll + ece_weight · soft_ece`.
    pub total: f64,
    /// Accuracy of the pre-update predictions seen during the epoch.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub mode: TrainMode,
    pub gamma_e: f64,
    pub epochs: Vec<EpochStats>,
    /// Metrics on the held-out split.
    pub holdout: ClassificationReport,
    pub holdout_ece: f64,
    pub holdout_table: ReliabilityTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub records: Vec<PredictionRecord>,
    pub report: ClassificationReport,
    pub ece: f64,
    pub table: ReliabilityTable,
}

/// Runs the model over a dataset and scores it with `bins` calibration bins.
pub fn evaluate(params: &ModelParams, data: &Dataset, bins: usize) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    let logits = forward(params, data.features())?;
    let records = logits
        .iter_rows()
        .zip(data.labels())
        .map(|(z, &y)| PredictionRecord::new(softmax(z)?, y))
        .collect::<Result<Vec<_>>>()?;
    let table = build_reliability_table(&records, bins)?;
    Ok(Evaluation {
        report: classification_report(&records, params.num_classes())?,
        ece: ece(&table)?,
        table,
        records,
    })
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    // splitmix64 finalizer over (seed, epoch)
    let mut z = seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_splits(train_set: &Dataset, holdout: &Dataset) -> Result<()> {
    if train_set.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if holdout.is_empty() {
        return Err(Error::Empty("held-out split"));
    }
    if train_set.dim() != holdout.dim() || train_set.classes() != holdout.classes() {
        return Err(Error::DimensionMismatch(format!(
            "training split is {}-dim/{} classes, held-out split is {}-dim/{} classes",
            train_set.dim(),
            train_set.classes(),
            holdout.dim(),
            holdout.classes()
        )));
    }
    Ok(())
}

fn run_epochs(
    train_set: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelParams, Vec<EpochStats>)> {
    let mut params = init_model(
        train_set.dim(),
        config.hidden_dim,
        train_set.classes(),
        config.seed,
    )?;
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let weight = config.ece_weight(epoch)?;
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(
            config.seed,
            epoch,
        )));

        let (mut nll, mut soft, mut correct) = (0.0, 0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let x = train_set.features().select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| train_set.labels()[i]).collect();
            let (value, grads, logits) = backward_weighted(&params, &x, &y, weight, &config.loss)?;
            let b = batch.len() as f64;
            nll += value.nll * b;
            soft += value.soft_ece * b;
            correct += logits
                .iter_rows()
                .zip(&y)
                .filter(|(z, &label)| argmax(z) == label)
                .count();
            params = sgd_step(&params, &grads, config.learning_rate)?;
            if !params.is_finite() {
                return Err(Error::NonFinite("model parameters"));
            }
        }
        let nll = nll / n as f64;
        let soft_ece = soft / n as f64;
        let stats = EpochStats {
            epoch,
            ece_weight: weight,
            nll,
            soft_ece,
            total: nll + weight * soft_ece,
            train_accuracy: correct as f64 / n as f64,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok((params, history))
}

/// [`train`] with a hook invoked after every epoch.
pub fn train_with_observer(
    train_set: &Dataset,
    holdout: &Dataset,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    check_splits(train_set, holdout)?;
    let (params, epochs) = run_epochs(train_set, config, on_epoch)?;
    let eval = evaluate(&params, holdout, EVAL_BINS)?;
    let report = TrainReport {
        mode: config.mode,
        gamma_e: config.loss.gamma_e,
        epochs,
        holdout: eval.report,
        holdout_ece: eval.ece,
        holdout_table: eval.table,
    };
    Ok((params, report))
}

/// Trains from a seeded initialization with seeded per-epoch shuffles and
/// scores the result on `holdout` with [`EVAL_BINS`] bins. The final partial
/// batch of each epoch is kept.
pub fn train(
    train_set: &Dataset,
    holdout: &Dataset,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    train_with_observer(train_set, holdout, config, |_| {})
}

/// Picks `γ_E` from the loss magnitudes of one NLL-only epoch run from the
/// same initialization. Returns `(γ_E, nll, soft_ece)`.
pub fn measure_gamma(train_set: &Dataset, config: &TrainConfig) -> Result<(f64, f64, f64)> {
    if train_set.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let warm = TrainConfig {
        epochs: 1,
        mode: TrainMode::VanillaNll,
        loss: LossConfig {
            total_epochs: 1,
            s_e: 0,
            ..config.loss.clone()
        },
        ..config.clone()
    };
    warm.validate()?;
    let (_, history) = run_epochs(train_set, &warm, |_| {})?;
    let first = &history[0];
    Ok((
        auto_gamma(first.nll, first.soft_ece)?,
        first.nll,
        first.soft_ece,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;
    use crate::loss::IndicatorVariant;

    fn config(mode: TrainMode, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 16,
            learning_rate: 0.05,
            seed: 11,
            loss: LossConfig {
                gamma_e: 0.5,
                total_epochs: epochs,
                ..LossConfig::default()
            },
            mode,
            hidden_dim: 0,
        }
    }

    #[test]
    fn vanilla_never_weights_the_ece_term() {
        let data = gen_synthetic(3, 20, 3, 1.0, 1).unwrap();
        let (_, report) = train(&data, &data, &config(TrainMode::VanillaNll, 6)).unwrap();
        assert_eq!(report.epochs.len(), 6);
        assert!(report
            .epochs
            .iter()
            .all(|e| e.ece_weight == 0.0 && e.total == e.nll));
    }

    #[test]
    fn curriculum_weight_strictly_increases() {
        let data = gen_synthetic(3, 20, 3, 1.0, 1).unwrap();
        let (_, report) = train(&data, &data, &config(TrainMode::CalibratedCurriculum, 8)).unwrap();
        assert_eq!(report.epochs[0].ece_weight, 0.0);
        for pair in report.epochs.windows(2) {
            assert!(pair[1].ece_weight > pair[0].ece_weight);
        }
        let last = report.epochs.last().unwrap().ece_weight;
        assert!(0.5 - last <= 0.5 / 8.0 + 1e-15);
    }

    #[test]
    fn fixed_mode_uses_gamma_every_epoch() {
        let data = gen_synthetic(3, 20, 3, 1.0, 1).unwrap();
        let (_, report) = train(&data, &data, &config(TrainMode::CalibratedFixed, 4)).unwrap();
        assert!(report.epochs.iter().all(|e| e.ece_weight == 0.5));
        for e in &report.epochs {
            assert!((e.total - (e.nll + e.ece_weight * e.soft_ece)).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = gen_synthetic(4, 25, 5, 1.5, 3).unwrap();
        let mut cfg = config(TrainMode::CalibratedCurriculum, 5);
        cfg.hidden_dim = 6;
        cfg.loss.indicator_variant = IndicatorVariant::TrueClassProb;
        let a = train(&data, &data, &cfg).unwrap();
        let b = train(&data, &data, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn separable_blobs_are_learned() {
        let data = gen_synthetic(3, 40, 3, 0.3, 5).unwrap();
        let mut cfg = config(TrainMode::VanillaNll, 30);
        cfg.learning_rate = 0.5;
        let (params, _) = train(&data, &data, &cfg).unwrap();
        let eval = evaluate(&params, &data, 15).unwrap();
        assert!(eval.report.accuracy > 0.95, "{}", eval.report.accuracy);
    }

    #[test]
    fn zero_model_evaluates_to_uniform_confidence() {
        let data = gen_synthetic(4, 10, 3, 1.0, 2).unwrap();
        let p = init_model(3, 0, 4, 0).unwrap();
        let zero = p.with_flat(&alloc::vec![0.0; p.num_params()]).unwrap();
        let eval = evaluate(&zero, &data, 15).unwrap();
        assert!(eval.records.iter().all(|r| r.confidence() == 0.25));
        let occupied: Vec<_> = eval.table.bins().iter().filter(|b| b.count > 0).collect();
        assert_eq!(occupied.len(), 1);
        assert_eq!(eval.ece, ece(&eval.table).unwrap());
    }

    #[test]
    fn mismatched_or_empty_splits_fail() {
        let a = gen_synthetic(3, 5, 3, 1.0, 1).unwrap();
        let b = gen_synthetic(3, 5, 4, 1.0, 1).unwrap();
        let cfg = config(TrainMode::VanillaNll, 2);
        assert!(matches!(
            train(&a, &b, &cfg),
            Err(Error::DimensionMismatch(_))
        ));
        let empty = a.subset(&[]);
        assert_eq!(
            train(&empty, &a, &cfg).unwrap_err(),
            Error::Empty("training split")
        );
        assert!(evaluate(&init_model(3, 0, 3, 0).unwrap(), &empty, 15).is_err());
    }

    #[test]
    fn config_must_agree_on_epochs() {
        let mut cfg = config(TrainMode::VanillaNll, 5);
        cfg.loss.total_epochs = 6;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn measured_gamma_balances_the_first_epoch() {
        let data = gen_synthetic(4, 30, 4, 1.5, 9).unwrap();
        let cfg = config(TrainMode::CalibratedCurriculum, 10);
        let (gamma, nll, soft) = measure_gamma(&data, &cfg).unwrap();
        assert!(gamma > 0.0);
        assert!((gamma * soft - nll).abs() < 1e-12);
    }
}

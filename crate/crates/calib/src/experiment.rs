//! Training runs and the three-arm protocol: a vanilla NLL baseline, the
//! curriculum-weighted calibrated model, and a constant-weight control, all
//! on one dataset with one seed and one ECE weight.
//!
//! A run directory holds:
//!
//! | file | contents |
//! |---|---|
//! | `run.json` | [`RunManifest`] |
//! | `report.json` | [`RunReport`]: per-epoch losses, validation and test metrics |
//! | `predictions.jsonl` | test-split predictions |
//! | `reliability.svg` | test-split reliability diagram |
//! | `model.json` | trained parameters |
//! | `timing.json` | wall-clock seconds per epoch (the only non-reproducible file) |

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use calib_core::{
    evaluate, gen_synthetic, measure_gamma, split, train_with_observer, ClassificationReport,
    Dataset, ModelParams, PredictionRecord, ReliabilityTable, TrainMode, TrainReport,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{save_predictions, PredictionFormat};
use crate::manifest::{
    read_json, write_json, GammaSource, RunKind, RunManifest, TrainSpec, MANIFEST_FILE,
};
use crate::report::{comparison_table, render_reliability_svg, ComparisonEntry, DiagramStyle};

pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const DIAGRAM_FILE: &str = "reliability.svg";
pub const MODEL_FILE: &str = "model.json";
pub const TIMING_FILE: &str = "timing.json";
pub const COMPARISON_FILE: &str = "comparison.md";

/// How the ECE weight should be chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub report: ClassificationReport,
    pub ece: f64,
    pub table: ReliabilityTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Training history and validation-split metrics.
    pub training: TrainReport,
    pub test: TestMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub epoch_seconds: Vec<f64>,
    pub total_seconds: f64,
}

/// Everything a run produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub params: ModelParams,
    pub report: RunReport,
    pub predictions: Vec<PredictionRecord>,
    pub timing: Timing,
}

/// Generates the synthetic dataset and splits it into train, validation and
/// test.
pub fn prepare_data(spec: &TrainSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let d = &spec.data;
    let data = gen_synthetic(d.classes, d.per_class, d.dim, d.overlap, d.seed)?;
    Ok(split(&data, &spec.split)?)
}

/// Resolves the ECE weight. `Auto` measures one NLL-only epoch on the
/// training split from the run's own initialization.
pub fn resolve_gamma(
    choice: GammaChoice,
    spec: &TrainSpec,
    train_set: &Dataset,
) -> Result<GammaSource> {
    match choice {
        GammaChoice::Value(value) => Ok(GammaSource::Explicit { value }),
        GammaChoice::Auto => {
            let (value, nll, soft_ece) = measure_gamma(train_set, &spec.train)?;
            Ok(GammaSource::Auto {
                nll,
                soft_ece,
                value,
            })
        }
    }
}

/// Sets the ECE weight in both the source record and the loss config.
pub fn with_gamma(mut spec: TrainSpec, gamma: GammaSource) -> TrainSpec {
    spec.train.loss.gamma_e = gamma.value();
    spec.gamma = gamma;
    spec
}

/// Trains and evaluates one run entirely in memory.
pub fn run(spec: &TrainSpec, seed: u64) -> Result<RunOutcome> {
    if spec.train.loss.gamma_e != spec.gamma.value() {
        return Err(calib_core::Error::InvalidConfig(format!(
            "gamma_e {} disagrees with the recorded gamma {}",
            spec.train.loss.gamma_e,
            spec.gamma.value()
        ))
        .into());
    }
    let (train_set, val_set, test_set) = prepare_data(spec)?;
    let start = Instant::now();
    let mut last = start;
    let mut epoch_seconds = Vec::with_capacity(spec.train.epochs);
    let (params, training) = train_with_observer(&train_set, &val_set, &spec.train, |_| {
        let now = Instant::now();
        epoch_seconds.push((now - last).as_secs_f64());
        last = now;
    })?;
    let total_seconds = start.elapsed().as_secs_f64();
    let eval = evaluate(&params, &test_set, spec.eval_bins)?;
    Ok(RunOutcome {
        manifest: RunManifest::new(seed, RunKind::Train(spec.clone())),
        params,
        report: RunReport {
            training,
            test: TestMetrics {
                report: eval.report,
                ece: eval.ece,
                table: eval.table,
            },
        },
        predictions: eval.records,
        timing: Timing {
            epoch_seconds,
            total_seconds,
        },
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes every file of a run directory.
pub fn write_run(outcome: &RunOutcome, dir: impl AsRef<Path>, style: &DiagramStyle) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    outcome.manifest.save(dir.join(MANIFEST_FILE))?;
    write_json(&outcome.report, dir.join(REPORT_FILE))?;
    write_json(&outcome.params, dir.join(MODEL_FILE))?;
    write_json(&outcome.timing, dir.join(TIMING_FILE))?;
    save_predictions(
        &outcome.predictions,
        dir.join(PREDICTIONS_FILE),
        PredictionFormat::Jsonl,
    )?;
    render_reliability_svg(&outcome.report.test.table, style, dir.join(DIAGRAM_FILE))
}

/// Reads a run directory back as a comparison row named after the directory.
pub fn load_comparison_entry(dir: impl AsRef<Path>) -> Result<ComparisonEntry> {
    let dir = dir.as_ref();
    let report: RunReport = read_json(dir.join(REPORT_FILE))?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(ComparisonEntry::new(
        name,
        report.test.report,
        report.test.ece,
    ))
}

pub const ARMS: [(&str, TrainMode); 3] = [
    ("vanilla", TrainMode::VanillaNll),
    ("curriculum", TrainMode::CalibratedCurriculum),
    ("fixed", TrainMode::CalibratedFixed),
];

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub gamma: GammaSource,
    /// In [`ARMS`] order.
    pub arms: Vec<(String, RunOutcome)>,
    pub table: String,
}

/// Runs the three arms in memory. They share data, split, seed and ECE
/// weight and differ only in mode.
pub fn run_experiment(
    base: &TrainSpec,
    gamma: GammaChoice,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let (train_set, _, _) = prepare_data(base)?;
    let gamma = resolve_gamma(gamma, base, &train_set)?;
    let mut arms = Vec::with_capacity(ARMS.len());
    let mut entries = Vec::with_capacity(ARMS.len());
    for (name, mode) in ARMS {
        let mut spec = with_gamma(base.clone(), gamma);
        spec.train.mode = mode;
        let outcome = run(&spec, seed)?;
        entries.push(ComparisonEntry::new(
            name,
            outcome.report.test.report.clone(),
            outcome.report.test.ece,
        ));
        arms.push((name.to_string(), outcome));
    }
    Ok(ExperimentOutcome {
        gamma,
        arms,
        table: comparison_table(&entries)?,
    })
}

/// Writes `out/<arm>/...` for each arm and `out/comparison.md`. Returns
/// the arm directories.
pub fn write_experiment(
    outcome: &ExperimentOutcome,
    out: impl AsRef<Path>,
    style: &DiagramStyle,
) -> Result<Vec<PathBuf>> {
    let out = out.as_ref();
    create_dir(out)?;
    let mut dirs = Vec::new();
    for (name, arm) in &outcome.arms {
        let dir = out.join(name);
        write_run(arm, &dir, style)?;
        dirs.push(dir);
    }
    let path = out.join(COMPARISON_FILE);
    fs::write(&path, &outcome.table).map_err(|e| Error::io(&path, e))?;
    Ok(dirs)
}

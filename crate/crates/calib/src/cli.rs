//! Argument parsing and subcommand dispatch for the `calib` binary.
//!
//! Exit codes: 0 on success (including `--help`), 1 when a command fails,
//! 2 on a usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use calib_core::{
    build_reliability_table, classification_report, ece, IndicatorVariant, SplitSpec, TrainMode,
    EVAL_BINS,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiment::{
    load_comparison_entry, prepare_data, resolve_gamma, run, run_experiment, with_gamma,
    write_experiment, write_run, GammaChoice,
};
use crate::io::{load_predictions, PredictionFormat};
use crate::manifest::{DataArgs, EvalSpec, RunKind, RunManifest, TrainSpec};
use crate::report::{comparison_table, render_reliability_svg, DiagramStyle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "calib",
    version,
    about = "Train and evaluate calibrated classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model on synthetic data.
    Train(TrainArgs),
    /// Score a prediction log: ECE, accuracy and an optional diagram.
    Eval(EvalArgs),
    /// Render a markdown comparison table from run directories.
    Compare(CompareArgs),
    /// Draw the reliability diagram of a prediction log.
    Diagram(DiagramArgs),
    /// Train the vanilla, curriculum and fixed-weight arms and compare them.
    Experiment(ExperimentArgs),
    /// Re-run a training manifest into a new directory.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataSource {
    Synth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Vanilla,
    Curriculum,
    Fixed,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Vanilla => TrainMode::VanillaNll,
            ModeArg::Curriculum => TrainMode::CalibratedCurriculum,
            ModeArg::Fixed => TrainMode::CalibratedFixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    MaxProb,
    TrueClass,
}

impl From<VariantArg> for IndicatorVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::MaxProb => IndicatorVariant::MaxProb,
            VariantArg::TrueClass => IndicatorVariant::TrueClassProb,
        }
    }
}

fn parse_gamma(s: &str) -> std::result::Result<GammaChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(GammaChoice::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(GammaChoice::Value(v)),
        _ => Err(format!(
            "expected `auto` or a non-negative number, got `{s}`"
        )),
    }
}

fn parse_ratios(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split([',', ':']).collect();
    let values: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("`{s}`: {e}"))?;
    let [a, b, c] = values[..] else {
        return Err(format!("expected three ratios like 7:2:1, got `{s}`"));
    };
    let sum = a + b + c;
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(format!("ratios `{s}` must have a positive sum"));
    }
    Ok([a / sum, b / sum, c / sum])
}

/// Options shared by `train` and `experiment`.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, value_enum, default_value = "synth")]
    pub data: DataSource,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long = "per-class", default_value_t = 500)]
    pub per_class: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.5)]
    pub overlap: f64,
    /// ECE weight: `auto` or a number.
    #[arg(long, default_value = "auto", value_parser = parse_gamma)]
    pub gamma: GammaChoice,
    /// First epoch with a non-zero ECE weight.
    #[arg(long = "se", default_value_t = 0)]
    pub s_e: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long = "batch-size", default_value_t = 32)]
    pub batch_size: usize,
    /// Hidden units; 0 trains a linear model.
    #[arg(long, default_value_t = 0)]
    pub hidden: usize,
    #[arg(long = "train-bins", default_value_t = 10)]
    pub train_bins: usize,
    #[arg(long = "eval-bins", default_value_t = EVAL_BINS)]
    pub eval_bins: usize,
    #[arg(long, value_enum, default_value = "max-prob")]
    pub variant: VariantArg,
    /// Train:validation:test ratios.
    #[arg(long, default_value = "7:2:1", value_parser = parse_ratios)]
    pub split: [f64; 3],
    #[arg(long, env = "CALIB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl TrainFlags {
    fn spec(&self, mode: TrainMode) -> TrainSpec {
        let mut spec = TrainSpec {
            data: DataArgs {
                classes: self.classes,
                per_class: self.per_class,
                dim: self.dim,
                overlap: self.overlap,
                seed: self.seed,
            },
            split: SplitSpec {
                train: self.split[0],
                val: self.split[1],
                test: self.split[2],
                seed: self.seed,
            },
            eval_bins: self.eval_bins,
            ..TrainSpec::default()
        };
        let t = &mut spec.train;
        t.epochs = self.epochs;
        t.batch_size = self.batch_size;
        t.learning_rate = self.lr;
        t.seed = self.seed;
        t.mode = mode;
        t.hidden_dim = self.hidden;
        t.loss.s_e = self.s_e;
        t.loss.total_epochs = self.epochs;
        t.loss.m_train = self.train_bins;
        t.loss.indicator_variant = self.variant.into();
        spec
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "curriculum")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Defaults to the file extension (`.csv` or JSONL).
    #[arg(long)]
    pub format: Option<PredictionFormat>,
    #[arg(long, default_value_t = EVAL_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub diagram: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagramArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub format: Option<PredictionFormat>,
    #[arg(long, default_value_t = EVAL_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Manifest path written beside a standalone file: `x.svg` → `x.run.json`.
pub fn sidecar_manifest_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    let mut name = stem;
    name.push(".run.json");
    output.with_file_name(name)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_train(args: &TrainArgs) -> Result<String> {
    let f = &args.flags;
    let spec = f.spec(args.mode.into());
    let (train_set, _, _) = prepare_data(&spec)?;
    let gamma = resolve_gamma(f.gamma, &spec, &train_set)?;
    let spec = with_gamma(spec, gamma);
    let outcome = run(&spec, f.seed)?;
    write_run(&outcome, &f.out, &DiagramStyle::default())?;
    let test = &outcome.report.test;
    Ok(format!(
        "gamma_e: {:.6}\ntest accuracy: {:.4}\ntest ECE: {:.5}\nwrote {}\n",
        gamma.value(),
        test.report.accuracy,
        test.ece,
        f.out.display()
    ))
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<String> {
    let f = &args.flags;
    let base = f.spec(TrainMode::VanillaNll);
    let outcome = run_experiment(&base, f.gamma, f.seed)?;
    write_experiment(&outcome, &f.out, &DiagramStyle::default())?;
    Ok(format!(
        "gamma_e: {:.6}\n\n{}",
        outcome.gamma.value(),
        outcome.table
    ))
}

fn load_records(
    path: &Path,
    format: Option<PredictionFormat>,
) -> Result<(PredictionFormat, Vec<calib_core::PredictionRecord>)> {
    let format = format.unwrap_or_else(|| PredictionFormat::from_path(path));
    let records = load_predictions(path, format)?;
    if records.is_empty() {
        return Err(Error::Empty("evaluate: prediction log has no rows"));
    }
    Ok((format, records))
}

fn cmd_eval(args: &EvalArgs) -> Result<String> {
    let (format, records) = load_records(&args.predictions, args.format)?;
    let table = build_reliability_table(&records, args.bins)?;
    let value = ece(&table)?;
    let report = classification_report(&records, records[0].num_classes())?;
    if let Some(svg) = &args.diagram {
        render_reliability_svg(&table, &DiagramStyle::default(), svg)?;
        let manifest = RunManifest::new(
            0,
            RunKind::Eval(EvalSpec {
                predictions: args.predictions.clone(),
                format,
                bins: args.bins,
                diagram: Some(svg.clone()),
            }),
        );
        manifest.save(sidecar_manifest_path(svg))?;
    }
    Ok(format!(
        "samples: {}\nbins: {}\naccuracy: {:.4}\nECE: {value:.5}\n",
        records.len(),
        args.bins,
        report.accuracy
    ))
}

fn cmd_diagram(args: &DiagramArgs) -> Result<String> {
    let (format, records) = load_records(&args.predictions, args.format)?;
    let table = build_reliability_table(&records, args.bins)?;
    let style = DiagramStyle {
        title: args.title.clone(),
        ..DiagramStyle::default()
    };
    render_reliability_svg(&table, &style, &args.out)?;
    let manifest = RunManifest::new(
        0,
        RunKind::Eval(EvalSpec {
            predictions: args.predictions.clone(),
            format,
            bins: args.bins,
            diagram: Some(args.out.clone()),
        }),
    );
    manifest.save(sidecar_manifest_path(&args.out))?;
    Ok(format!("wrote {}\n", args.out.display()))
}

fn cmd_compare(args: &CompareArgs) -> Result<String> {
    let entries = args
        .runs
        .iter()
        .map(load_comparison_entry)
        .collect::<Result<Vec<_>>>()?;
    let table = comparison_table(&entries)?;
    if let Some(out) = &args.out {
        write_text(out, &table)?;
    }
    Ok(table)
}

fn cmd_replay(args: &ReplayArgs) -> Result<String> {
    let manifest = RunManifest::load(&args.manifest)?;
    match &manifest.run {
        RunKind::Train(spec) => {
            let outcome = run(spec, manifest.seed)?;
            write_run(&outcome, &args.out, &DiagramStyle::default())?;
            Ok(format!("wrote {}\n", args.out.display()))
        }
        RunKind::Eval(spec) => {
            let (_, records) = load_records(&spec.predictions, Some(spec.format))?;
            let table = build_reliability_table(&records, spec.bins)?;
            fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
            let svg = args.out.join(
                spec.diagram
                    .as_deref()
                    .and_then(Path::file_name)
                    .unwrap_or("reliability.svg".as_ref()),
            );
            render_reliability_svg(&table, &DiagramStyle::default(), &svg)?;
            Ok(format!(
                "ECE: {:.5}\nwrote {}\n",
                ece(&table)?,
                svg.display()
            ))
        }
    }
}

/// Executes a parsed command and returns what it prints on success.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Diagram(a) => cmd_diagram(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

/// Parses `argv` (program name first), runs the command, prints its output
/// and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

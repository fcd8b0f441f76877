//! The `cfnd` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{corpus_report, Normalization};
use crate::config::{Components, FusionStrategy, ModelConfig};
use crate::error::Error;
use crate::model::Detector;
use crate::store::{load_manifest, synthesize_dataset, temporal_split, validate_manifest, DatasetManifest, NewsVideoSample, SynthSpec, DEFAULT_RATIOS};
use crate::train::{
    ablation::{write_ablation_csv, write_fusion_csv},
    evaluate, run_ablation, run_fusion_bench, train, write_history_csv, write_json, Splits,
};

pub const EXIT_DATA: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const RESOLVED_CONFIG: &str = "resolved-config.json";
pub const CHECKPOINT_DIR: &str = "best";

#[derive(Debug, Parser)]
#[command(name = "cfnd", version, about = "Fake news short-video detection on precomputed features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-cue synthetic dataset
    Synth(SynthArgs),
    /// Check a manifest and its blobs
    Validate(ValidateArgs),
    /// Train a detector on the chronological train/validation split
    Train(TrainArgs),
    /// Score a checkpoint on one split of a dataset
    Eval(EvalArgs),
    /// Retrain with components toggled off
    Ablate(AblateArgs),
    /// Compare all late and early fusion strategies
    FuseBench(BenchArgs),
    /// Fake-vs-real corpus measurements
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator spec; unspecified fields take their defaults
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Dataset directory or manifest file
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Dataset directory or manifest file
    #[arg(long)]
    pub data: PathBuf,
    /// JSON model config; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub fusion: Option<FusionStrategy>,
    /// Comma-separated subset of SEN,SEM,SPA,TEM (or MSAM, MEAM)
    #[arg(long)]
    pub components: Option<Components>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint directory written by `train`
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitPart::Test)]
    pub split: SplitPart,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "softmax")]
    pub normalization: Normalization,
}

/// Usage problems exit with 2, data problems with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_exists(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    require_exists(path, what)?;
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid {what} {}: {e}", path.display())))
}

fn prepare_out(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| usage(format!("cannot create output directory {}: {e}", out.display())))
}

fn write_resolved(out: &Path, value: serde_json::Value) -> CliResult<()> {
    Ok(write_json(&value, out.join(RESOLVED_CONFIG))?)
}

impl ModelArgs {
    /// Config file, then flag overrides, then validation.
    pub fn resolve(&self) -> CliResult<ModelConfig> {
        let mut c: ModelConfig = match &self.config {
            Some(p) => read_json(p, "config")?,
            None => ModelConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.fusion {
            c.fusion = v;
        }
        if let Some(v) = self.components {
            c.components = v;
        }
        if let Some(v) = self.lr {
            c.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            c.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.patience {
            c.patience = Some(v);
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.dropout {
            c.dropout = v;
        }
        c.validate().map_err(|e| usage(e.to_string()))?;
        Ok(c)
    }
}

fn open_dataset(data: &Path) -> CliResult<DatasetManifest> {
    require_exists(data, "dataset")?;
    Ok(load_manifest(data)?)
}

struct LoadedSplits {
    train: Vec<NewsVideoSample>,
    val: Vec<NewsVideoSample>,
    test: Vec<NewsVideoSample>,
}

impl LoadedSplits {
    fn splits(&self) -> Splits<'_> {
        Splits {
            train: &self.train,
            val: &self.val,
            test: &self.test,
        }
    }
}

fn load_splits(manifest: &DatasetManifest) -> CliResult<LoadedSplits> {
    let (train, val, test) = temporal_split(manifest, DEFAULT_RATIOS)?;
    Ok(LoadedSplits {
        train: train.load_samples()?,
        val: val.load_samples()?,
        test: test.load_samples()?,
    })
}

fn split_json() -> serde_json::Value {
    json!({"kind": "temporal", "train": DEFAULT_RATIOS.0, "val": DEFAULT_RATIOS.1, "test": DEFAULT_RATIOS.2})
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let spec: SynthSpec = read_json(&a.spec, "spec")?;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    prepare_out(&a.out)?;
    let manifest = synthesize_dataset(&spec, a.seed, &a.out)?;
    write_resolved(&a.out, json!({"command": "synth", "seed": a.seed, "spec": spec}))?;
    let fake = manifest.records.iter().filter(|r| r.label == crate::store::Label::Fake).count();
    println!(
        "wrote {} samples ({} fake, {} real) to {}",
        manifest.len(),
        fake,
        manifest.len() - fake,
        a.out.display()
    );
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> CliResult<()> {
    require_exists(&a.data, "dataset")?;
    let problems = validate_manifest(&a.data)?;
    if let Some(out) = &a.out {
        prepare_out(out)?;
        let list: Vec<String> = problems.iter().map(|e| e.to_string()).collect();
        write_json(&json!({"problems": list}), out.join("validation.json"))?;
        write_resolved(out, json!({"command": "validate", "data": a.data}))?;
    }
    if problems.is_empty() {
        println!("ok: {}", a.data.display());
        return Ok(());
    }
    for p in &problems {
        println!("{p}");
    }
    Err(CliError::Data(Error::InvalidArgument(format!("{} problem(s) found", problems.len()))))
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let config = a.model.resolve()?;
    let manifest = open_dataset(&a.model.data)?;
    prepare_out(&a.model.out)?;
    let s = load_splits(&manifest)?;
    let out_dir = &a.model.out;
    write_resolved(
        out_dir,
        json!({"command": "train", "data": a.model.data, "split": split_json(), "config": config}),
    )?;
    let outcome = train(config, manifest.dims.clone(), &s.train, &s.val)?;
    outcome.model.save(out_dir.join(CHECKPOINT_DIR))?;
    write_history_csv(&outcome.history, out_dir.join("history.csv"))?;
    write_json(
        &json!({
            "fusion": outcome.model.config.fusion,
            "components": outcome.model.config.components,
            "best_epoch": outcome.best_epoch,
            "best_val_macro_f1": outcome.best_val_macro_f1,
            "epochs_run": outcome.history.len(),
            "stopped_early": outcome.stopped_early,
            "parameters": outcome.model.param_count(),
        }),
        out_dir.join("train-summary.json"),
    )?;
    println!(
        "best epoch {} (val macro-F1 {:.4}); checkpoint in {}",
        outcome.best_epoch,
        outcome.best_val_macro_f1,
        out_dir.join(CHECKPOINT_DIR).display()
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    require_exists(&a.ckpt, "checkpoint")?;
    let model = Detector::load(&a.ckpt)?;
    let manifest = open_dataset(&a.data)?;
    prepare_out(&a.out)?;
    let samples = match a.split {
        SplitPart::All => manifest.load_samples()?,
        part => {
            let (train, val, test) = temporal_split(&manifest, DEFAULT_RATIOS)?;
            match part {
                SplitPart::Train => train,
                SplitPart::Val => val,
                _ => test,
            }
            .load_samples()?
        }
    };
    write_resolved(
        &a.out,
        json!({"command": "eval", "ckpt": a.ckpt, "data": a.data, "split": a.split, "config": model.config}),
    )?;
    let report = evaluate(&model, &samples)?;
    write_json(&report, a.out.join("eval-report.json"))?;
    println!(
        "n={} accuracy {:.4} macro-F1 {:.4} | fake P/R/F1 {:.4}/{:.4}/{:.4} | real P/R/F1 {:.4}/{:.4}/{:.4}",
        report.n,
        report.accuracy,
        report.macro_f1,
        report.fake.precision,
        report.fake.recall,
        report.fake.f1,
        report.real.precision,
        report.real.recall,
        report.real.f1
    );
    Ok(())
}

fn check_runs(runs: usize) -> CliResult<()> {
    if runs == 0 {
        Err(usage("--runs must be at least 1"))
    } else {
        Ok(())
    }
}

fn cmd_ablate(a: &AblateArgs) -> CliResult<()> {
    check_runs(a.runs)?;
    let config = a.model.resolve()?;
    let manifest = open_dataset(&a.model.data)?;
    prepare_out(&a.model.out)?;
    let s = load_splits(&manifest)?;
    let out = &a.model.out;
    write_resolved(
        out,
        json!({"command": "ablate", "data": a.model.data, "split": split_json(), "runs": a.runs, "config": config}),
    )?;
    let rows = run_ablation(&config, &manifest.dims, s.splits(), config.components, a.runs)?;
    write_ablation_csv(&rows, out.join("ablation.csv"))?;
    write_json(&rows, out.join("ablation.json"))?;
    println!("{:<16} {:>16} {:>16}", "components", "accuracy", "macro-F1");
    for r in &rows {
        let m = &r.summary;
        println!(
            "{:<16} {:>7.4} ± {:<6.4} {:>7.4} ± {:<6.4}",
            r.components.label(),
            m.acc_mean,
            m.acc_std,
            m.f1_mean,
            m.f1_std
        );
    }
    Ok(())
}

fn cmd_fuse_bench(a: &BenchArgs) -> CliResult<()> {
    check_runs(a.runs)?;
    let config = a.model.resolve()?;
    let manifest = open_dataset(&a.model.data)?;
    prepare_out(&a.model.out)?;
    let s = load_splits(&manifest)?;
    let out = &a.model.out;
    write_resolved(
        out,
        json!({"command": "fuse-bench", "data": a.model.data, "split": split_json(), "runs": a.runs, "config": config}),
    )?;
    let rows = run_fusion_bench(&config, &manifest.dims, s.splits(), a.runs)?;
    write_fusion_csv(&rows, out.join("fusion.csv"))?;
    write_json(&rows, out.join("fusion.json"))?;
    println!("{:<12} {:>16} {:>16}", "fusion", "accuracy", "macro-F1");
    for r in &rows {
        let m = &r.summary;
        println!(
            "{:<12} {:>7.4} ± {:<6.4} {:>7.4} ± {:<6.4}",
            r.fusion, m.acc_mean, m.acc_std, m.f1_mean, m.f1_std
        );
    }
    Ok(())
}

fn cmd_analyze(a: &AnalyzeArgs) -> CliResult<()> {
    let manifest = open_dataset(&a.data)?;
    prepare_out(&a.out)?;
    let samples = manifest.load_samples()?;
    write_resolved(
        &a.out,
        json!({"command": "analyze", "data": a.data, "normalization": a.normalization}),
    )?;
    let report = corpus_report(&samples, &manifest.dims.sentiment_classes, a.normalization)?;
    report.write(&a.out)?;
    for d in report.directions() {
        println!(
            "{:<10} {:<34} {} (p = {:.3e})",
            d.observation,
            d.expected,
            if d.holds { "holds" } else { "does not hold" },
            d.p_value
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::FuseBench(a) => cmd_fuse_bench(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun with --help for usage.");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

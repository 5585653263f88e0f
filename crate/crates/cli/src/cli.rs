//! Flag parsing and flag/config resolution.
//!
//! Every command accepts `--config <file>`; values resolve as
//! flag > config section > built-in default.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use probtsf_core::train::TrainConfig;

use crate::commands::{
    self, arch_name, parse_arch, DatasetKind, EvalSplit, EvaluateSpec, ForecastSpec, GenerateSpec,
    TrainSpec,
};
use crate::config::{FileConfig, Resolver};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "probtsf",
    version,
    about = "Probabilistic time-series forecasting with a dual network: \
             a state-space mean forecaster and a positive uncertainty head"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark dataset as a wide CSV.
    Generate(GenerateArgs),
    /// Train the dual network on a dataset CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint: calibration report, figure CSVs, SVGs.
    Evaluate(EvaluateArgs),
    /// Forecast one series from a dataset with a trained checkpoint.
    Forecast(ForecastArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Config file with a `[generate]` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset kind: sines | vdp | brownian.
    #[arg(long)]
    pub kind: Option<String>,
    /// Number of trajectories.
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per trajectory.
    #[arg(long)]
    pub len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path (default `<kind>.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Observation noise std (sines, vdp).
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Mean of the secondary-frequency distribution (sines).
    #[arg(long)]
    pub omega2_mean: Option<f64>,
    /// Mean of the damping-coefficient distribution (vdp).
    #[arg(long)]
    pub lambda_mean: Option<f64>,
    /// Integrator step (vdp); must divide 1 evenly.
    #[arg(long)]
    pub dt_int: Option<f64>,
    /// Use the positive-feedback oscillator form (diverges; comparison only).
    #[arg(long)]
    pub vdp_positive_feedback: bool,
    /// Start-point range (brownian).
    #[arg(long)]
    pub x0_min: Option<f64>,
    #[arg(long)]
    pub x0_max: Option<f64>,
    /// Increment std (brownian).
    #[arg(long)]
    pub increment_std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Config file with a `[train]` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV produced by `generate` (or matching its schema).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Lookback length.
    #[arg(long)]
    pub p: Option<usize>,
    /// Forecast horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Fraction of trajectories assigned to the train split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Seed of the train/test split shuffle (shared with evaluate).
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Output directory for checkpoint, history, and manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub joint_epochs: Option<usize>,
    /// Training seed (initialization and minibatch shuffling).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub adam_epsilon: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Uncertainty-head architecture: dense | ssm.
    #[arg(long)]
    pub arch: Option<String>,
    /// Per-window standardization (true|false).
    #[arg(long)]
    pub normalize: Option<bool>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Config file with an `[evaluate]` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Must match the value used at training time to recover the same split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Which windows to evaluate: test | train | all.
    #[arg(long)]
    pub split: Option<String>,
    /// Skip SVG rendering (figure CSVs are always written).
    #[arg(long)]
    pub no_svg: bool,
    /// Also compute the binned empirical KL estimate.
    #[arg(long)]
    pub binned_kl: bool,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Config file with a `[forecast]` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Series column to forecast (0-based).
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

pub fn resolve_generate(args: &GenerateArgs) -> Result<GenerateSpec, CliError> {
    let cfg = load_config(&args.config)?;
    let mut r = Resolver::new(&cfg, "generate");
    let kind: String = r.require("kind", args.kind.clone())?;
    let kind: DatasetKind = kind.parse().map_err(CliError::Validation)?;
    let d = GenerateSpec::defaults(kind);
    let spec = GenerateSpec {
        kind,
        n: r.get("n", args.n, d.n)?,
        len: r.get("len", args.len, d.len)?,
        seed: r.get("seed", args.seed, d.seed)?,
        out: r.get("out", args.out.clone(), d.out)?,
        noise_std: r.get("noise-std", args.noise_std, d.noise_std)?,
        omega2_mean: r.get("omega2-mean", args.omega2_mean, d.omega2_mean)?,
        lambda_mean: r.get("lambda-mean", args.lambda_mean, d.lambda_mean)?,
        dt_int: r.get("dt-int", args.dt_int, d.dt_int)?,
        vdp_positive_feedback: r.get(
            "vdp-positive-feedback",
            args.vdp_positive_feedback.then_some(true),
            d.vdp_positive_feedback,
        )?,
        x0_min: r.get("x0-min", args.x0_min, d.x0_min)?,
        x0_max: r.get("x0-max", args.x0_max, d.x0_max)?,
        increment_std: r.get("increment-std", args.increment_std, d.increment_std)?,
    };
    r.finish()?;
    Ok(spec)
}

pub fn resolve_train(args: &TrainArgs) -> Result<TrainSpec, CliError> {
    let cfg = load_config(&args.config)?;
    let mut r = Resolver::new(&cfg, "train");
    let dataset: PathBuf = r.require("dataset", args.dataset.clone())?;
    let out_dir: PathBuf = r.get("out-dir", args.out_dir.clone(), PathBuf::from("run"))?;
    let d = TrainConfig::default();
    let arch: Option<String> = r.get_opt("arch", args.arch.clone())?;
    let arch = match arch {
        Some(s) => parse_arch(&s).map_err(CliError::Validation)?,
        None => d.arch,
    };
    let spec = TrainSpec {
        dataset,
        p: r.get("p", args.p, 96)?,
        horizon: r.get("horizon", args.horizon, 96)?,
        train_fraction: r.get("train-fraction", args.train_fraction, 0.8)?,
        split_seed: r.get("split-seed", args.split_seed, 0)?,
        out_dir,
        train: TrainConfig {
            batch_size: r.get("batch-size", args.batch_size, d.batch_size)?,
            learning_rate: r.get("learning-rate", args.learning_rate, d.learning_rate)?,
            pretrain_epochs: r.get("pretrain-epochs", args.pretrain_epochs, d.pretrain_epochs)?,
            joint_epochs: r.get("joint-epochs", args.joint_epochs, d.joint_epochs)?,
            seed: r.get("seed", args.seed, d.seed)?,
            beta1: r.get("beta1", args.beta1, d.beta1)?,
            beta2: r.get("beta2", args.beta2, d.beta2)?,
            adam_epsilon: r.get("adam-epsilon", args.adam_epsilon, d.adam_epsilon)?,
            clip_norm: r.get("clip-norm", args.clip_norm, d.clip_norm)?,
            latent_dim: r.get("latent-dim", args.latent_dim, d.latent_dim)?,
            hidden_dim: r.get("hidden-dim", args.hidden_dim, d.hidden_dim)?,
            arch,
            normalize: r.get("normalize", args.normalize, d.normalize)?,
            fixed_unit_sigma: false,
        },
    };
    r.finish()?;
    Ok(spec)
}

pub fn resolve_evaluate(args: &EvaluateArgs) -> Result<EvaluateSpec, CliError> {
    let cfg = load_config(&args.config)?;
    let mut r = Resolver::new(&cfg, "evaluate");
    let split: String = r.get("split", args.split.clone(), "test".to_string())?;
    let spec = EvaluateSpec {
        checkpoint: r.require("checkpoint", args.checkpoint.clone())?,
        dataset: r.require("dataset", args.dataset.clone())?,
        train_fraction: r.get("train-fraction", args.train_fraction, 0.8)?,
        split_seed: r.get("split-seed", args.split_seed, 0)?,
        out_dir: r.get("out-dir", args.out_dir.clone(), PathBuf::from("eval"))?,
        split: split.parse::<EvalSplit>().map_err(CliError::Validation)?,
        svg: !r.get("no-svg", args.no_svg.then_some(true), false)?,
        binned_kl: r.get("binned-kl", args.binned_kl.then_some(true), false)?,
    };
    r.finish()?;
    Ok(spec)
}

pub fn resolve_forecast(args: &ForecastArgs) -> Result<ForecastSpec, CliError> {
    let cfg = load_config(&args.config)?;
    let mut r = Resolver::new(&cfg, "forecast");
    let spec = ForecastSpec {
        checkpoint: r.require("checkpoint", args.checkpoint.clone())?,
        dataset: r.require("dataset", args.dataset.clone())?,
        index: r.get("index", args.index, 0)?,
        out: r.get("out", args.out.clone(), PathBuf::from("forecast.csv"))?,
    };
    r.finish()?;
    Ok(spec)
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(args) => {
            let spec = resolve_generate(args)?;
            let written = commands::cmd_generate(&spec)?;
            eprintln!("generated {} ({} series, {} steps)", written[0].display(), spec.n, spec.len);
        }
        Command::Train(args) => {
            let spec = resolve_train(args)?;
            let written = commands::cmd_train(&spec)?;
            eprintln!(
                "trained ({} arch) -> {}",
                arch_name(spec.train.arch),
                written[0].display()
            );
        }
        Command::Evaluate(args) => {
            let spec = resolve_evaluate(args)?;
            let report = commands::cmd_evaluate(&spec)?;
            eprintln!(
                "evaluated {} windows: pooled KL {:.6}, pooled variance {:.4} -> {}",
                report.n_test,
                report.pooled_kl,
                report.pooled_variance,
                spec.out_dir.display()
            );
        }
        Command::Forecast(args) => {
            let spec = resolve_forecast(args)?;
            let written = commands::cmd_forecast(&spec)?;
            eprintln!("forecast written to {}", written[0].display());
        }
    }
    Ok(())
}

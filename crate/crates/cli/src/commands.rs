//! Implementations of the four commands, over fully resolved settings.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use probtsf_core::calib::{build_report, CalibrationReport, ForecastDistribution, ReportOptions};
use probtsf_core::checkpoint::{self, Checkpoint};
use probtsf_core::datagen::{
    gen_brownian, gen_sines, gen_vdp, window, BrownianConfig, SinesConfig, VdpConfig,
    WindowedDataset,
};
use probtsf_core::train::{train, TrainConfig, TrainError, TrainHistory, VarianceArch};

use crate::dataset_csv::{read_csv_dataset, write_csv_dataset};
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::report_files::write_report_files;
use crate::svg::{render_grid, std_normal_curve, Panel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Sines,
    Vdp,
    Brownian,
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Sines => "sines",
            DatasetKind::Vdp => "vdp",
            DatasetKind::Brownian => "brownian",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sines" => Ok(DatasetKind::Sines),
            "vdp" => Ok(DatasetKind::Vdp),
            "brownian" => Ok(DatasetKind::Brownian),
            other => Err(format!("unknown dataset kind {other:?} (sines|vdp|brownian)")),
        }
    }
}

/// Which windows a command evaluates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSplit {
    Test,
    Train,
    All,
}

impl FromStr for EvalSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "test" => Ok(EvalSplit::Test),
            "train" => Ok(EvalSplit::Train),
            "all" => Ok(EvalSplit::All),
            other => Err(format!("unknown split {other:?} (test|train|all)")),
        }
    }
}

pub fn parse_arch(s: &str) -> Result<VarianceArch, String> {
    match s {
        "dense" | "fully-connected" | "mlp" => Ok(VarianceArch::FullyConnected),
        "ssm" | "ssm-backed" => Ok(VarianceArch::SsmBacked),
        other => Err(format!("unknown variance architecture {other:?} (dense|ssm)")),
    }
}

pub fn arch_name(a: VarianceArch) -> &'static str {
    match a {
        VarianceArch::FullyConnected => "dense",
        VarianceArch::SsmBacked => "ssm",
    }
}

/// Resolved settings for `generate`.
#[derive(Debug, Clone)]
pub struct GenerateSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub len: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub noise_std: f64,
    pub omega2_mean: f64,
    pub lambda_mean: f64,
    pub dt_int: f64,
    pub vdp_positive_feedback: bool,
    pub x0_min: f64,
    pub x0_max: f64,
    pub increment_std: f64,
}

impl GenerateSpec {
    pub fn defaults(kind: DatasetKind) -> GenerateSpec {
        GenerateSpec {
            kind,
            n: 2500,
            len: 192,
            seed: 0,
            out: PathBuf::from(format!("{}.csv", kind.name())),
            noise_std: 1.0,
            omega2_mean: std::f64::consts::TAU / 12.0,
            lambda_mean: 5.0,
            dt_int: 0.05,
            vdp_positive_feedback: false,
            x0_min: 0.0,
            x0_max: 1.0,
            increment_std: 1.0,
        }
    }
}

pub fn cmd_generate(spec: &GenerateSpec) -> Result<Vec<PathBuf>, CliError> {
    let trajectories = match spec.kind {
        DatasetKind::Sines => gen_sines(
            spec.n,
            spec.len,
            spec.seed,
            &SinesConfig {
                omega2_mean: spec.omega2_mean,
                noise_std: spec.noise_std,
                ..SinesConfig::default()
            },
        )?,
        DatasetKind::Vdp => gen_vdp(
            spec.n,
            spec.len,
            spec.seed,
            &VdpConfig {
                lambda_mean: spec.lambda_mean,
                dt_int: spec.dt_int,
                noise_std: spec.noise_std,
                positive_feedback_form: spec.vdp_positive_feedback,
                ..VdpConfig::default()
            },
        )?,
        DatasetKind::Brownian => gen_brownian(
            spec.n,
            spec.len,
            spec.seed,
            &BrownianConfig {
                x0_min: spec.x0_min,
                x0_max: spec.x0_max,
                increment_std: spec.increment_std,
            },
        )?,
    };
    write_csv_dataset(&spec.out, &trajectories)?;

    let manifest_path = manifest_sibling(&spec.out);
    let mut m = Manifest::new("generate");
    m.setting("kind", spec.kind.name())
        .setting("n", spec.n)
        .setting("len", spec.len)
        .setting("seed", spec.seed);
    match spec.kind {
        DatasetKind::Sines => {
            m.setting("noise-std", spec.noise_std).setting("omega2-mean", spec.omega2_mean);
        }
        DatasetKind::Vdp => {
            m.setting("noise-std", spec.noise_std)
                .setting("lambda-mean", spec.lambda_mean)
                .setting("dt-int", spec.dt_int)
                .setting("vdp-positive-feedback", spec.vdp_positive_feedback);
        }
        DatasetKind::Brownian => {
            m.setting("x0-min", spec.x0_min)
                .setting("x0-max", spec.x0_max)
                .setting("increment-std", spec.increment_std);
        }
    }
    m.output(&spec.out);
    m.write(&manifest_path)?;
    Ok(vec![spec.out.clone(), manifest_path])
}

fn manifest_sibling(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Resolved settings for `train`.
#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub dataset: PathBuf,
    pub p: usize,
    pub horizon: usize,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
}

impl TrainSpec {
    pub fn defaults(dataset: PathBuf, out_dir: PathBuf) -> TrainSpec {
        TrainSpec {
            dataset,
            p: 96,
            horizon: 96,
            train_fraction: 0.8,
            split_seed: 0,
            out_dir,
            train: TrainConfig::default(),
        }
    }
}

pub fn cmd_train(spec: &TrainSpec) -> Result<Vec<PathBuf>, CliError> {
    let trajectories = read_csv_dataset(&spec.dataset)?;
    let (train_set, _test) = window(
        &trajectories,
        spec.p,
        spec.horizon,
        spec.train_fraction,
        spec.split_seed,
    )?;
    std::fs::create_dir_all(&spec.out_dir)?;

    let checkpoint_path = spec.out_dir.join("checkpoint.txt");
    let history_path = spec.out_dir.join("history.csv");
    let timing_path = spec.out_dir.join("timing.csv");

    let result = match train(&train_set, &spec.train) {
        Ok(r) => r,
        Err(TrainError::Invalid(e)) => return Err(CliError::validation(e.to_string())),
        Err(TrainError::Forward(e)) => return Err(CliError::runtime(e.to_string())),
        Err(e @ TrainError::Diverged { .. }) => {
            let msg = e.to_string();
            if let TrainError::Diverged { last_good, .. } = e {
                let ck = Checkpoint {
                    p: spec.p,
                    mean: last_good.mean,
                    sigma: last_good.sigma,
                    mean_pretrained: Some(last_good.mean_pretrained),
                };
                checkpoint::save_checkpoint(&checkpoint_path, &ck)?;
                write_history(&history_path, &last_good.history)?;
            }
            return Err(CliError::runtime(format!(
                "{msg}; last good checkpoint written to {}",
                checkpoint_path.display()
            )));
        }
    };

    let ck = Checkpoint {
        p: spec.p,
        mean: result.mean,
        sigma: result.sigma,
        mean_pretrained: Some(result.mean_pretrained),
    };
    checkpoint::save_checkpoint(&checkpoint_path, &ck)?;
    write_history(&history_path, &result.history)?;
    write_timing(&timing_path, &result.history, spec.train.pretrain_epochs)?;

    let manifest_path = spec.out_dir.join("manifest.json");
    let mut m = Manifest::new("train");
    m.setting("p", spec.p)
        .setting("horizon", spec.horizon)
        .setting("train-fraction", spec.train_fraction)
        .setting("split-seed", spec.split_seed)
        .setting("batch-size", spec.train.batch_size)
        .setting("learning-rate", spec.train.learning_rate)
        .setting("pretrain-epochs", spec.train.pretrain_epochs)
        .setting("joint-epochs", spec.train.joint_epochs)
        .setting("seed", spec.train.seed)
        .setting("beta1", spec.train.beta1)
        .setting("beta2", spec.train.beta2)
        .setting("adam-epsilon", spec.train.adam_epsilon)
        .setting("clip-norm", spec.train.clip_norm)
        .setting("latent-dim", spec.train.latent_dim)
        .setting("hidden-dim", spec.train.hidden_dim)
        .setting("arch", arch_name(spec.train.arch))
        .setting("normalize", spec.train.normalize)
        .setting("n-train", train_set.len());
    m.input(&spec.dataset);
    m.output(&checkpoint_path);
    m.output(&history_path);
    m.output(&timing_path);
    m.write(&manifest_path)?;

    Ok(vec![checkpoint_path, history_path, timing_path, manifest_path])
}

fn write_history(path: &Path, history: &TrainHistory) -> Result<(), CliError> {
    let mut out = String::from("phase,step,loss\n");
    for (i, l) in history.pretrain.iter().enumerate() {
        out.push_str(&format!("pretrain,{i},{l}\n"));
    }
    for (i, l) in history.joint.iter().enumerate() {
        out.push_str(&format!("joint,{i},{l}\n"));
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// Wall-clock per epoch. The one artifact that is not byte-reproducible
/// across reruns; everything else is.
fn write_timing(path: &Path, history: &TrainHistory, pretrain_epochs: usize) -> Result<(), CliError> {
    let mut out = String::from("phase,epoch,seconds\n");
    for (i, s) in history.epoch_seconds.iter().enumerate() {
        let (phase, epoch) = if i < pretrain_epochs {
            ("pretrain", i)
        } else {
            ("joint", i - pretrain_epochs)
        };
        out.push_str(&format!("{phase},{epoch},{s:.6}\n"));
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// Resolved settings for `evaluate`.
#[derive(Debug, Clone)]
pub struct EvaluateSpec {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub out_dir: PathBuf,
    pub split: EvalSplit,
    pub svg: bool,
    pub binned_kl: bool,
}

impl EvaluateSpec {
    pub fn defaults(checkpoint: PathBuf, dataset: PathBuf, out_dir: PathBuf) -> EvaluateSpec {
        EvaluateSpec {
            checkpoint,
            dataset,
            train_fraction: 0.8,
            split_seed: 0,
            out_dir,
            split: EvalSplit::Test,
            svg: true,
            binned_kl: false,
        }
    }
}

pub fn load_checkpoint_file(path: &Path) -> Result<Checkpoint, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read checkpoint {}: {e}", path.display())))?;
    checkpoint::decode(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

pub fn cmd_evaluate(spec: &EvaluateSpec) -> Result<CalibrationReport, CliError> {
    let ck = load_checkpoint_file(&spec.checkpoint)?;
    let trajectories = read_csv_dataset(&spec.dataset)?;
    let horizon = ck.mean.horizon;
    let eval_set = select_split(&trajectories, ck.p, horizon, spec)?;
    if eval_set.is_empty() {
        return Err(CliError::validation(format!(
            "selected split holds no trajectories (n = {}, train-fraction = {})",
            trajectories.len(),
            spec.train_fraction
        )));
    }
    if let Some(expected) = ck.sigma.input_len() {
        if expected != ck.p {
            return Err(CliError::validation(format!(
                "checkpoint is inconsistent: uncertainty head expects lookback {expected}, \
                 metadata says {}",
                ck.p
            )));
        }
    }

    let report = build_report(
        &ck.mean,
        &ck.sigma,
        ck.mean_pretrained.as_ref(),
        &eval_set,
        &ReportOptions { binned_kl: spec.binned_kl },
    )?;

    std::fs::create_dir_all(&spec.out_dir)?;
    let mut written = write_report_files(&spec.out_dir, &report)?;
    if spec.svg {
        written.extend(write_figures(&spec.out_dir, &report, &ck, &eval_set)?);
    }

    let manifest_path = spec.out_dir.join("manifest.json");
    let mut m = Manifest::new("evaluate");
    m.setting("train-fraction", spec.train_fraction)
        .setting("split-seed", spec.split_seed)
        .setting("split", format!("{:?}", spec.split).to_lowercase())
        .setting("svg", spec.svg)
        .setting("binned-kl", spec.binned_kl)
        .setting("p", ck.p)
        .setting("horizon", horizon)
        .setting("n-eval", eval_set.len());
    m.input(&spec.checkpoint);
    m.input(&spec.dataset);
    for w in &written {
        m.output(w);
    }
    m.write(&manifest_path)?;

    Ok(report)
}

fn select_split(
    trajectories: &[probtsf_core::Trajectory],
    p: usize,
    horizon: usize,
    spec: &EvaluateSpec,
) -> Result<WindowedDataset, CliError> {
    Ok(match spec.split {
        EvalSplit::All => {
            let (_, all) = window(trajectories, p, horizon, 0.0, spec.split_seed)?;
            all
        }
        EvalSplit::Test => {
            let (_, test) =
                window(trajectories, p, horizon, spec.train_fraction, spec.split_seed)?;
            test
        }
        EvalSplit::Train => {
            let (train, _) =
                window(trajectories, p, horizon, spec.train_fraction, spec.split_seed)?;
            train
        }
    })
}

fn write_figures(
    dir: &Path,
    report: &CalibrationReport,
    ck: &Checkpoint,
    eval_set: &WindowedDataset,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
        Ok(())
    };

    // sample trajectory with forecast band
    let lookback = eval_set.lookback(0);
    let future = eval_set.future(0);
    let ForecastDistribution { mu, sigma: sg } =
        ForecastDistribution::predict(&ck.mean, &ck.sigma, lookback)?;
    let p = lookback.len();
    let horizon = future.len();
    let xs_fore: Vec<f64> = (1..=horizon).map(|t| (p + t) as f64).collect();
    let observed: Vec<(f64, f64)> = lookback
        .iter()
        .chain(future)
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64, v))
        .collect();
    let lo2: Vec<f64> = mu.iter().zip(&sg).map(|(m, s)| m - 2.0 * s).collect();
    let hi2: Vec<f64> = mu.iter().zip(&sg).map(|(m, s)| m + 2.0 * s).collect();
    let lo1: Vec<f64> = mu.iter().zip(&sg).map(|(m, s)| m - s).collect();
    let hi1: Vec<f64> = mu.iter().zip(&sg).map(|(m, s)| m + s).collect();
    let y_min = observed.iter().map(|&(_, y)| y).chain(lo2.iter().copied()).fold(f64::INFINITY, f64::min);
    let y_max = observed.iter().map(|&(_, y)| y).chain(hi2.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    let mut panel = Panel::new("sample forecast", "t", "x")
        .ranges((1.0, (p + horizon) as f64), (y_min, y_max));
    panel.band(&xs_fore, &lo2, &hi2, "#ff7f0e", 0.2);
    panel.band(&xs_fore, &lo1, &hi1, "#ff7f0e", 0.35);
    panel.line(&observed, "#333333", 1.2, false);
    let mu_pts: Vec<(f64, f64)> = xs_fore.iter().zip(&mu).map(|(&x, &y)| (x, y)).collect();
    panel.line(&mu_pts, "#d62728", 1.6, false);
    emit("trajectory.svg", render_grid(&[panel], 1))?;

    // residual histograms with the standard normal overlay
    let labels = ["tau = 1", "tau = mid", "tau = T", "pooled"];
    let hists = [&report.hist_first, &report.hist_mid, &report.hist_last, &report.hist_pooled];
    let mut panels = Vec::new();
    for (label, h) in labels.iter().zip(hists) {
        let bins: Vec<(f64, f64, f64)> = h
            .counts
            .iter()
            .enumerate()
            .map(|(b, _)| {
                let left = h.lo + b as f64 * h.bin_width;
                (left, left + h.bin_width, h.density(b))
            })
            .collect();
        let peak = bins.iter().map(|&(_, _, d)| d).fold(0.45, f64::max);
        let mut panel = Panel::new(label, "z", "density").ranges((-5.0, 5.0), (0.0, peak * 1.1));
        panel.bars(&bins, "#1f77b4");
        panel.line(&std_normal_curve(-5.0, 5.0, 160), "#ff7f0e", 1.6, false);
        panels.push(panel);
    }
    emit("histograms.svg", render_grid(&panels, 4))?;

    // variance and KL per horizon step
    let taus: Vec<f64> = (1..=report.horizon).map(|t| t as f64).collect();
    let var_pts: Vec<(f64, f64)> =
        taus.iter().zip(&report.variance_per_tau).map(|(&x, &y)| (x, y)).collect();
    let v_hi = report.variance_per_tau.iter().fold(1.5f64, |a, &b| a.max(b));
    let mut var_panel = Panel::new("variance of z", "tau", "variance")
        .ranges((1.0, report.horizon as f64), (0.0, v_hi * 1.05));
    var_panel.line(&[(1.0, 1.0), (report.horizon as f64, 1.0)], "#888888", 1.0, true);
    var_panel.line(&var_pts, "#1f77b4", 1.6, false);
    let kl_pts: Vec<(f64, f64)> =
        taus.iter().zip(&report.kl_per_tau).map(|(&x, &y)| (x, y)).collect();
    let kl_hi = report.kl_per_tau.iter().fold(1e-3f64, |a, &b| a.max(b));
    let mut kl_panel = Panel::new("KL to standard normal", "tau", "KL")
        .ranges((1.0, report.horizon as f64), (0.0, kl_hi * 1.05));
    kl_panel.line(&kl_pts, "#1f77b4", 1.6, false);
    emit("variance_kl.svg", render_grid(&[var_panel, kl_panel], 2))?;

    // coverage curves against the ideal Gaussian levels
    let mut cov_panel = Panel::new("sigma-interval coverage", "tau", "fraction")
        .ranges((1.0, report.horizon as f64), (0.0, 1.02));
    let ideals = [0.6826894921370859, 0.9544997361036416, 0.9973002039367398];
    let colors = ["#1f77b4", "#2ca02c", "#d62728"];
    for ((curve, &ideal), color) in report.coverage.iter().zip(&ideals).zip(&colors) {
        cov_panel.line(
            &[(1.0, ideal), (report.horizon as f64, ideal)],
            color,
            1.0,
            true,
        );
        let pts: Vec<(f64, f64)> =
            taus.iter().zip(&curve.per_tau).map(|(&x, &y)| (x, y)).collect();
        cov_panel.line(&pts, color, 1.6, false);
    }
    emit("coverage.svg", render_grid(&[cov_panel], 1))?;

    // absolute error of the pretrained vs jointly trained mean
    if let Some(det) = report.mae_deterministic {
        let top = det.max(report.mae) * 1.2;
        let mut mae_panel =
            Panel::new("mean absolute error", "", "MAE").ranges((0.0, 2.0), (0.0, top));
        mae_panel.bars(&[(0.2, 0.9, det)], "#888888");
        mae_panel.bars(&[(1.1, 1.8, report.mae)], "#1f77b4");
        emit("mae.svg", render_grid(&[mae_panel], 1))?;
    }

    Ok(written)
}

/// Resolved settings for `forecast`.
#[derive(Debug, Clone)]
pub struct ForecastSpec {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub index: usize,
    pub out: PathBuf,
}

pub fn cmd_forecast(spec: &ForecastSpec) -> Result<Vec<PathBuf>, CliError> {
    let ck = load_checkpoint_file(&spec.checkpoint)?;
    let trajectories = read_csv_dataset(&spec.dataset)?;
    let series = trajectories.get(spec.index).ok_or_else(|| {
        CliError::validation(format!(
            "series index {} out of range (dataset has {})",
            spec.index,
            trajectories.len()
        ))
    })?;
    if series.values.len() < ck.p {
        return Err(CliError::validation(format!(
            "series {} has {} points, checkpoint needs a lookback of {}",
            spec.index,
            series.values.len(),
            ck.p
        )));
    }
    let lookback = &series.values[..ck.p];
    let forecast = ForecastDistribution::predict(&ck.mean, &ck.sigma, lookback)?;

    let mut out = String::from("tau,mu,sigma\n");
    for (i, (m, s)) in forecast.mu.iter().zip(&forecast.sigma).enumerate() {
        out.push_str(&format!("{},{m},{s}\n", i + 1));
    }
    std::fs::write(&spec.out, out)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", spec.out.display())))?;

    let manifest_path = manifest_sibling(&spec.out);
    let mut m = Manifest::new("forecast");
    m.setting("index", spec.index).setting("p", ck.p).setting("horizon", ck.mean.horizon);
    m.input(&spec.checkpoint);
    m.input(&spec.dataset);
    m.output(&spec.out);
    m.write(&manifest_path)?;
    Ok(vec![spec.out.clone(), manifest_path])
}

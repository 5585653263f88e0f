//! Calibration metrics over a held-out test set.
//!
//! The central object is the standardized residual `z = (x - mu) / sigma`:
//! under perfect Gaussian calibration it is standard normal at every horizon
//! step. This module computes the residual matrix, its per-step variance,
//! KL divergence against the standard normal (a moment-matched closed form
//! by default, a binned empirical estimate on request), sigma-interval
//! coverage, mean absolute error, and fixed-bin histogram panels.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::datagen::WindowedDataset;
use crate::error::CoreError;
use crate::ssm::SsmParams;
use crate::variance::VarianceParams;

/// Histogram bin range; residuals outside it count toward the total only.
pub const HIST_LO: f64 = -5.0;
pub const HIST_HI: f64 = 5.0;
/// Fixed bin width, giving 40 bins over the range.
pub const HIST_BIN_WIDTH: f64 = 0.25;

/// One trajectory's probabilistic forecast: the mean and standard deviation
/// at each horizon step (tau is the 1-based position).
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDistribution {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ForecastDistribution {
    /// Runs both networks on one lookback window.
    pub fn predict(
        mean: &SsmParams,
        sigma: &VarianceParams,
        lookback: &[f64],
    ) -> Result<ForecastDistribution, CoreError> {
        Ok(ForecastDistribution {
            mu: mean.forecast_mean(lookback)?,
            sigma: sigma.forward_sigma(lookback)?,
        })
    }

    pub fn horizon(&self) -> usize {
        self.mu.len()
    }
}

/// Standardized residuals, one row per test trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    n: usize,
    horizon: usize,
    z: Vec<f64>,
}

impl ResidualMatrix {
    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.horizon..(i + 1) * self.horizon]
    }

    /// All residuals pooled, row-major.
    pub fn pooled(&self) -> &[f64] {
        &self.z
    }

    /// Residuals of one horizon step (1-based) across trajectories.
    pub fn column(&self, tau: usize) -> Vec<f64> {
        assert!((1..=self.horizon).contains(&tau), "tau out of range");
        (0..self.n).map(|i| self.z[i * self.horizon + tau - 1]).collect()
    }
}

/// [`residuals`] over per-trajectory forecasts.
pub fn residuals_from_forecasts(
    forecasts: &[ForecastDistribution],
    futures: &[f64],
) -> Result<ResidualMatrix, CoreError> {
    let n = forecasts.len();
    let horizon = forecasts.first().map_or(0, ForecastDistribution::horizon);
    let mut mu = Vec::with_capacity(n * horizon);
    let mut sigma = Vec::with_capacity(n * horizon);
    for f in forecasts {
        if f.horizon() != horizon || f.sigma.len() != horizon {
            return Err(CoreError::ShapeMismatch {
                context: "residuals_from_forecasts",
                expected: horizon,
                got: f.horizon().min(f.sigma.len()),
            });
        }
        mu.extend_from_slice(&f.mu);
        sigma.extend_from_slice(&f.sigma);
    }
    residuals(&mu, &sigma, futures, n, horizon)
}

/// Elementwise `(x - mu) / sigma` over flat `n x horizon` slices.
pub fn residuals(
    mu: &[f64],
    sigma: &[f64],
    futures: &[f64],
    n: usize,
    horizon: usize,
) -> Result<ResidualMatrix, CoreError> {
    let expect = n * horizon;
    for len in [mu.len(), sigma.len(), futures.len()] {
        if len != expect {
            return Err(CoreError::ShapeMismatch { context: "residuals", expected: expect, got: len });
        }
    }
    if let Some((i, &s)) = sigma.iter().enumerate().find(|(_, &s)| s <= 0.0) {
        return Err(CoreError::NonPositiveSigma { index: i, value: s });
    }
    let z = mu
        .iter()
        .zip(sigma)
        .zip(futures)
        .map(|((m, s), x)| (x - m) / s)
        .collect();
    Ok(ResidualMatrix { n, horizon, z })
}

/// Population variance (divisor N) of each horizon step across trajectories.
pub fn variance_per_tau(z: &ResidualMatrix) -> Result<Vec<f64>, CoreError> {
    if z.n < 2 {
        return Err(CoreError::NotEnoughSamples {
            context: "variance_per_tau",
            needed: 2,
            got: z.n,
        });
    }
    let mut out = Vec::with_capacity(z.horizon);
    for tau in 1..=z.horizon {
        let col = z.column(tau);
        out.push(population_variance(&col).1);
    }
    Ok(out)
}

fn population_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// KL divergence from the sample's moment-matched Gaussian to the standard
/// normal: with sample mean `m` and population variance `v`,
/// `KL = (v + m^2 - 1 - ln v) / 2`.
///
/// Zero iff `(m, v) = (0, 1)`; a zero-variance sample reports infinity.
pub fn kl_to_standard_normal(samples: &[f64]) -> Result<f64, CoreError> {
    if samples.len() < 2 {
        return Err(CoreError::NotEnoughSamples {
            context: "kl_to_standard_normal",
            needed: 2,
            got: samples.len(),
        });
    }
    let (m, v) = population_variance(samples);
    if v == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(0.5 * (v + m * m - 1.0 - v.ln()))
}

/// Binned empirical KL divergence to the standard normal, using the fixed
/// histogram bins plus two open tail cells. Plug-in estimate; provided for
/// comparison with the closed form.
pub fn kl_to_standard_normal_binned(samples: &[f64]) -> Result<f64, CoreError> {
    if samples.len() < 2 {
        return Err(CoreError::NotEnoughSamples {
            context: "kl_to_standard_normal_binned",
            needed: 2,
            got: samples.len(),
        });
    }
    let n_bins = ((HIST_HI - HIST_LO) / HIST_BIN_WIDTH).round() as usize;
    let mut counts = vec![0u64; n_bins + 2]; // [low tail, bins..., high tail]
    for &x in samples {
        let cell = if x < HIST_LO {
            0
        } else if x >= HIST_HI {
            n_bins + 1
        } else {
            1 + ((x - HIST_LO) / HIST_BIN_WIDTH) as usize
        };
        counts[cell.min(n_bins + 1)] += 1;
    }
    let total = samples.len() as f64;
    let mut kl = 0.0;
    for (cell, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let p = c as f64 / total;
        let q = if cell == 0 {
            std_normal_cdf(HIST_LO)
        } else if cell == n_bins + 1 {
            1.0 - std_normal_cdf(HIST_HI)
        } else {
            let left = HIST_LO + (cell - 1) as f64 * HIST_BIN_WIDTH;
            std_normal_cdf(left + HIST_BIN_WIDTH) - std_normal_cdf(left)
        };
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

/// Fraction of points with `|x - mu| <= k sigma`, overall and per horizon
/// step.
pub fn coverage(
    mu: &[f64],
    sigma: &[f64],
    futures: &[f64],
    n: usize,
    horizon: usize,
    k: f64,
) -> Result<(f64, Vec<f64>), CoreError> {
    let expect = n * horizon;
    if mu.len() != expect || sigma.len() != expect || futures.len() != expect {
        return Err(CoreError::ShapeMismatch {
            context: "coverage",
            expected: expect,
            got: mu.len(),
        });
    }
    let mut per_tau = vec![0.0; horizon];
    let mut hits = 0usize;
    for i in 0..n {
        for (j, slot) in per_tau.iter_mut().enumerate() {
            let at = i * horizon + j;
            if (futures[at] - mu[at]).abs() <= k * sigma[at] {
                *slot += 1.0;
                hits += 1;
            }
        }
    }
    for v in per_tau.iter_mut() {
        *v /= n as f64;
    }
    Ok((hits as f64 / expect as f64, per_tau))
}

/// Mean absolute error over all points.
pub fn mae(mu: &[f64], futures: &[f64]) -> f64 {
    assert_eq!(mu.len(), futures.len(), "mae shape mismatch");
    mu.iter().zip(futures).map(|(m, x)| (x - m).abs()).sum::<f64>() / mu.len() as f64
}

/// Fixed-bin histogram of residuals over [-5, 5] with width 0.25.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Total samples including those outside the binned range.
    pub total: u64,
}

impl Histogram {
    pub fn of(samples: &[f64]) -> Histogram {
        let n_bins = ((HIST_HI - HIST_LO) / HIST_BIN_WIDTH).round() as usize;
        let mut counts = vec![0u64; n_bins];
        for &x in samples {
            if (HIST_LO..HIST_HI).contains(&x) {
                let bin = ((x - HIST_LO) / HIST_BIN_WIDTH) as usize;
                counts[bin.min(n_bins - 1)] += 1;
            }
        }
        Histogram { lo: HIST_LO, bin_width: HIST_BIN_WIDTH, counts, total: samples.len() as u64 }
    }

    /// Normalized density of one bin (count / (total * width)).
    pub fn density(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / (self.total as f64 * self.bin_width)
    }
}

/// Coverage of one sigma multiple.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    pub k: f64,
    pub overall: f64,
    pub per_tau: Vec<f64>,
}

/// Everything the evaluation protocol reports for one model/test-set pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub n_test: usize,
    pub horizon: usize,
    pub variance_per_tau: Vec<f64>,
    pub kl_per_tau: Vec<f64>,
    pub pooled_mean: f64,
    pub pooled_variance: f64,
    pub pooled_kl: f64,
    /// Present when the binned estimator was requested.
    pub pooled_kl_binned: Option<f64>,
    pub coverage: Vec<CoverageCurve>,
    /// Mean absolute error of the jointly trained mean forecast.
    pub mae: f64,
    /// Mean absolute error of the pretrained (point-wise) forecast, when a
    /// pretrain snapshot was supplied.
    pub mae_deterministic: Option<f64>,
    /// Histogram horizon steps: 1, midpoint, horizon.
    pub hist_taus: [usize; 3],
    pub hist_first: Histogram,
    pub hist_mid: Histogram,
    pub hist_last: Histogram,
    pub hist_pooled: Histogram,
}

/// Options for [`build_report`].
#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Also compute the binned empirical KL estimate on the pooled residuals.
    pub binned_kl: bool,
}

/// Runs the dual network on every test lookback and assembles all metrics.
pub fn build_report(
    mean: &SsmParams,
    sigma: &VarianceParams,
    mean_pretrained: Option<&SsmParams>,
    test: &WindowedDataset,
    opts: &ReportOptions,
) -> Result<CalibrationReport, CoreError> {
    if test.is_empty() {
        return Err(CoreError::InvalidArgument {
            context: "build_report",
            detail: alloc::string::String::from("test set is empty"),
        });
    }
    let n = test.len();
    let horizon = test.horizon();
    let mut mu = Vec::with_capacity(n * horizon);
    let mut sg = Vec::with_capacity(n * horizon);
    let mut mu_det = mean_pretrained.map(|_| Vec::with_capacity(n * horizon));
    for i in 0..n {
        let lookback = test.lookback(i);
        mu.extend_from_slice(&mean.forecast_mean(lookback)?);
        sg.extend_from_slice(&sigma.forward_sigma(lookback)?);
        if let (Some(buf), Some(det)) = (mu_det.as_mut(), mean_pretrained) {
            buf.extend_from_slice(&det.forecast_mean(lookback)?);
        }
    }
    build_report_from_forecasts(&mu, &sg, mu_det.as_deref(), test.futures_flat(), n, horizon, opts)
}

/// Same as [`build_report`], but over precomputed forecasts; used when the
/// (mu, sigma) pairs come from an analytic oracle instead of a model.
pub fn build_report_from_forecasts(
    mu: &[f64],
    sigma: &[f64],
    mu_deterministic: Option<&[f64]>,
    futures: &[f64],
    n: usize,
    horizon: usize,
    opts: &ReportOptions,
) -> Result<CalibrationReport, CoreError> {
    let z = residuals(mu, sigma, futures, n, horizon)?;
    let variance = variance_per_tau(&z)?;
    let mut kl_per_tau = Vec::with_capacity(horizon);
    for tau in 1..=horizon {
        kl_per_tau.push(kl_to_standard_normal(&z.column(tau))?);
    }
    let (pooled_mean, pooled_variance) = population_variance(z.pooled());
    let pooled_kl = kl_to_standard_normal(z.pooled())?;
    let pooled_kl_binned = if opts.binned_kl {
        Some(kl_to_standard_normal_binned(z.pooled())?)
    } else {
        None
    };

    let mut curves = Vec::new();
    for k in [1.0, 2.0, 3.0] {
        let (overall, per_tau) = coverage(mu, sigma, futures, n, horizon, k)?;
        curves.push(CoverageCurve { k, overall, per_tau });
    }

    let mid = (horizon / 2).max(1);
    Ok(CalibrationReport {
        n_test: n,
        horizon,
        variance_per_tau: variance,
        kl_per_tau,
        pooled_mean,
        pooled_variance,
        pooled_kl,
        pooled_kl_binned,
        coverage: curves,
        mae: mae(mu, futures),
        mae_deterministic: mu_deterministic.map(|d| mae(d, futures)),
        hist_taus: [1, mid, horizon],
        hist_first: Histogram::of(&z.column(1)),
        hist_mid: Histogram::of(&z.column(mid)),
        hist_last: Histogram::of(&z.column(horizon)),
        hist_pooled: Histogram::of(z.pooled()),
    })
}

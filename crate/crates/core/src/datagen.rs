//! Seeded generators for the synthetic benchmarks and dataset windowing.
//!
//! Three generators: a sum of two sines with per-trajectory phase and
//! frequency, a Van der Pol oscillator integrated with classical RK4, and a
//! pure random walk. Each trajectory draws from its own PCG-64 stream (see
//! [`crate::rng`]), so datasets are byte-identical across reruns and
//! independent of generation order.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::CoreError;
use crate::rng::{stream_rng, STREAM_SPLIT};

/// One realization of a generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: u32,
    pub values: Vec<f64>,
}

/// Which side of the train/test split a windowed dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Fixed-shape (lookback, future) pairs, one per trajectory.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    split: Split,
    p: usize,
    horizon: usize,
    ids: Vec<u32>,
    lookbacks: Vec<f64>,
    futures: Vec<f64>,
}

impl WindowedDataset {
    pub fn split(&self) -> Split {
        self.split
    }

    /// Lookback length P.
    pub fn lookback_len(&self) -> usize {
        self.p
    }

    /// Forecast horizon T.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of (lookback, future) pairs.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn lookback(&self, i: usize) -> &[f64] {
        &self.lookbacks[i * self.p..(i + 1) * self.p]
    }

    pub fn future(&self, i: usize) -> &[f64] {
        &self.futures[i * self.horizon..(i + 1) * self.horizon]
    }

    /// All futures as one flat `len x horizon` slice.
    pub fn futures_flat(&self) -> &[f64] {
        &self.futures
    }
}

/// Sum-of-sines generator settings.
///
/// Per trajectory, the phase of the primary sine is uniform on [0, 2pi) and
/// the secondary frequency is exponential with mean `omega2_mean`; the noise
/// is i.i.d. normal per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SinesConfig {
    /// Primary angular frequency, rad/step.
    pub omega1: f64,
    /// Mean of the exponential distribution of the secondary frequency.
    pub omega2_mean: f64,
    /// Standard deviation of the additive observation noise.
    pub noise_std: f64,
    /// Amplitude of the primary sine.
    pub amp_primary: f64,
    /// Amplitude of the secondary sine.
    pub amp_secondary: f64,
}

impl Default for SinesConfig {
    fn default() -> Self {
        SinesConfig {
            omega1: core::f64::consts::TAU / 24.0,
            omega2_mean: core::f64::consts::TAU / 12.0,
            noise_std: 1.0,
            amp_primary: 4.0,
            amp_secondary: 1.0,
        }
    }
}

/// Van der Pol oscillator settings.
///
/// The damping coefficient is exponential with mean `lambda_mean` per
/// trajectory (a mean of exactly 0 pins the damping to 0). The oscillator is
/// integrated with classical RK4 at step `dt_int`, sampled at integer times,
/// and observed with additive normal noise.
#[derive(Debug, Clone, PartialEq)]
pub struct VdpConfig {
    pub omega1: f64,
    pub lambda_mean: f64,
    pub y0: f64,
    pub v0: f64,
    /// Integrator step; must divide 1 evenly.
    pub dt_int: f64,
    pub noise_std: f64,
    /// Use the sign convention `y'' = w^2 (lambda (1 - y^2) y' + y)` instead
    /// of the self-excited form `y'' = w^2 lambda (1 - y^2) y' - w^2 y`.
    /// The former has positive feedback in y and diverges; it is kept only
    /// for side-by-side comparison.
    pub positive_feedback_form: bool,
}

impl Default for VdpConfig {
    fn default() -> Self {
        VdpConfig {
            omega1: core::f64::consts::TAU / 24.0,
            lambda_mean: 5.0,
            y0: 0.0,
            v0: 1.0,
            dt_int: 0.05,
            noise_std: 1.0,
            positive_feedback_form: false,
        }
    }
}

/// Random-walk generator settings: the start point is uniform on
/// `[x0_min, x0_max)` and increments are i.i.d. normal.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianConfig {
    pub x0_min: f64,
    pub x0_max: f64,
    pub increment_std: f64,
}

impl Default for BrownianConfig {
    fn default() -> Self {
        BrownianConfig { x0_min: 0.0, x0_max: 1.0, increment_std: 1.0 }
    }
}

fn check_gen_args(n_traj: usize, length: usize) -> Result<(), CoreError> {
    if n_traj < 1 {
        return Err(CoreError::InvalidArgument {
            context: "generate",
            detail: alloc::string::String::from("need at least one trajectory"),
        });
    }
    if length < 1 {
        return Err(CoreError::InvalidArgument {
            context: "generate",
            detail: alloc::string::String::from("trajectory length must be at least 1"),
        });
    }
    Ok(())
}

/// Draws from an exponential distribution with the given mean; a mean of 0
/// degenerates to the point mass at 0.
fn sample_exp<R: rand::Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean == 0.0 {
        0.0
    } else {
        Exp::new(1.0 / mean).expect("positive rate").sample(rng)
    }
}

/// Sum of two sines plus white noise, sampled at t = 1..=length.
///
/// Per-trajectory draw order: phase, secondary frequency, then one noise
/// value per time step.
pub fn gen_sines(
    n_traj: usize,
    length: usize,
    seed: u64,
    cfg: &SinesConfig,
) -> Result<Vec<Trajectory>, CoreError> {
    check_gen_args(n_traj, length)?;
    if cfg.noise_std < 0.0 || cfg.omega2_mean < 0.0 {
        return Err(CoreError::InvalidArgument {
            context: "gen_sines",
            detail: alloc::string::String::from("noise_std and omega2_mean must be nonnegative"),
        });
    }
    let mut out = Vec::with_capacity(n_traj);
    for n in 0..n_traj {
        let mut rng = stream_rng(seed, n as u64);
        let phase = rng.random_range(0.0..core::f64::consts::TAU);
        let omega2 = sample_exp(cfg.omega2_mean, &mut rng);
        let values = (1..=length)
            .map(|t| {
                let t = t as f64;
                let noise: f64 = StandardNormal.sample(&mut rng);
                cfg.amp_primary * (cfg.omega1 * t + phase).sin()
                    + cfg.amp_secondary * (omega2 * t).sin()
                    + cfg.noise_std * noise
            })
            .collect();
        out.push(Trajectory { id: n as u32, values });
    }
    Ok(out)
}

/// One classical RK4 step of the two-state oscillator.
fn rk4_step(
    y: f64,
    v: f64,
    dt: f64,
    accel: impl Fn(f64, f64) -> f64,
) -> (f64, f64) {
    let (k1y, k1v) = (v, accel(y, v));
    let (k2y, k2v) = (v + 0.5 * dt * k1v, accel(y + 0.5 * dt * k1y, v + 0.5 * dt * k1v));
    let (k3y, k3v) = (v + 0.5 * dt * k2v, accel(y + 0.5 * dt * k2y, v + 0.5 * dt * k2v));
    let (k4y, k4v) = (v + dt * k3v, accel(y + dt * k3y, v + dt * k3v));
    (
        y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Integrates one oscillator realization and samples it at integer times.
/// Returns `None` if the state goes non-finite.
fn integrate_vdp(cfg: &VdpConfig, lambda: f64, length: usize, steps_per_unit: usize) -> Option<Vec<f64>> {
    let w2 = cfg.omega1 * cfg.omega1;
    let accel = |y: f64, v: f64| -> f64 {
        if cfg.positive_feedback_form {
            w2 * (lambda * (1.0 - y * y) * v + y)
        } else {
            w2 * lambda * (1.0 - y * y) * v - w2 * y
        }
    };
    let dt = cfg.dt_int;
    let (mut y, mut v) = (cfg.y0, cfg.v0);
    let mut samples = Vec::with_capacity(length);
    for _ in 0..length {
        for _ in 0..steps_per_unit {
            let (ny, nv) = rk4_step(y, v, dt, accel);
            y = ny;
            v = nv;
        }
        if !y.is_finite() || !v.is_finite() {
            return None;
        }
        samples.push(y);
    }
    Some(samples)
}

const VDP_MAX_RETRIES: usize = 64;

/// Van der Pol trajectories observed with additive noise at t = 1..=length.
///
/// Per-trajectory draw order: damping coefficient, then one noise value per
/// time step. A realization whose integration goes non-finite is discarded
/// and regenerated with a fresh damping draw from the same stream.
pub fn gen_vdp(
    n_traj: usize,
    length: usize,
    seed: u64,
    cfg: &VdpConfig,
) -> Result<Vec<Trajectory>, CoreError> {
    check_gen_args(n_traj, length)?;
    if cfg.dt_int.is_nan() || cfg.dt_int <= 0.0 {
        return Err(CoreError::InvalidArgument {
            context: "gen_vdp",
            detail: alloc::string::String::from("dt_int must be positive"),
        });
    }
    let steps = 1.0 / cfg.dt_int;
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(CoreError::InvalidArgument {
            context: "gen_vdp",
            detail: alloc::format!("dt_int = {} does not divide 1 evenly", cfg.dt_int),
        });
    }
    let steps_per_unit = steps.round() as usize;

    let mut out = Vec::with_capacity(n_traj);
    for n in 0..n_traj {
        let mut rng = stream_rng(seed, n as u64);
        let mut accepted = None;
        for attempt in 0..VDP_MAX_RETRIES {
            let lambda = sample_exp(cfg.lambda_mean, &mut rng);
            match integrate_vdp(cfg, lambda, length, steps_per_unit) {
                Some(samples) => {
                    accepted = Some(samples);
                    break;
                }
                None => {
                    log::warn!(
                        "trajectory {n}: non-finite state at lambda = {lambda:.4} \
                         (attempt {attempt}), redrawing"
                    );
                }
            }
        }
        let samples = accepted.ok_or(CoreError::GenerationDiverged {
            id: n as u32,
            retries: VDP_MAX_RETRIES,
        })?;
        let values = samples
            .into_iter()
            .map(|y| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                y + cfg.noise_std * noise
            })
            .collect();
        out.push(Trajectory { id: n as u32, values });
    }
    Ok(out)
}

/// Random walks: the first stored value is the uniform start point, followed
/// by `length - 1` normal increments.
pub fn gen_brownian(
    n_traj: usize,
    length: usize,
    seed: u64,
    cfg: &BrownianConfig,
) -> Result<Vec<Trajectory>, CoreError> {
    check_gen_args(n_traj, length)?;
    if cfg.increment_std <= 0.0 || cfg.x0_max < cfg.x0_min {
        return Err(CoreError::InvalidArgument {
            context: "gen_brownian",
            detail: alloc::string::String::from(
                "increment_std must be positive and x0_max >= x0_min",
            ),
        });
    }
    let mut out = Vec::with_capacity(n_traj);
    for n in 0..n_traj {
        let mut rng = stream_rng(seed, n as u64);
        let mut values = Vec::with_capacity(length);
        let x0 = if cfg.x0_max > cfg.x0_min {
            rng.random_range(cfg.x0_min..cfg.x0_max)
        } else {
            cfg.x0_min
        };
        values.push(x0);
        for _ in 1..length {
            let step: f64 = StandardNormal.sample(&mut rng);
            let prev = *values.last().unwrap();
            values.push(prev + cfg.increment_std * step);
        }
        out.push(Trajectory { id: n as u32, values });
    }
    Ok(out)
}

/// Exact conditional forecast of a unit random walk `tau` steps past its last
/// observed value: mean stays at the last point, std grows as sqrt(tau).
pub fn brownian_oracle(x_last: f64, tau: usize) -> (f64, f64) {
    assert!(tau >= 1, "horizon step must be at least 1");
    (x_last, (tau as f64).sqrt())
}

/// Splits trajectories by id into train/test and windows each into one
/// (lookback, future) pair taken from its first `p + horizon` points.
///
/// The id order is shuffled by the seed (on the reserved split stream), the
/// first `floor(n * train_fraction)` go to the train set, and the two sets
/// are disjoint by construction.
pub fn window(
    trajectories: &[Trajectory],
    p: usize,
    horizon: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(WindowedDataset, WindowedDataset), CoreError> {
    if p < 1 || horizon < 1 {
        return Err(CoreError::InvalidArgument {
            context: "window",
            detail: alloc::string::String::from("lookback and horizon must be at least 1"),
        });
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(CoreError::InvalidArgument {
            context: "window",
            detail: alloc::format!("train_fraction = {train_fraction} outside [0, 1]"),
        });
    }
    if trajectories.is_empty() {
        return Err(CoreError::InvalidArgument {
            context: "window",
            detail: alloc::string::String::from("no trajectories to window"),
        });
    }
    let needed = p + horizon;
    for t in trajectories {
        if t.values.len() < needed {
            return Err(CoreError::TrajectoryTooShort {
                id: t.id,
                needed,
                got: t.values.len(),
            });
        }
    }

    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    order.shuffle(&mut stream_rng(seed, STREAM_SPLIT));
    let n_train = (trajectories.len() as f64 * train_fraction).floor() as usize;

    let build = |split: Split, indices: &[usize]| {
        let mut ids = Vec::with_capacity(indices.len());
        let mut lookbacks = Vec::with_capacity(indices.len() * p);
        let mut futures = Vec::with_capacity(indices.len() * horizon);
        for &i in indices {
            let t = &trajectories[i];
            ids.push(t.id);
            lookbacks.extend_from_slice(&t.values[..p]);
            futures.extend_from_slice(&t.values[p..p + horizon]);
        }
        WindowedDataset { split, p, horizon, ids, lookbacks, futures }
    };

    Ok((
        build(Split::Train, &order[..n_train]),
        build(Split::Test, &order[n_train..]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sines_formula_at_pinned_parameters() {
        // noise off, phase 0, secondary frequency pinned to its mean:
        // x(6) = 4 sin(pi/2) + sin(pi) = 4
        let cfg = SinesConfig { noise_std: 0.0, ..SinesConfig::default() };
        let omega2 = cfg.omega2_mean;
        let x6 = cfg.amp_primary * (cfg.omega1 * 6.0).sin() + cfg.amp_secondary * (omega2 * 6.0).sin();
        assert!((x6 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sines_noise_off_is_exactly_the_two_sine_sum() {
        // reconstruct the per-trajectory draws from the same stream and
        // compare against the closed formula at every t
        let cfg = SinesConfig { noise_std: 0.0, ..SinesConfig::default() };
        let trajs = gen_sines(6, 40, 13, &cfg).unwrap();
        for (n, traj) in trajs.iter().enumerate() {
            let mut rng = stream_rng(13, n as u64);
            let phase = rng.random_range(0.0..core::f64::consts::TAU);
            let omega2 = sample_exp(cfg.omega2_mean, &mut rng);
            for (k, &x) in traj.values.iter().enumerate() {
                let t = (k + 1) as f64;
                let expect = 4.0 * (cfg.omega1 * t + phase).sin() + (omega2 * t).sin();
                assert_eq!(x, expect);
            }
        }
    }

    #[test]
    fn sines_amplitude_bound_without_noise() {
        let cfg = SinesConfig { noise_std: 0.0, ..SinesConfig::default() };
        let trajs = gen_sines(50, 200, 3, &cfg).unwrap();
        for t in &trajs {
            assert!(t.values.iter().all(|&x| x.abs() <= 5.0 + 1e-12));
        }
    }

    #[test]
    fn sines_seeded_determinism() {
        let cfg = SinesConfig::default();
        let a = gen_sines(20, 64, 11, &cfg).unwrap();
        let b = gen_sines(20, 64, 11, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sines_trajectory_streams_are_order_independent() {
        let cfg = SinesConfig::default();
        let big = gen_sines(30, 32, 5, &cfg).unwrap();
        let small = gen_sines(5, 32, 5, &cfg).unwrap();
        assert_eq!(&big[..5], &small[..]);
    }

    #[test]
    fn vdp_harmonic_limit_matches_analytic_solution() {
        // lambda = 0, noise off: y'' = -w^2 y with y(0)=0, y'(0)=1
        // has the solution y(t) = sin(w t) / w
        let cfg = VdpConfig {
            lambda_mean: 0.0,
            noise_std: 0.0,
            dt_int: 0.01,
            ..VdpConfig::default()
        };
        let trajs = gen_vdp(2, 192, 9, &cfg).unwrap();
        let w = cfg.omega1;
        for t in &trajs {
            for (k, &x) in t.values.iter().enumerate() {
                let time = (k + 1) as f64;
                let exact = (w * time).sin() / w;
                assert!((x - exact).abs() < 1e-6, "t={time}: {x} vs {exact}");
            }
        }
    }

    #[test]
    fn vdp_rk4_fourth_order_convergence() {
        // halving the step should cut the max error by about 2^4
        let exact = |t: f64, w: f64| (w * t).sin() / w;
        let err_at = |dt: f64| -> f64 {
            let cfg = VdpConfig {
                lambda_mean: 0.0,
                noise_std: 0.0,
                dt_int: dt,
                ..VdpConfig::default()
            };
            let t = &gen_vdp(1, 96, 1, &cfg).unwrap()[0];
            t.values
                .iter()
                .enumerate()
                .map(|(k, &x)| (x - exact((k + 1) as f64, cfg.omega1)).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err_at(0.5) / err_at(0.25);
        assert!((10.0..24.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn vdp_limit_cycle_stays_bounded() {
        let cfg = VdpConfig { noise_std: 0.0, ..VdpConfig::default() };
        let trajs = gen_vdp(20, 400, 21, &cfg).unwrap();
        for t in &trajs {
            assert!(t.values.iter().all(|&y| y.abs() < 4.0), "limit cycle escaped");
        }
    }

    #[test]
    fn vdp_seeded_determinism() {
        let cfg = VdpConfig::default();
        let a = gen_vdp(8, 128, 2, &cfg).unwrap();
        let b = gen_vdp(8, 128, 2, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vdp_rejects_step_not_dividing_one() {
        let cfg = VdpConfig { dt_int: 0.3, ..VdpConfig::default() };
        assert!(gen_vdp(1, 8, 0, &cfg).is_err());
    }

    #[test]
    fn brownian_start_points_in_range() {
        let trajs = gen_brownian(200, 16, 17, &BrownianConfig::default()).unwrap();
        for t in &trajs {
            assert!((0.0..1.0).contains(&t.values[0]));
        }
    }

    #[test]
    fn brownian_increment_moments() {
        // pooled increments over ~1e5 samples: mean near 0, variance near 1
        let trajs = gen_brownian(500, 201, 23, &BrownianConfig::default()).unwrap();
        let mut increments = Vec::new();
        for t in &trajs {
            for w in t.values.windows(2) {
                increments.push(w[1] - w[0]);
            }
        }
        assert!(increments.len() >= 100_000);
        let n = increments.len() as f64;
        let mean = increments.iter().sum::<f64>() / n;
        let var = increments.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "increment mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "increment variance {var}");
    }

    #[test]
    fn brownian_seeded_determinism() {
        let cfg = BrownianConfig::default();
        assert_eq!(gen_brownian(10, 32, 5, &cfg).unwrap(), gen_brownian(10, 32, 5, &cfg).unwrap());
    }

    #[test]
    fn brownian_variance_growth_is_linear_in_lag() {
        let trajs = gen_brownian(4000, 40, 29, &BrownianConfig::default()).unwrap();
        for tau in [1usize, 4, 16] {
            let mut sq = 0.0;
            let mut count = 0.0;
            for t in &trajs {
                let d = t.values[8 + tau] - t.values[8];
                sq += d * d;
                count += 1.0;
            }
            let var = sq / count;
            let tol = 3.0 * (2.0 / count).sqrt() * tau as f64;
            assert!((var - tau as f64).abs() < tol, "tau={tau}: var {var}");
        }
    }

    #[test]
    fn oracle_values() {
        assert_eq!(brownian_oracle(0.3, 1), (0.3, 1.0));
        assert_eq!(brownian_oracle(0.3, 4), (0.3, 2.0));
        // mean does not depend on the horizon step
        assert_eq!(brownian_oracle(-1.7, 1).0, brownian_oracle(-1.7, 96).0);
    }

    #[test]
    fn window_split_counts_and_disjointness() {
        let trajs = gen_brownian(10, 12, 1, &BrownianConfig::default()).unwrap();
        let (train, test) = window(&trajs, 8, 4, 0.8, 42).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        for id in test.ids() {
            assert!(!train.ids().contains(id));
        }
    }

    #[test]
    fn window_full_train_fraction_empties_test() {
        let trajs = gen_brownian(5, 12, 1, &BrownianConfig::default()).unwrap();
        let (train, test) = window(&trajs, 8, 4, 1.0, 0).unwrap();
        assert_eq!(train.len(), 5);
        assert!(test.is_empty());
    }

    #[test]
    fn window_rejects_short_trajectories() {
        let trajs = gen_brownian(3, 10, 1, &BrownianConfig::default()).unwrap();
        match window(&trajs, 8, 4, 0.5, 0) {
            Err(CoreError::TrajectoryTooShort { needed: 12, got: 10, .. }) => {}
            other => panic!("expected TrajectoryTooShort, got {other:?}"),
        }
    }

    #[test]
    fn window_pairs_are_contiguous_prefixes() {
        let trajs = gen_sines(4, 20, 3, &SinesConfig::default()).unwrap();
        let (train, _) = window(&trajs, 6, 3, 1.0, 7).unwrap();
        for i in 0..train.len() {
            let id = train.ids()[i] as usize;
            assert_eq!(train.lookback(i), &trajs[id].values[..6]);
            assert_eq!(train.future(i), &trajs[id].values[6..9]);
        }
    }
}

//! Probabilistic time-series forecasting with a dual-network scheme.
//!
//! One network — a discretized linear state-space model ([`ssm::SsmParams`]) —
//! forecasts the mean trajectory over a fixed horizon; a second network with a
//! strictly positive output ([`variance::VarianceParams`]) forecasts the
//! standard deviation at every horizon step. The pair is trained in two
//! stages ([`train::train`]): point-wise pretraining of the mean, then joint
//! minimization of the Gaussian negative log-likelihood.
//!
//! The crate also ships the synthetic benchmark generators ([`datagen`]) and
//! the calibration metrics ([`calib`]) used to judge whether the learned
//! distribution matches the data: standardized residuals, per-horizon
//! variance, KL divergence against the standard normal, and sigma-interval
//! coverage.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature
//! (on by default) adds file helpers for checkpoints and wall-clock timing
//! in training histories.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod calib;
pub mod checkpoint;
pub mod datagen;
pub mod error;
pub mod math;
pub mod optim;
pub mod rng;
pub mod ssm;
pub mod train;
pub mod variance;

pub use calib::{CalibrationReport, ForecastDistribution, Histogram, ResidualMatrix};
pub use checkpoint::Checkpoint;
pub use datagen::{BrownianConfig, SinesConfig, Split, Trajectory, VdpConfig, WindowedDataset};
pub use error::CoreError;
pub use ssm::{SsmGrads, SsmParams};
pub use train::{TrainConfig, TrainError, TrainHistory, TrainResult, VarianceArch};
pub use variance::{DenseParams, VarianceGrads, VarianceParams};

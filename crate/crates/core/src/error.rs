//! Error type shared by the numeric modules.

use alloc::string::String;
use core::fmt;

/// Contract violations surfaced by the forecasting and metric operations.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// An input that must be finite contained a NaN or infinity.
    NonFinite { context: &'static str },
    /// A slice had the wrong length for the operation.
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// A configuration or argument value is outside its valid range.
    InvalidArgument { context: &'static str, detail: String },
    /// A trajectory is shorter than the requested lookback + horizon.
    TrajectoryTooShort { id: u32, needed: usize, got: usize },
    /// An operation needs more samples than were provided.
    NotEnoughSamples { context: &'static str, needed: usize, got: usize },
    /// A predicted standard deviation was zero or negative.
    NonPositiveSigma { index: usize, value: f64 },
    /// A generated trajectory kept diverging after repeated retries.
    GenerationDiverged { id: u32, retries: usize },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::NonFinite { context } => {
                write!(f, "{context}: input contains a non-finite value")
            }
            CoreError::ShapeMismatch { context, expected, got } => {
                write!(f, "{context}: expected length {expected}, got {got}")
            }
            CoreError::InvalidArgument { context, detail } => {
                write!(f, "{context}: {detail}")
            }
            CoreError::TrajectoryTooShort { id, needed, got } => {
                write!(f, "trajectory {id}: needs at least {needed} points, has {got}")
            }
            CoreError::NotEnoughSamples { context, needed, got } => {
                write!(f, "{context}: needs at least {needed} samples, got {got}")
            }
            CoreError::NonPositiveSigma { index, value } => {
                write!(f, "sigma[{index}] = {value} violates the positivity contract")
            }
            CoreError::GenerationDiverged { id, retries } => {
                write!(f, "trajectory {id}: integration stayed non-finite after {retries} retries")
            }
        }
    }
}

impl core::error::Error for CoreError {}

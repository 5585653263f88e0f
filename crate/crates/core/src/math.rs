//! Scalar helpers shared by the mean forecaster and the variance head.

#[allow(unused_imports)]
use num_traits::Float;

/// Lookback standard deviations below this are treated as degenerate and
/// clamped to 1 during per-window standardization.
pub const STD_FLOOR: f64 = 1e-12;

/// Numerically stable `ln(1 + e^x)`.
///
/// For x > 30 the direct form would round `1 + e^x` to `e^x`, so the
/// equivalent `x + ln(1 + e^-x)` is used instead.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`]: the logistic function `1 / (1 + e^-x)`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] on (0, inf): `ln(e^y - 1)`.
pub fn softplus_inv(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    if y > 30.0 {
        // e^y - 1 rounds to e^y
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// Mean and population standard deviation of a window, with the degenerate
/// clamp: an (almost) constant window reports std = 1 so downstream division
/// stays well-defined.
pub fn window_stats(values: &[f64]) -> (f64, f64) {
    debug_assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < STD_FLOOR {
        (mean, 1.0)
    } else {
        (mean, std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_at_zero_is_ln_two() {
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn softplus_large_argument_approaches_identity() {
        assert!((softplus(40.0) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn softplus_negative_tail_matches_stable_form() {
        // ln(1 + e^-20), evaluated independently at high precision
        assert!((softplus(-20.0) - 2.06115362031438e-9).abs() < 1e-22);
    }

    #[test]
    fn softplus_is_positive_everywhere() {
        for x in [-700.0, -30.0, -1.0, 0.0, 1.0, 30.0, 700.0] {
            assert!(softplus(x) > 0.0, "softplus({x}) must be positive");
        }
    }

    #[test]
    fn softplus_inv_round_trips() {
        for y in [1e-6, 0.1, 1.0, 5.0, 40.0] {
            let x = softplus_inv(y);
            assert!((softplus(x) - y).abs() <= 1e-12 * y.max(1.0));
        }
        assert!((softplus_inv(1.0) - 0.5413248546129181).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_matches_softplus_slope_at_zero() {
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn window_stats_degenerate_window_clamps_std() {
        let (m, s) = window_stats(&[3.0; 16]);
        assert_eq!(m, 3.0);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn window_stats_population_divisor() {
        let (m, s) = window_stats(&[-1.0, 1.0]);
        assert_eq!(m, 0.0);
        assert_eq!(s, 1.0); // population variance, divisor n
    }
}

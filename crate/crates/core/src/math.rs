//! Scalar helpers that stay finite for large arguments.

/// `log(1 + e^x)`, split at zero so neither branch overflows.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Logistic function `1 / (1 + e^{-x})`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Relative slack used when comparing objective values that differ only by
/// floating-point summation order.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// True when `a` and `b` agree up to [`TIE_TOLERANCE`] relative to their scale.
pub fn nearly_equal(a: f64, b: f64) -> bool {
    let scale = 1.0_f64.max(libm::fabs(a)).max(libm::fabs(b));
    libm::fabs(a - b) <= TIE_TOLERANCE * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1p_exp_is_stable() {
        assert!((log1p_exp(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log1p_exp(1000.0), 1000.0);
        assert!(log1p_exp(-1000.0) >= 0.0);
        assert!(log1p_exp(-1000.0) < 1e-300);
    }

    #[test]
    fn sigmoid_limits() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
    }
}

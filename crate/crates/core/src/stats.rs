//! Binomial confidence intervals for error-rate estimates.

use statrs::distribution::{Beta, ContinuousCDF};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// Below this many errors the normal approximation is replaced by the
/// Clopper–Pearson interval.
pub const EXACT_INTERVAL_BELOW: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub half_width: f64,
    /// Clopper–Pearson rather than the normal approximation.
    pub exact: bool,
}

/// Standard deviation of a binomial proportion.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// 95% interval for `errors / trials`.
pub fn error_interval(errors: u64, trials: u64) -> Interval {
    assert!(trials > 0 && errors <= trials, "{errors}/{trials}");
    let p_hat = errors as f64 / trials as f64;
    if errors >= EXACT_INTERVAL_BELOW {
        let half_width = Z95 * binomial_sigma(p_hat, trials);
        return Interval {
            lower: (p_hat - half_width).max(0.0),
            upper: (p_hat + half_width).min(1.0),
            half_width,
            exact: false,
        };
    }
    let (x, n) = (errors as f64, trials as f64);
    let lower = if errors == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0)
            .expect("positive shape parameters")
            .inverse_cdf(0.025)
    };
    let upper = if errors == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x)
            .expect("positive shape parameters")
            .inverse_cdf(0.975)
    };
    Interval {
        lower,
        upper,
        half_width: (upper - lower) / 2.0,
        exact: true,
    }
}

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Number of 1901 coefficients in the occupation suite (7 groups × 4
/// transforms × 2 treatment definitions).
pub const OCCUPATION_SUITE_TESTS: usize = 56;

/// Two-sided normal p-value for a z statistic. NaN for undefined statistics.
pub fn normal_p_value(z: f64) -> f64 {
    if z.is_nan() {
        f64::NAN
    } else {
        erfc(z.abs() / std::f64::consts::SQRT_2)
    }
}

/// `min(1, m · p)`.
pub fn bonferroni_adjust(p: f64, m: usize) -> f64 {
    (p * m.max(1) as f64).min(1.0)
}

/// Two-sided z critical value for family-wise level `alpha` over `m` tests.
pub fn bonferroni_z(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || m == 0 {
        return Err(Error::InvalidInput(format!("need 0 < alpha < 1 and m >= 1 (alpha {alpha}, m {m})")));
    }
    let std = Normal::new(0.0, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(std.inverse_cdf(1.0 - alpha / (2.0 * m as f64)))
}

/// Average-partial-effect share `mean_occ · β / mean_pop`.
pub fn ape_share(beta: f64, mean_occupation: f64, mean_population: f64) -> Result<f64> {
    if !(mean_population > 0.0) {
        return Err(Error::InvalidInput(format!("mean population must be positive, got {mean_population}")));
    }
    if mean_occupation < 0.0 {
        return Err(Error::InvalidInput(format!("mean occupation count must be nonnegative, got {mean_occupation}")));
    }
    Ok(mean_occupation * beta / mean_population)
}

/// Log points to percent: `100 · (e^β − 1)`.
pub fn percent_from_logpoints(beta: f64) -> f64 {
    100.0 * beta.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni() {
        assert_eq!(bonferroni_adjust(0.01, 56), 0.56);
        assert_eq!(bonferroni_adjust(0.3, 1), 0.3);
        assert_eq!(bonferroni_adjust(0.03, 56), 1.0);
    }

    #[test]
    fn ape() {
        assert_eq!(ape_share(0.0, 100.0, 500.0).unwrap(), 0.0);
        assert_eq!(ape_share(0.5, 100.0, 500.0).unwrap(), 0.1);
        assert!(ape_share(0.5, 100.0, 0.0).is_err());
    }

    #[test]
    fn percent() {
        assert!((percent_from_logpoints(0.2364) - 26.67).abs() < 0.01);
        assert_eq!(percent_from_logpoints(0.0), 0.0);
        assert!((percent_from_logpoints(-0.1054) - (-10.0)).abs() < 0.01);
    }

    #[test]
    fn p_values() {
        assert!((normal_p_value(1.959963984540054) - 0.05).abs() < 1e-9);
        assert_eq!(normal_p_value(0.0), 1.0);
        assert!(bonferroni_z(0.05, 0).is_err());
        assert!((bonferroni_z(0.05, 1).unwrap() - 1.959963984540054).abs() < 1e-9);
    }
}

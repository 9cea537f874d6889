//! Distribution helpers over `statrs`.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(|Z| ≥ |z|)` for a standard normal `Z`, accurate far into the tail.
pub fn two_sided_normal_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(format!("quantile level {p} outside (0, 1)")));
    }
    Ok(Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p))
}

/// Upper tail `P(X ≥ x)` of a chi-squared variable with `df` degrees of freedom.
pub fn chi_squared_sf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::Parameter(format!("degrees of freedom {df} must be positive")));
    }
    if x.is_nan() {
        return Err(Error::Numeric("chi-squared statistic is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(ChiSquared::new(df).expect("positive df").sf(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let c = normal_cdf(1.959963984540054);
        assert!((c - 0.975).abs() < 1e-10, "{c}");
        assert!((two_sided_normal_p(1.959963984540054) - 0.05).abs() < 1e-10);
        assert!((normal_quantile(0.975).unwrap() - 1.959963984540054).abs() < 1e-9);
        let p = chi_squared_sf(20.0, 1.0).unwrap();
        assert!((p / 7.744216431044088e-06 - 1.0).abs() < 1e-9);
        assert_eq!(chi_squared_sf(0.0, 3.0).unwrap(), 1.0);
        assert!(two_sided_normal_p(30.0) > 0.0);
        assert!(normal_quantile(1.0).is_err());
    }
}

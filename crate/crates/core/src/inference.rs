//! Wald intervals and tests shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::distributions::{std_normal_cdf, std_normal_quantile};
use crate::error::{Error, Result};
use crate::optimize::{HessianSettings, OptimSettings};
use crate::quadrature::IntegrationSettings;

/// Numerical settings shared by the maximum-likelihood fitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub conf_level: f64,
    pub optim: OptimSettings,
    pub hessian: HessianSettings,
    pub integration: IntegrationSettings,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            conf_level: 0.95,
            optim: OptimSettings::default(),
            hessian: HessianSettings::default(),
            integration: IntegrationSettings::default(),
        }
    }
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    /// Absent when the observed information could not be inverted.
    pub std_error: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Two-sided Wald p-value; absent for parameters reported without a test.
    pub p_value: Option<f64>,
}

/// Two-sided standard normal critical value for a confidence level.
pub fn critical_value(conf_level: f64) -> Result<f64> {
    if !(conf_level > 0.0 && conf_level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {conf_level}"
        )));
    }
    Ok(std_normal_quantile(0.5 + 0.5 * conf_level))
}

/// Two-sided p-value of a Wald statistic.
pub fn wald_p_value(estimate: f64, std_error: f64, null: f64) -> f64 {
    let z = (estimate - null) / std_error;
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * std_normal_cdf(-z.abs())).min(1.0)
}

impl Coefficient {
    /// Builds a row with a natural-scale Wald interval. `null` is the
    /// hypothesised value of the test, or `None` to omit the test.
    pub fn wald(name: impl Into<String>, estimate: f64, std_error: Option<f64>, null: Option<f64>, z_crit: f64) -> Self {
        let se = std_error.filter(|s| s.is_finite());
        Self {
            name: name.into(),
            estimate,
            std_error: std_error.filter(|s| !s.is_nan()),
            ci_low: se.map(|s| estimate - z_crit * s),
            ci_high: se.map(|s| estimate + z_crit * s),
            p_value: match (null, std_error) {
                (Some(h0), Some(s)) if !s.is_nan() => Some(wald_p_value(estimate, s, h0)),
                _ => None,
            },
        }
    }

    /// Applies a monotone increasing map to the estimate and interval, as for
    /// hazard ratios `exp(β)`. The standard error and test do not carry over.
    pub fn mapped(&self, name: impl Into<String>, f: impl Fn(f64) -> f64) -> Self {
        Self {
            name: name.into(),
            estimate: f(self.estimate),
            std_error: None,
            ci_low: self.ci_low.map(&f),
            ci_high: self.ci_high.map(&f),
            p_value: self.p_value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ninety_five_percent() {
        assert!((critical_value(0.95).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!(critical_value(1.0).is_err());
    }

    #[test]
    fn scale_test_against_one() {
        // sigma1 = 1.468, SE 0.07707, tested against 1.
        let p = wald_p_value(1.468, 0.07707, 1.0);
        assert!(p > 1e-9 && p < 1.5e-9, "{p}");
        let p = wald_p_value(1.329, 0.08474, 1.0);
        assert!((p - 1e-4).abs() < 0.2e-4, "{p}");
    }

    #[test]
    fn row_brackets_estimate() {
        let c = Coefficient::wald("x", 2.0, Some(0.5), Some(0.0), 1.96);
        assert!(c.ci_low.unwrap() < 2.0 && c.ci_high.unwrap() > 2.0);
        assert!(c.p_value.unwrap() < 1e-4);
        let c = Coefficient::wald("x", 2.0, None, Some(0.0), 1.96);
        assert!(c.ci_low.is_none() && c.p_value.is_none());
    }
}

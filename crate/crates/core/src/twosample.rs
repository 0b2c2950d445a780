//! Mean difference of two independent censored Normal samples with unequal
//! variances.

use serde::{Deserialize, Serialize};

use crate::censlik::CensoredValue;
use crate::distributions::Family;
use crate::error::Result;
use crate::inference::{critical_value, Coefficient, FitOptions};
use crate::onesample::{fit_censored_sample, OneSampleFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanDiffFit {
    pub mu1: Coefficient,
    pub mu2: Coefficient,
    pub sigma1: Coefficient,
    pub sigma2: Coefficient,
    /// `mu1 - mu2`, tested against 0.
    pub delta: Coefficient,
    pub sample1: OneSampleFit,
    pub sample2: OneSampleFit,
}

impl MeanDiffFit {
    /// Rows in display order.
    pub fn rows(&self) -> [&Coefficient; 5] {
        [&self.mu1, &self.mu2, &self.sigma1, &self.sigma2, &self.delta]
    }
}

/// Fits each sample separately and combines them by independence.
pub fn normal_mean_diff(sample1: &[CensoredValue], sample2: &[CensoredValue], opts: &FitOptions) -> Result<MeanDiffFit> {
    let z = critical_value(opts.conf_level)?;
    let (fit1, fit2) = rayon::join(
        || fit_censored_sample(sample1, Family::Normal, opts),
        || fit_censored_sample(sample2, Family::Normal, opts),
    );
    let (fit1, fit2) = (fit1?, fit2?);
    let renamed = |c: &Coefficient, name: &str| Coefficient { name: name.into(), ..c.clone() };
    let estimate = fit1.coefficients[0].estimate - fit2.coefficients[0].estimate;
    let se = match (fit1.coefficients[0].std_error, fit2.coefficients[0].std_error) {
        (Some(a), Some(b)) => Some((a * a + b * b).sqrt()),
        _ => None,
    };
    Ok(MeanDiffFit {
        mu1: renamed(&fit1.coefficients[0], "mu1"),
        mu2: renamed(&fit2.coefficients[0], "mu2"),
        sigma1: renamed(&fit1.coefficients[1], "sigma1"),
        sigma2: renamed(&fit2.coefficients[1], "sigma2"),
        delta: Coefficient::wald("delta", estimate, se, Some(0.0), z),
        sample1: fit1,
        sample2: fit2,
    })
}

//! Maximum-likelihood fit of a single arbitrarily censored sample.

use serde::{Deserialize, Serialize};

use crate::censlik::{loglik_contribution, CensorKind, CensoredValue};
use crate::distributions::{CovariateDensity, Family};
use crate::error::{Error, Result};
use crate::inference::{critical_value, Coefficient, FitOptions};
use crate::optimize::{covariance_from_hessian, hessian, maximize, Transform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSampleFit {
    pub family: Family,
    /// Fitted density; plug-in `f_θ` for the censored-covariate regression.
    pub density: CovariateDensity,
    /// Canonical parameters in [`Family::parameter_names`] order.
    pub coefficients: Vec<Coefficient>,
    /// Row-major 2×2 covariance of the canonical parameters.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub loglik: f64,
    pub n_exact: usize,
    pub n_left: usize,
    pub n_right: usize,
    pub n_interval: usize,
    pub converged: bool,
}

impl OneSampleFit {
    pub fn n(&self) -> usize {
        self.n_exact + self.n_left + self.n_right + self.n_interval
    }

    pub fn estimates(&self) -> [f64; 2] {
        [self.coefficients[0].estimate, self.coefficients[1].estimate]
    }

    pub fn std_errors(&self) -> [Option<f64>; 2] {
        [self.coefficients[0].std_error, self.coefficients[1].std_error]
    }
}

/// Sum of log-likelihood contributions of `data` under `density`.
pub fn sample_loglik(data: &[CensoredValue], density: &CovariateDensity) -> f64 {
    data.iter().map(|v| loglik_contribution(v, density)).sum()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v)
}

fn initial_values(data: &[CensoredValue], family: Family) -> Result<[f64; 2]> {
    let xs: Vec<f64> = data.iter().map(CensoredValue::imputed).collect();
    let (m, v) = mean_var(&xs);
    let sd = if v > 0.0 { v.sqrt() } else { 1.0 };
    match family {
        Family::Normal => Ok([m, sd]),
        Family::Logistic => Ok([m, sd * 3f64.sqrt() / std::f64::consts::PI]),
        Family::Gamma | Family::Weibull => {
            if xs.iter().any(|x| *x <= 0.0) {
                return Err(Error::Domain(format!(
                    "{family} samples need positive values and bounds"
                )));
            }
            if family == Family::Gamma {
                let v = if v > 0.0 { v } else { m * m };
                Ok([m * m / v, m / v])
            } else {
                let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
                let (lm, lv) = mean_var(&logs);
                let shape = if lv > 0.0 { 1.282_549_830_161_864 / lv.sqrt() } else { 1.0 };
                Ok([shape, (lm + 0.577_215_664_901_532_9 / shape).exp()])
            }
        }
    }
}

fn check_identifiable(data: &[CensoredValue]) -> Result<()> {
    if data.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 observations, got {}",
            data.len()
        )));
    }
    let mut exact: Vec<f64> = data.iter().filter_map(CensoredValue::value).collect();
    exact.sort_by(f64::total_cmp);
    exact.dedup();
    let n_interval = data.iter().filter(|v| v.kind() == CensorKind::Interval).count();
    if exact.len() + n_interval < 2 {
        return Err(Error::NonIdentifiable(
            "fewer than two distinct exact or interval-censored observations".into(),
        ));
    }
    Ok(())
}

/// Fits `family` to `data` by maximum likelihood.
///
/// Standard errors come from the observed information on the natural scale.
/// Location parameters are tested against 0, scale, rate and shape
/// parameters against 1.
pub fn fit_censored_sample(data: &[CensoredValue], family: Family, opts: &FitOptions) -> Result<OneSampleFit> {
    check_identifiable(data)?;
    let z = critical_value(opts.conf_level)?;
    let start = initial_values(data, family)?;
    let transforms = family
        .positive()
        .map(|p| if p { Transform::Log } else { Transform::Identity });
    let objective = |p: &[f64]| match CovariateDensity::new(family, p) {
        Ok(d) => sample_loglik(data, &d),
        Err(_) => f64::NEG_INFINITY,
    };
    let opt = maximize(objective, &start, &transforms, &opts.optim)?;
    let density = CovariateDensity::new(family, &opt.argmax)?;

    let h = hessian(objective, &opt.argmax, &opts.hessian)?;
    let cov = covariance_from_hessian(&h);
    let names = family.parameter_names();
    let coefficients = (0..2)
        .map(|i| {
            let se = cov.as_ref().map(|c| c[(i, i)].sqrt());
            let null = if family.positive()[i] { 1.0 } else { 0.0 };
            Coefficient::wald(names[i], opt.argmax[i], se, Some(null), z)
        })
        .collect();

    let count = |k: CensorKind| data.iter().filter(|v| v.kind() == k).count();
    Ok(OneSampleFit {
        family,
        density,
        coefficients,
        covariance: cov.map(|c| (0..2).map(|i| vec![c[(i, 0)], c[(i, 1)]]).collect()),
        loglik: opt.value,
        n_exact: count(CensorKind::Exact),
        n_left: count(CensorKind::Left),
        n_right: count(CensorKind::Right),
        n_interval: count(CensorKind::Interval),
        converged: opt.converged,
    })
}

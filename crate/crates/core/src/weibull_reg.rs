//! Weibull regression with fully observed covariates, fitted in AFT form and
//! converted to the proportional-hazards form with delta-method inference.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distributions::{WeibullAFT, WeibullPH};
use crate::error::{Error, Result};
use crate::inference::{critical_value, Coefficient, FitOptions};
use crate::optimize::{covariance_from_hessian, hessian, maximize, Transform};

/// One subject with a possibly right-censored time and exact covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactObservation {
    pub time: f64,
    /// `true` when the event was observed at `time`.
    pub event: bool,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AFTFit {
    pub params: WeibullAFT,
    /// Covariance over `(μ, log σ, α)`, row-major.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub covariate_names: Vec<String>,
    pub loglik: f64,
    pub n: usize,
    pub n_events: usize,
    pub converged: bool,
}

impl AFTFit {
    /// Parameter vector `(μ, log σ, α)`.
    pub fn parameter_vector(&self) -> Vec<f64> {
        let mut v = vec![self.params.mu, self.params.log_sigma];
        v.extend(&self.params.alpha);
        v
    }

    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance
            .as_ref()
            .map(|c| (0..c.len()).map(|i| c[i][i].sqrt()).collect())
    }

    pub fn aic(&self) -> f64 {
        -2.0 * self.loglik + 2.0 * (2 + self.params.alpha.len()) as f64
    }

    /// AFT coefficient table, every row tested against 0.
    pub fn coefficients(&self, conf_level: f64) -> Result<Vec<Coefficient>> {
        let z = critical_value(conf_level)?;
        let se = self.std_errors();
        let mut names = vec!["(Intercept)".to_string(), "Log(scale)".to_string()];
        names.extend(self.covariate_names.iter().cloned());
        Ok(self
            .parameter_vector()
            .into_iter()
            .enumerate()
            .map(|(i, est)| Coefficient::wald(names[i].clone(), est, se.as_ref().map(|s| s[i]), Some(0.0), z))
            .collect())
    }
}

/// Proportional-hazards view of an AFT fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PHSummary {
    pub lambda: Coefficient,
    pub gamma: Coefficient,
    pub beta: Vec<Coefficient>,
    /// `exp(β)`; intervals are `exp` of the `β` intervals.
    pub hazard_ratios: Vec<Coefficient>,
    /// `exp(α)`; intervals are `exp` of the `α` intervals.
    pub event_time_ratios: Vec<Coefficient>,
    /// Covariance over `(λ, γ, β)`, row-major.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub inference_available: bool,
}

/// Log-likelihood of right-censored Weibull data in AFT form.
pub fn aft_loglik(params: &WeibullAFT, data: &[ExactObservation]) -> f64 {
    let sigma = params.sigma();
    data.iter()
        .map(|obs| {
            let eta: f64 = params.mu
                + params.alpha.iter().zip(&obs.covariates).map(|(a, x)| a * x).sum::<f64>();
            let ln_t = obs.time.ln();
            let u = (ln_t - eta) / sigma;
            let cum_hazard = u.exp();
            if obs.event {
                -params.log_sigma - ln_t + u - cum_hazard
            } else {
                -cum_hazard
            }
        })
        .sum()
}

fn validate(data: &[ExactObservation], d: usize) -> Result<()> {
    for (i, obs) in data.iter().enumerate() {
        if !(obs.time > 0.0 && obs.time.is_finite()) {
            return Err(Error::Domain(format!("row {}: time must be positive, got {}", i + 1, obs.time)));
        }
        if obs.covariates.len() != d {
            return Err(Error::InvalidParameter(format!(
                "row {}: expected {d} covariates, found {}",
                i + 1,
                obs.covariates.len()
            )));
        }
        if obs.covariates.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("row {}: non-finite covariate", i + 1)));
        }
    }
    if data.len() < d + 3 {
        return Err(Error::InsufficientData(format!(
            "{} observations for {} parameters",
            data.len(),
            d + 2
        )));
    }
    if !data.iter().any(|o| o.event) {
        return Err(Error::NoEvents);
    }
    Ok(())
}

/// Least-squares start on `log t`, ignoring censoring.
fn initial_values(data: &[ExactObservation], d: usize) -> Vec<f64> {
    let n = data.len();
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { data[i].covariates[j - 1] });
    let y = nalgebra::DVector::from_fn(n, |i, _| data[i].time.ln());
    let xtx = x.transpose() * &x;
    let coef = xtx
        .cholesky()
        .map(|c| c.solve(&(x.transpose() * &y)))
        .unwrap_or_else(|| {
            let mut c = nalgebra::DVector::zeros(d + 1);
            c[0] = y.mean();
            c
        });
    let resid = &y - &x * &coef;
    let sd = (resid.norm_squared() / n as f64).sqrt() * 6f64.sqrt() / std::f64::consts::PI;
    let sigma = if sd > 1e-3 && sd.is_finite() { sd } else { 1.0 };
    let mut start = vec![coef[0] + 0.5 * sigma, sigma.ln()];
    start.extend(coef.iter().skip(1));
    start
}

fn params_from(v: &[f64]) -> WeibullAFT {
    WeibullAFT { mu: v[0], log_sigma: v[1], alpha: v[2..].to_vec() }
}

/// Maximizes the fully-observed-covariate likelihood over `(μ, log σ, α)`.
/// Events contribute `log f(T|x)` and censored rows `log S(T|x)`.
pub fn fit_weibull_l1(data: &[ExactObservation], covariate_names: &[String], opts: &FitOptions) -> Result<AFTFit> {
    let d = covariate_names.len();
    validate(data, d)?;
    let start = initial_values(data, d);
    let objective = |v: &[f64]| aft_loglik(&params_from(v), data);
    let opt = maximize(objective, &start, &vec![Transform::Identity; d + 2], &opts.optim)?;
    let h = hessian(objective, &opt.argmax, &opts.hessian)?;
    let cov = covariance_from_hessian(&h);
    Ok(AFTFit {
        params: params_from(&opt.argmax),
        covariance: cov.map(|c| (0..d + 2).map(|i| c.row(i).iter().copied().collect()).collect()),
        covariate_names: covariate_names.to_vec(),
        loglik: opt.value,
        n: data.len(),
        n_events: data.iter().filter(|o| o.event).count(),
        converged: opt.converged,
    })
}

/// Converts an AFT fit to `(λ, γ, β)` with first-order delta-method
/// standard errors from the joint covariance.
pub fn convert_weibull(fit: &AFTFit, conf_level: f64) -> Result<PHSummary> {
    let z = critical_value(conf_level)?;
    let (ph, beta): (WeibullPH, Vec<f64>) = fit.params.to_ph();
    let d = beta.len();
    let sigma = fit.params.sigma();
    let (mu, lambda) = (fit.params.mu, ph.lambda());

    let mut jac = DMatrix::zeros(d + 2, d + 2);
    jac[(0, 0)] = -lambda / sigma;
    jac[(0, 1)] = lambda * mu / sigma;
    jac[(1, 1)] = -1.0 / sigma;
    for j in 0..d {
        jac[(2 + j, 1)] = fit.params.alpha[j] / sigma;
        jac[(2 + j, 2 + j)] = -1.0 / sigma;
    }
    let aft_cov = fit
        .covariance
        .as_ref()
        .map(|c| DMatrix::from_fn(d + 2, d + 2, |i, j| c[i][j]));
    let ph_cov = aft_cov.as_ref().map(|c| &jac * c * jac.transpose());
    let se = |i: usize| ph_cov.as_ref().map(|c| c[(i, i)].max(0.0).sqrt());
    let aft_se = |i: usize| aft_cov.as_ref().map(|c| c[(i, i)].max(0.0).sqrt());

    let beta_rows: Vec<Coefficient> = beta
        .iter()
        .enumerate()
        .map(|(j, b)| Coefficient::wald(fit.covariate_names[j].clone(), *b, se(2 + j), Some(0.0), z))
        .collect();
    let hazard_ratios = beta_rows.iter().map(|c| c.mapped(c.name.clone(), f64::exp)).collect();
    let event_time_ratios = fit
        .params
        .alpha
        .iter()
        .enumerate()
        .map(|(j, a)| {
            Coefficient::wald(fit.covariate_names[j].clone(), *a, aft_se(2 + j), Some(0.0), z)
                .mapped(fit.covariate_names[j].clone(), f64::exp)
        })
        .collect();

    Ok(PHSummary {
        lambda: Coefficient::wald("lambda", lambda, se(0), None, z),
        gamma: Coefficient::wald("gamma", ph.gamma(), se(1), None, z),
        beta: beta_rows,
        hazard_ratios,
        event_time_ratios,
        covariance: ph_cov.map(|c| (0..d + 2).map(|i| c.row(i).iter().copied().collect()).collect()),
        inference_available: aft_cov.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_fit(cov: Option<Vec<Vec<f64>>>) -> AFTFit {
        AFTFit {
            params: WeibullAFT::new(0.0, 0.0, vec![0.0]).unwrap(),
            covariance: cov,
            covariate_names: vec!["x".into()],
            loglik: 0.0,
            n: 10,
            n_events: 10,
            converged: true,
        }
    }

    #[test]
    fn identity_conversion_with_zero_covariance() {
        let s = convert_weibull(&zero_fit(Some(vec![vec![0.0; 3]; 3])), 0.95).unwrap();
        assert_eq!((s.lambda.estimate, s.gamma.estimate, s.beta[0].estimate), (1.0, 1.0, 0.0));
        assert_eq!(s.lambda.std_error, Some(0.0));
        assert_eq!(s.gamma.std_error, Some(0.0));
        assert_eq!(s.beta[0].std_error, Some(0.0));
    }

    #[test]
    fn missing_covariance_gives_estimates_only() {
        let s = convert_weibull(&zero_fit(None), 0.95).unwrap();
        assert!(!s.inference_available);
        assert!(s.lambda.std_error.is_none() && s.beta[0].ci_low.is_none());
    }

    #[test]
    fn delta_method_matches_finite_difference_jacobian() {
        let fit = AFTFit {
            params: WeibullAFT::new(0.4, -0.3, vec![0.8, -0.2]).unwrap(),
            covariance: Some(vec![
                vec![0.04, 0.01, -0.005, 0.002],
                vec![0.01, 0.02, 0.003, 0.0],
                vec![-0.005, 0.003, 0.03, 0.001],
                vec![0.002, 0.0, 0.001, 0.05],
            ]),
            covariate_names: vec!["a".into(), "b".into()],
            loglik: 0.0,
            n: 50,
            n_events: 40,
            converged: true,
        };
        let s = convert_weibull(&fit, 0.95).unwrap();
        // Numerical Jacobian of (μ, log σ, α) -> (λ, γ, β).
        let map = |v: &[f64]| {
            let (ph, b) = params_from(v).to_ph();
            let mut out = vec![ph.lambda(), ph.gamma()];
            out.extend(b);
            out
        };
        let x = fit.parameter_vector();
        let h = 1e-6;
        let jac = DMatrix::from_fn(4, 4, |i, j| {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[j] += h;
            dn[j] -= h;
            (map(&up)[i] - map(&dn)[i]) / (2.0 * h)
        });
        let cov = DMatrix::from_fn(4, 4, |i, j| fit.covariance.as_ref().unwrap()[i][j]);
        let expected = &jac * cov * jac.transpose();
        let got = s.covariance.unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((got[i][j] - expected[(i, j)]).abs() < 1e-8, "({i},{j})");
            }
        }
    }

    #[test]
    fn hazard_ratio_interval_is_exp_of_beta_interval() {
        let mut fit = zero_fit(Some(vec![
            vec![0.01, 0.0, 0.0],
            vec![0.0, 0.01, 0.0],
            vec![0.0, 0.0, 0.04],
        ]));
        fit.params.alpha = vec![-0.3];
        let s = convert_weibull(&fit, 0.95).unwrap();
        let (b, hr) = (&s.beta[0], &s.hazard_ratios[0]);
        assert_eq!(hr.estimate, b.estimate.exp());
        assert_eq!(hr.ci_low.unwrap(), b.ci_low.unwrap().exp());
        assert_eq!(hr.ci_high.unwrap(), b.ci_high.unwrap().exp());
        let etr = &s.event_time_ratios[0];
        assert_eq!(etr.estimate, (-0.3f64).exp());
        assert!((etr.ci_low.unwrap() - (-0.3 - 1.959_963_984_540_054 * 0.2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_events_fail() {
        let data: Vec<_> = (1..=6)
            .map(|i| ExactObservation { time: i as f64, event: false, covariates: vec![] })
            .collect();
        assert!(matches!(fit_weibull_l1(&data, &[], &FitOptions::default()), Err(Error::NoEvents)));
    }

    #[test]
    fn nonpositive_time_is_rejected() {
        let mut data: Vec<_> = (1..=6)
            .map(|i| ExactObservation { time: i as f64, event: true, covariates: vec![] })
            .collect();
        data[2].time = 0.0;
        assert!(fit_weibull_l1(&data, &[], &FitOptions::default()).is_err());
    }
}

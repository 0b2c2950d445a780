//! Weibull proportional-hazards regression with a right-censored endpoint and
//! one censored covariate.
//!
//! Each subject contributes
//!
//! ```text
//! f(T|x)^δ S(T|x)^(1-δ) f_θ(x₁)                    if x₁ is observed
//! ∫_region f(T|x)^δ S(T|x)^(1-δ) f_θ(u) du          otherwise
//! ```
//!
//! where the hazard is `λ γ t^(γ-1) exp(βᵀx)` and the region is the one the
//! covariate's [`CensoredValue`] encodes (`(-∞, c]` for a limit of
//! detection). The covariate density `f_θ` is fixed beforehand, typically by
//! [`crate::onesample::fit_censored_sample`] on the pooled covariate sample.
//!
//! The Bernoulli factor for the observation status does not depend on
//! `(λ, γ, β)` and is left out of the objective, so reported log-likelihoods
//! and AIC exclude it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censlik::CensoredValue;
use crate::distributions::{CovariateDensity, WeibullPH};
use crate::error::{Error, Result};
use crate::inference::{critical_value, Coefficient, FitOptions};
use crate::optimize::{covariance_from_hessian, hessian, maximize, Transform};
use crate::quadrature::{integrate, IntegrationSettings};
use crate::weibull_reg::{fit_weibull_l1, ExactObservation};

/// Follow-up time, event indicator, exact covariates and the censored covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvObservation {
    pub time: f64,
    pub event: bool,
    pub x_cens: CensoredValue,
    pub x_exact: Vec<f64>,
}

impl SurvObservation {
    pub fn new(time: f64, event: bool, x_cens: CensoredValue, x_exact: Vec<f64>) -> Result<Self> {
        if !(time > 0.0 && time.is_finite()) {
            return Err(Error::Domain(format!("follow-up time must be positive, got {time}")));
        }
        Ok(Self { time, event, x_cens, x_exact })
    }

    /// The row with the censored covariate replaced by its finite bound
    /// (limit-of-detection imputation); covariates are `[x_cens, x_exact..]`.
    pub fn imputed(&self) -> ExactObservation {
        let mut covariates = Vec::with_capacity(1 + self.x_exact.len());
        covariates.push(self.x_cens.imputed());
        covariates.extend(&self.x_exact);
        ExactObservation { time: self.time, event: self.event, covariates }
    }
}

/// Baseline Weibull and coefficients; `beta[0]` belongs to the censored
/// covariate, `beta[1..]` to the exact covariates in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensCovParams {
    pub baseline: WeibullPH,
    pub beta: Vec<f64>,
}

impl CensCovParams {
    pub fn new(lambda: f64, gamma: f64, beta: Vec<f64>) -> Result<Self> {
        Ok(Self { baseline: WeibullPH::new(lambda, gamma)?, beta })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.baseline.lambda(), self.baseline.gamma()];
        v.extend(&self.beta);
        v
    }
}

/// Covariate labels used in reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateNames {
    pub censored: String,
    pub exact: Vec<String>,
}

impl CovariateNames {
    pub fn new(censored: impl Into<String>, exact: &[&str]) -> Self {
        Self {
            censored: censored.into(),
            exact: exact.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Names in coefficient order: censored covariate first.
    pub fn ordered(&self) -> Vec<String> {
        std::iter::once(self.censored.clone()).chain(self.exact.iter().cloned()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensCovFit {
    pub lambda: f64,
    pub gamma: f64,
    pub beta: Vec<f64>,
    /// `lambda`, `gamma`, then the covariates; `lambda` and `gamma` carry no p-value.
    pub coefficients: Vec<Coefficient>,
    /// Covariance over `(λ, γ, β)` on the natural scale.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub loglik: f64,
    pub aic: f64,
    pub n: usize,
    pub n_events: usize,
    pub n_cens_cov: usize,
    pub density: CovariateDensity,
    pub names: CovariateNames,
    pub converged: bool,
    pub function_evals: usize,
    pub warnings: Vec<String>,
}

impl CensCovFit {
    pub fn params(&self) -> CensCovParams {
        CensCovParams {
            baseline: WeibullPH::new(self.lambda, self.gamma).expect("fitted values are positive"),
            beta: self.beta.clone(),
        }
    }

    pub fn std_errors(&self) -> Vec<Option<f64>> {
        self.coefficients.iter().map(|c| c.std_error).collect()
    }
}

fn row_term(
    obs: &SurvObservation,
    baseline: &WeibullPH,
    beta: &[f64],
    density: &CovariateDensity,
    settings: &IntegrationSettings,
) -> f64 {
    let (lambda, gamma) = (baseline.lambda(), baseline.gamma());
    let ln_t = obs.time.ln();
    let exact_eta: f64 = beta[1..].iter().zip(&obs.x_exact).map(|(b, x)| b * x).sum();
    let cum_baseline = lambda * (gamma * ln_t).exp();
    let ln_hazard_base = lambda.ln() + gamma.ln() + (gamma - 1.0) * ln_t;
    let delta = if obs.event { 1.0 } else { 0.0 };
    let beta_c = beta[0];

    if let Some(x) = obs.x_cens.value() {
        let eta = exact_eta + beta_c * x;
        let ln_surv = -cum_baseline * eta.exp();
        let ln_f = density.ln_pdf(x).unwrap_or(f64::NEG_INFINITY);
        return delta * (ln_hazard_base + eta) + ln_surv + ln_f;
    }

    // Factor the covariate-free part out of the integral.
    let scale = cum_baseline * exact_eta.exp();
    let integrand = |u: f64| {
        let cum = scale * (beta_c * u).exp();
        if !cum.is_finite() {
            return 0.0;
        }
        (delta * beta_c * u - cum + density.ln_pdf_unchecked(u)).exp()
    };
    let (lo, hi) = obs.x_cens.bounds();
    let (s_lo, s_hi) = density.support();
    let integral = integrate(integrand, lo.max(s_lo), hi.min(s_hi), settings);
    if !(integral.value > 0.0) {
        return f64::NEG_INFINITY;
    }
    delta * (ln_hazard_base + exact_eta) + integral.value.ln()
}

/// Log-likelihood of the censored-covariate model at `params`.
///
/// Returns `-inf` when a censored row's integral vanishes.
pub fn loglik_l2(
    params: &CensCovParams,
    data: &[SurvObservation],
    density: &CovariateDensity,
    settings: &IntegrationSettings,
) -> f64 {
    let terms: Vec<f64> = data
        .par_iter()
        .map(|obs| row_term(obs, &params.baseline, &params.beta, density, settings))
        .collect();
    // Sequential sum keeps the result independent of thread scheduling.
    terms.iter().sum()
}

fn validate(data: &[SurvObservation], d_exact: usize) -> Result<()> {
    for (i, obs) in data.iter().enumerate() {
        if !(obs.time > 0.0 && obs.time.is_finite()) {
            return Err(Error::Domain(format!("row {}: time must be positive, got {}", i + 1, obs.time)));
        }
        if obs.x_exact.len() != d_exact {
            return Err(Error::InvalidParameter(format!(
                "row {}: expected {d_exact} exact covariates, found {}",
                i + 1,
                obs.x_exact.len()
            )));
        }
    }
    if !data.iter().any(|o| o.event) {
        return Err(Error::NoEvents);
    }
    if data.len() < d_exact + 4 {
        return Err(Error::InsufficientData(format!(
            "{} observations for {} parameters",
            data.len(),
            d_exact + 3
        )));
    }
    Ok(())
}

/// Starting values from the imputed-data Weibull fit, on the PH scale.
pub fn default_initial(data: &[SurvObservation], names: &CovariateNames, opts: &FitOptions) -> Result<Vec<f64>> {
    let imputed: Vec<ExactObservation> = data.iter().map(SurvObservation::imputed).collect();
    let aft = fit_weibull_l1(&imputed, &names.ordered(), opts)?;
    let (ph, beta) = aft.params.to_ph();
    Ok(CensCovParams { baseline: ph, beta }.to_vec())
}

/// Maximizes [`loglik_l2`] over `(λ, γ, β)` with `λ` and `γ` log-transformed.
///
/// `initial`, when given, is `[λ, γ, β_cens, β_exact..]`. Standard errors
/// come from the observed information on the natural scale.
pub fn fit_censcov(
    data: &[SurvObservation],
    density: &CovariateDensity,
    names: &CovariateNames,
    initial: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<CensCovFit> {
    opts.integration.validate()?;
    let d_exact = names.exact.len();
    validate(data, d_exact)?;
    let d = d_exact + 1;
    let z = critical_value(opts.conf_level)?;

    let mut warnings = Vec::new();
    let n_cens_cov = data.iter().filter(|o| !o.x_cens.is_exact()).count();
    if n_cens_cov == data.len() {
        warnings.push("no exactly observed values of the censored covariate; its effect is weakly identified".into());
    }

    let start = match initial {
        Some(v) if v.len() == d + 2 => v.to_vec(),
        Some(v) => {
            return Err(Error::InvalidParameter(format!(
                "initial vector has {} entries, expected {}",
                v.len(),
                d + 2
            )))
        }
        None => default_initial(data, names, opts)?,
    };

    let objective = |v: &[f64]| match WeibullPH::new(v[0], v[1]) {
        Ok(baseline) => loglik_l2(
            &CensCovParams { baseline, beta: v[2..].to_vec() },
            data,
            density,
            &opts.integration,
        ),
        Err(_) => f64::NEG_INFINITY,
    };
    let mut transforms = vec![Transform::Log, Transform::Log];
    transforms.extend(std::iter::repeat(Transform::Identity).take(d));
    let opt = maximize(objective, &start, &transforms, &opts.optim)?;
    if !opt.converged {
        warnings.push("optimizer stopped before meeting its convergence criterion".into());
    }

    let h = hessian(objective, &opt.argmax, &opts.hessian)?;
    let cov = covariance_from_hessian(&h);
    if cov.is_none() {
        warnings.push("observed information is not positive definite; standard errors unavailable".into());
    }
    let se = |i: usize| cov.as_ref().map(|c| c[(i, i)].sqrt());
    let mut coefficients = vec![
        Coefficient::wald("lambda", opt.argmax[0], se(0), None, z),
        Coefficient::wald("gamma", opt.argmax[1], se(1), None, z),
    ];
    for (j, name) in names.ordered().into_iter().enumerate() {
        coefficients.push(Coefficient::wald(name, opt.argmax[2 + j], se(2 + j), Some(0.0), z));
    }

    let k = (2 + d) as f64;
    Ok(CensCovFit {
        lambda: opt.argmax[0],
        gamma: opt.argmax[1],
        beta: opt.argmax[2..].to_vec(),
        coefficients,
        covariance: cov.map(|c| (0..d + 2).map(|i| c.row(i).iter().copied().collect()).collect()),
        loglik: opt.value,
        aic: -2.0 * opt.value + 2.0 * k,
        n: data.len(),
        n_events: data.iter().filter(|o| o.event).count(),
        n_cens_cov,
        density: *density,
        names: names.clone(),
        converged: opt.converged,
        function_evals: opt.function_evals,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weibull_reg::aft_loglik;

    fn density() -> CovariateDensity {
        CovariateDensity::normal(-2.467, 1.712).unwrap()
    }

    fn rows() -> Vec<SurvObservation> {
        vec![
            SurvObservation::new(0.8, true, CensoredValue::exact(-1.5124), vec![0.0]).unwrap(),
            SurvObservation::new(1.3, false, CensoredValue::exact(-0.7509), vec![1.0]).unwrap(),
            SurvObservation::new(0.6, true, CensoredValue::exact(-1.7824), vec![0.0]).unwrap(),
            SurvObservation::new(2.1, true, CensoredValue::exact(-1.9962), vec![1.0]).unwrap(),
            SurvObservation::new(1.7, false, CensoredValue::exact(-2.6862), vec![0.0]).unwrap(),
        ]
    }

    #[test]
    fn exact_rows_reduce_to_weibull_likelihood_plus_density() {
        let data = rows();
        let params = CensCovParams::new(0.75, 3.1, vec![0.7, -0.2]).unwrap();
        let l2 = loglik_l2(&params, &data, &density(), &IntegrationSettings::default());
        let imputed: Vec<_> = data.iter().map(SurvObservation::imputed).collect();
        let l1 = aft_loglik(&params.baseline.to_aft(&params.beta), &imputed);
        let dens: f64 = data.iter().map(|o| density().ln_pdf(o.x_cens.value().unwrap()).unwrap()).sum();
        assert!((l2 - (l1 + dens)).abs() < 1e-10, "{l2} vs {}", l1 + dens);
    }

    #[test]
    fn covariate_free_integral_factorizes() {
        let c = -3.9673;
        for event in [true, false] {
            let obs = SurvObservation::new(1.1, event, CensoredValue::left(c), vec![1.0]).unwrap();
            let params = CensCovParams::new(0.75, 3.1, vec![0.0, 0.4]).unwrap();
            let got = loglik_l2(&params, &[obs.clone()], &density(), &IntegrationSettings::default());
            let eta = 0.4;
            let ph = params.baseline;
            let ln_s = ph.ln_survival(1.1).unwrap() * f64::exp(eta);
            let ln_f = ph.ln_pdf(1.1).unwrap() + ph.ln_survival(1.1).unwrap() * (f64::exp(eta) - 1.0) + eta;
            let expected = if event { ln_f } else { ln_s } + density().cdf(c).ln();
            assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
        }
    }

    #[test]
    fn empty_region_is_infeasible() {
        let g = CovariateDensity::new(crate::distributions::Family::Gamma, &[2.0, 1.0]).unwrap();
        let obs = SurvObservation::new(1.0, true, CensoredValue::left(-1.0), vec![]).unwrap();
        let params = CensCovParams::new(1.0, 1.0, vec![0.5]).unwrap();
        assert_eq!(loglik_l2(&params, &[obs], &g, &IntegrationSettings::default()), f64::NEG_INFINITY);
    }

    #[test]
    fn no_events_is_an_error() {
        let data: Vec<_> = rows()
            .into_iter()
            .map(|mut o| {
                o.event = false;
                o
            })
            .collect();
        let names = CovariateNames::new("mrd", &["tmt"]);
        assert!(matches!(
            fit_censcov(&data, &density(), &names, None, &FitOptions::default()),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn rejects_nonpositive_time() {
        assert!(SurvObservation::new(0.0, true, CensoredValue::exact(1.0), vec![]).is_err());
    }

    #[test]
    fn wrong_initial_length_is_rejected() {
        let names = CovariateNames::new("mrd", &["tmt"]);
        let r = fit_censcov(&rows(), &density(), &names, Some(&[1.0, 1.0]), &FitOptions::default());
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}

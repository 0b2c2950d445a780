//! Two-arm trials with a left-censored biomarker, and a Monte-Carlo
//! comparison of three estimators of the biomarker effect:
//!
//! * **A** – censored-covariate Weibull regression ([`fit_censcov`]) with the
//!   covariate density re-estimated from the pooled sample each replication;
//! * **B** – Weibull regression with censored values imputed at the limit;
//! * **C** – Cox regression with the same imputation.
//!
//! Replication `r` draws from a ChaCha stream keyed by `(seed, r)`, so a
//! study is reproducible bit for bit regardless of thread count.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censcov_reg::{fit_censcov, CovariateNames, SurvObservation};
use crate::censlik::CensoredValue;
use crate::coxph::fit_cox;
use crate::distributions::{std_normal_quantile, Family};
use crate::error::{Error, Result};
use crate::inference::FitOptions;
use crate::onesample::fit_censored_sample;
use crate::weibull_reg::{convert_weibull, fit_weibull_l1, ExactObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mu_r: f64,
    pub sigma_r: f64,
    pub mu_o: f64,
    pub sigma_o: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub beta_tmt: f64,
    pub beta_mrd: f64,
    /// Share of left-censored biomarker values in the control (`tmt = 0`) arm.
    pub cens_prop_r: f64,
    /// Share of left-censored biomarker values in the experimental (`tmt = 1`) arm.
    pub cens_prop_o: f64,
    pub n_per_arm: usize,
    /// Administrative censoring time for the endpoint.
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    /// The reference configuration. A horizon of 2.6 censors about 20% of
    /// endpoint times.
    fn default() -> Self {
        Self {
            mu_r: -1.5,
            sigma_r: 1.5,
            mu_o: -3.5,
            sigma_o: 1.5,
            lambda: 0.75,
            gamma: 3.1,
            beta_tmt: 0.0,
            beta_mrd: 0.7,
            cens_prop_r: 0.05,
            cens_prop_o: 0.35,
            n_per_arm: 200,
            horizon: 2.6,
            replications: 200,
            seed: 20_150_101,
        }
    }
}

const KEYS: [&str; 14] = [
    "mu_r", "sigma_r", "mu_o", "sigma_o", "lambda", "gamma", "beta_tmt", "beta_mrd", "cens_prop_r",
    "cens_prop_o", "n_per_arm", "horizon", "replications", "seed",
];

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        for (name, v) in [("sigma_r", self.sigma_r), ("sigma_o", self.sigma_o), ("lambda", self.lambda), ("gamma", self.gamma), ("horizon", self.horizon)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("mu_r", self.mu_r), ("mu_o", self.mu_o), ("beta_tmt", self.beta_tmt), ("beta_mrd", self.beta_mrd)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        for (name, p) in [("cens_prop_r", self.cens_prop_r), ("cens_prop_o", self.cens_prop_o)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1), got {p}"));
            }
        }
        if self.n_per_arm < 10 {
            return bad(format!("n_per_arm must be at least 10, got {}", self.n_per_arm));
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let row = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { row, message: format!("expected key = value, got `{line}`") })?;
            let (key, value) = (key.trim(), value.trim());
            let float = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { row, message: format!("`{key}` needs a number, got `{value}`") })
            };
            let int = || {
                value
                    .parse::<u64>()
                    .map_err(|_| Error::Parse { row, message: format!("`{key}` needs an integer, got `{value}`") })
            };
            match key {
                "mu_r" => cfg.mu_r = float()?,
                "sigma_r" => cfg.sigma_r = float()?,
                "mu_o" => cfg.mu_o = float()?,
                "sigma_o" => cfg.sigma_o = float()?,
                "lambda" => cfg.lambda = float()?,
                "gamma" => cfg.gamma = float()?,
                "beta_tmt" => cfg.beta_tmt = float()?,
                "beta_mrd" => cfg.beta_mrd = float()?,
                "cens_prop_r" => cfg.cens_prop_r = float()?,
                "cens_prop_o" => cfg.cens_prop_o = float()?,
                "n_per_arm" => cfg.n_per_arm = int()? as usize,
                "horizon" => cfg.horizon = float()?,
                "replications" => cfg.replications = int()? as usize,
                "seed" => cfg.seed = int()?,
                other => {
                    return Err(Error::Parse {
                        row,
                        message: format!("unknown key `{other}`; expected one of {}", KEYS.join(", ")),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let floats = [
            ("mu_r", self.mu_r),
            ("sigma_r", self.sigma_r),
            ("mu_o", self.mu_o),
            ("sigma_o", self.sigma_o),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("beta_tmt", self.beta_tmt),
            ("beta_mrd", self.beta_mrd),
            ("cens_prop_r", self.cens_prop_r),
            ("cens_prop_o", self.cens_prop_o),
        ];
        for (k, v) in floats {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "n_per_arm = {}", self.n_per_arm);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// Limit of detection for an arm: the true Normal quantile at the
    /// configured censoring share, or `None` when nothing is censored.
    pub fn detection_limit(&self, tmt: u8) -> Option<f64> {
        let (mu, sigma, p) = if tmt == 0 {
            (self.mu_r, self.sigma_r, self.cens_prop_r)
        } else {
            (self.mu_o, self.sigma_o, self.cens_prop_o)
        };
        (p > 0.0).then(|| mu + sigma * std_normal_quantile(p))
    }

    /// Random stream for replication `r`.
    pub fn replication_rng(&self, r: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(r as u64);
        rng
    }
}

/// One simulated trial. Each row has `x_exact = [tmt]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub observations: Vec<SurvObservation>,
    /// Latent biomarker values before censoring.
    pub latent: Vec<f64>,
}

impl Trial {
    pub fn arm(&self, i: usize) -> u8 {
        self.observations[i].x_exact[0] as u8
    }

    /// Rows with the censored covariate imputed at its limit, covariates `[mrd, tmt]`.
    pub fn imputed(&self) -> Vec<ExactObservation> {
        self.observations.iter().map(SurvObservation::imputed).collect()
    }

    pub fn covariate_sample(&self) -> Vec<CensoredValue> {
        self.observations.iter().map(|o| o.x_cens).collect()
    }
}

/// Draws one trial: per arm, biomarker `X ~ N(μ_arm, σ_arm)`, event time by
/// inverting the Weibull PH survival function, administrative censoring at
/// the horizon, and left-censoring of `X` at the arm's detection limit.
pub fn generate_trial<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Trial> {
    cfg.validate()?;
    let mut observations = Vec::with_capacity(2 * cfg.n_per_arm);
    let mut latent = Vec::with_capacity(2 * cfg.n_per_arm);
    for tmt in [0u8, 1] {
        let (mu, sigma) = if tmt == 0 { (cfg.mu_r, cfg.sigma_r) } else { (cfg.mu_o, cfg.sigma_o) };
        let normal = Normal::new(mu, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let limit = cfg.detection_limit(tmt);
        for _ in 0..cfg.n_per_arm {
            let x = normal.sample(rng);
            let rate = cfg.lambda * (cfg.beta_tmt * tmt as f64 + cfg.beta_mrd * x).exp();
            let u: f64 = 1.0 - rng.random::<f64>();
            let z = (-u.ln() / rate).powf(1.0 / cfg.gamma);
            let (time, event) = if z <= cfg.horizon { (z, true) } else { (cfg.horizon, false) };
            let x_cens = match limit {
                Some(c) if x <= c => CensoredValue::left(c),
                _ => CensoredValue::exact(x),
            };
            // Times must be strictly positive.
            let time = time.max(f64::MIN_POSITIVE);
            observations.push(SurvObservation::new(time, event, x_cens, vec![tmt as f64])?);
            latent.push(x);
        }
    }
    Ok(Trial { observations, latent })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Censored-covariate Weibull regression.
    CensoredCovariate,
    /// Weibull regression with limit-of-detection imputation.
    WeibullImputed,
    /// Cox regression with limit-of-detection imputation.
    CoxImputed,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CensoredCovariate, Method::WeibullImputed, Method::CoxImputed];

    pub fn label(&self) -> &'static str {
        match self {
            Method::CensoredCovariate => "Weibull, censored covariate",
            Method::WeibullImputed => "Weibull, LOD imputation",
            Method::CoxImputed => "Cox, LOD imputation",
        }
    }
}

/// Estimates from one method on one trial; `lambda`/`gamma` are absent for Cox.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEstimate {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub beta_tmt: f64,
    pub beta_mrd: f64,
    pub p_value_tmt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub index: usize,
    /// Indexed like [`Method::ALL`]; `Err` holds the failure reason.
    pub estimates: Vec<std::result::Result<MethodEstimate, String>>,
    pub cens_share_r: f64,
    pub cens_share_o: f64,
    pub endpoint_cens_share: f64,
}

fn method_a(trial: &Trial, opts: &FitOptions) -> std::result::Result<MethodEstimate, String> {
    let pooled = fit_censored_sample(&trial.covariate_sample(), Family::Normal, opts).map_err(|e| e.to_string())?;
    if !pooled.converged {
        return Err("covariate density fit did not converge".into());
    }
    let names = CovariateNames::new("mrd", &["tmt"]);
    let fit = fit_censcov(&trial.observations, &pooled.density, &names, None, opts).map_err(|e| e.to_string())?;
    if !fit.converged {
        return Err("censored-covariate fit did not converge".into());
    }
    Ok(MethodEstimate {
        lambda: Some(fit.lambda),
        gamma: Some(fit.gamma),
        beta_mrd: fit.beta[0],
        beta_tmt: fit.beta[1],
        p_value_tmt: fit.coefficients[3].p_value,
    })
}

fn imputed_names() -> Vec<String> {
    vec!["mrd".to_string(), "tmt".to_string()]
}

fn method_b(imputed: &[ExactObservation], opts: &FitOptions) -> std::result::Result<MethodEstimate, String> {
    let fit = fit_weibull_l1(imputed, &imputed_names(), opts).map_err(|e| e.to_string())?;
    if !fit.converged {
        return Err("imputed Weibull fit did not converge".into());
    }
    let ph = convert_weibull(&fit, opts.conf_level).map_err(|e| e.to_string())?;
    Ok(MethodEstimate {
        lambda: Some(ph.lambda.estimate),
        gamma: Some(ph.gamma.estimate),
        beta_mrd: ph.beta[0].estimate,
        beta_tmt: ph.beta[1].estimate,
        p_value_tmt: ph.beta[1].p_value,
    })
}

fn method_c(imputed: &[ExactObservation], opts: &FitOptions) -> std::result::Result<MethodEstimate, String> {
    let fit = fit_cox(imputed, &imputed_names(), opts.conf_level).map_err(|e| e.to_string())?;
    if !fit.converged {
        return Err("Cox fit did not converge".into());
    }
    Ok(MethodEstimate {
        lambda: None,
        gamma: None,
        beta_mrd: fit.beta[0],
        beta_tmt: fit.beta[1],
        p_value_tmt: fit.coefficients[1].p_value,
    })
}

/// Generates trial `index` and fits all three methods to it.
pub fn run_replication(cfg: &SimConfig, index: usize, opts: &FitOptions) -> Result<ReplicationResult> {
    let mut rng = cfg.replication_rng(index);
    let trial = generate_trial(cfg, &mut rng)?;
    let imputed = trial.imputed();
    let n = cfg.n_per_arm as f64;
    let share = |tmt: u8| {
        trial
            .observations
            .iter()
            .filter(|o| o.x_exact[0] as u8 == tmt && !o.x_cens.is_exact())
            .count() as f64
            / n
    };
    let endpoint = trial.observations.iter().filter(|o| !o.event).count() as f64 / (2.0 * n);
    Ok(ReplicationResult {
        index,
        estimates: vec![method_a(&trial, opts), method_b(&imputed, opts), method_c(&imputed, opts)],
        cens_share_r: share(0),
        cens_share_o: share(1),
        endpoint_cens_share: endpoint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub parameter: String,
    pub truth: f64,
    pub mean_estimate: f64,
    /// `mean_estimate - truth`.
    pub bias: f64,
    /// Mean squared deviation from the truth.
    pub mse: f64,
    /// Variance of the estimates around their mean (divisor M).
    pub variance: f64,
    pub empirical_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub label: String,
    pub parameters: Vec<ParameterSummary>,
    /// Share of used replications rejecting `β_tmt = 0` at the 5% level.
    pub rejection_rate_tmt: f64,
    pub n_used: usize,
    pub n_failed: usize,
    pub failures: Vec<(usize, String)>,
}

impl MethodSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.parameter == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub methods: Vec<MethodSummary>,
    pub mean_cens_share_r: f64,
    pub mean_cens_share_o: f64,
    pub mean_endpoint_cens_share: f64,
}

impl SimReport {
    pub fn method(&self, m: Method) -> &MethodSummary {
        self.methods.iter().find(|s| s.method == m).expect("every method is summarised")
    }
}

/// Level of the type-I error check on `β_tmt`.
pub const TEST_LEVEL: f64 = 0.05;

fn summarise(name: &str, truth: f64, values: &[f64]) -> ParameterSummary {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / m;
    ParameterSummary {
        parameter: name.to_string(),
        truth,
        mean_estimate: mean,
        bias: mean - truth,
        mse,
        variance,
        empirical_se: variance.sqrt(),
    }
}

/// Aggregates replication results into per-method bias, MSE and rejection rates.
pub fn aggregate(cfg: &SimConfig, results: &[ReplicationResult]) -> SimReport {
    let methods = Method::ALL
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let mut used = Vec::new();
            let mut failures = Vec::new();
            for r in results {
                match &r.estimates[k] {
                    Ok(e) => used.push(e.clone()),
                    Err(msg) => failures.push((r.index, msg.clone())),
                }
            }
            let mut parameters = Vec::new();
            if !used.is_empty() {
                if method != Method::CoxImputed {
                    let lambda: Vec<f64> = used.iter().filter_map(|e| e.lambda).collect();
                    let gamma: Vec<f64> = used.iter().filter_map(|e| e.gamma).collect();
                    parameters.push(summarise("lambda", cfg.lambda, &lambda));
                    parameters.push(summarise("gamma", cfg.gamma, &gamma));
                }
                let tmt: Vec<f64> = used.iter().map(|e| e.beta_tmt).collect();
                let mrd: Vec<f64> = used.iter().map(|e| e.beta_mrd).collect();
                parameters.push(summarise("beta_tmt", cfg.beta_tmt, &tmt));
                parameters.push(summarise("beta_mrd", cfg.beta_mrd, &mrd));
            }
            let rejections = used
                .iter()
                .filter(|e| e.p_value_tmt.is_some_and(|p| p < TEST_LEVEL))
                .count();
            MethodSummary {
                method,
                label: method.label().to_string(),
                parameters,
                rejection_rate_tmt: if used.is_empty() { f64::NAN } else { rejections as f64 / used.len() as f64 },
                n_used: used.len(),
                n_failed: failures.len(),
                failures,
            }
        })
        .collect();
    let m = results.len().max(1) as f64;
    SimReport {
        config: cfg.clone(),
        methods,
        mean_cens_share_r: results.iter().map(|r| r.cens_share_r).sum::<f64>() / m,
        mean_cens_share_o: results.iter().map(|r| r.cens_share_o).sum::<f64>() / m,
        mean_endpoint_cens_share: results.iter().map(|r| r.endpoint_cens_share).sum::<f64>() / m,
    }
}

/// Runs `cfg.replications` replications in parallel and aggregates them.
pub fn run_study(cfg: &SimConfig, opts: &FitOptions) -> Result<SimReport> {
    cfg.validate()?;
    let results: Vec<ReplicationResult> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r, opts))
        .collect::<Result<_>>()?;
    Ok(aggregate(cfg, &results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let cfg = SimConfig { replications: 7, seed: 99, horizon: 3.25, ..Default::default() };
        assert_eq!(SimConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
    }

    #[test]
    fn kv_errors_carry_rows() {
        let e = SimConfig::from_kv_str("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, .. }));
        let e = SimConfig::from_kv_str("# comment\nlambda = x").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, .. }));
        assert!(SimConfig::from_kv_str("cens_prop_r = 1.0").is_err());
        assert!(SimConfig::from_kv_str("n_per_arm = 5").is_err());
    }

    #[test]
    fn no_censoring_gives_exact_covariates() {
        let cfg = SimConfig { cens_prop_r: 0.0, cens_prop_o: 0.0, ..Default::default() };
        let trial = generate_trial(&cfg, &mut cfg.replication_rng(0)).unwrap();
        assert_eq!(trial.observations.len(), 400);
        assert!(trial.observations.iter().all(|o| o.x_cens.is_exact()));
    }

    #[test]
    fn detection_limits_are_true_quantiles() {
        let cfg = SimConfig::default();
        let c = cfg.detection_limit(1).unwrap();
        assert!((crate::distributions::std_normal_cdf((c - cfg.mu_o) / cfg.sigma_o) - 0.35).abs() < 1e-12);
        let trial = generate_trial(&cfg, &mut cfg.replication_rng(3)).unwrap();
        for (o, x) in trial.observations.iter().zip(&trial.latent) {
            match o.x_cens.value() {
                Some(v) => assert_eq!(v, *x),
                None => assert!(*x <= o.x_cens.high().unwrap()),
            }
            assert!(o.time <= cfg.horizon);
            assert_eq!(o.event, o.time < cfg.horizon);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let cfg = SimConfig::default();
        let a = generate_trial(&cfg, &mut cfg.replication_rng(5)).unwrap();
        let b = generate_trial(&cfg, &mut cfg.replication_rng(5)).unwrap();
        let c = generate_trial(&cfg, &mut cfg.replication_rng(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mse_decomposes_into_bias_and_variance() {
        let s = summarise("x", 0.7, &[0.61, 0.74, 0.69, 0.83, 0.7]);
        assert!((s.mse - (s.bias * s.bias + s.variance)).abs() < 1e-15);
    }
}

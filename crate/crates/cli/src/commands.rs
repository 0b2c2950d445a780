use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use censcov::simulate::{Method, SimReport, TEST_LEVEL};
use censcov::{
    convert_weibull, fit_censcov, fit_censored_sample, fit_cox, fit_weibull_l1, normal_mean_diff, run_study,
    weibull_diag, AFTFit, CensoredValue, CovariateDensity, CovariateNames, ExactObservation, Family, FitOptions,
    SimConfig, SurvObservation, WeibullAFT,
};
use serde_json::json;

use crate::data::Dataset;
use crate::report::{coefficient_table, digest, grid, sig5};
use crate::{CensCovArgs, CliError, ConvertArgs, DiagArgs, Endpoint, MeanDiffArgs, OneSampleArgs, Outcome, SimulateArgs};

fn load(path: &Path) -> Result<(Dataset, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((Dataset::from_reader(bytes.as_slice())?, digest(&bytes)))
}

fn options(conf_level: f64) -> FitOptions {
    FitOptions { conf_level, ..FitOptions::default() }
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("fit results serialize")
}

fn family(text: &str) -> Result<Family, CliError> {
    text.parse::<Family>().map_err(|e| CliError::Input(e.to_string()))
}

/// Parses `family:p1,p2`.
fn density_spec(text: &str) -> Result<CovariateDensity, CliError> {
    let (fam, params) = text
        .split_once(':')
        .ok_or_else(|| CliError::Input(format!("density `{text}` must look like normal:MU,SIGMA")))?;
    let params: Vec<f64> = params
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Input(format!("bad density parameter `{p}`"))))
        .collect::<Result<_, _>>()?;
    CovariateDensity::new(family(fam)?, &params).map_err(|e| CliError::Input(e.to_string()))
}

fn exact_rows(ds: &Dataset, e: &Endpoint) -> Result<Vec<ExactObservation>, CliError> {
    let times = ds.times(&e.time)?;
    let events = ds.binary(&e.event)?;
    let covs = e.covars.iter().map(|c| ds.numeric(c)).collect::<Result<Vec<_>, _>>()?;
    Ok((0..ds.len())
        .map(|i| ExactObservation { time: times[i], event: events[i], covariates: covs.iter().map(|c| c[i]).collect() })
        .collect())
}

fn counts_line(n: usize, events: usize) -> String {
    format!("n = {n}, events = {events}")
}

pub fn censcov(a: &CensCovArgs, conf: f64) -> Result<Outcome, CliError> {
    let (ds, input_digest) = load(&a.endpoint.data)?;
    let base = exact_rows(&ds, &a.endpoint)?;
    let cens = ds.censored(&a.cens_low, &a.cens_high)?;
    let data: Vec<SurvObservation> = base
        .into_iter()
        .zip(&cens)
        .map(|(o, c)| SurvObservation::new(o.time, o.event, *c, o.covariates))
        .collect::<Result<_, _>>()?;
    let opts = options(conf);
    let cens_name = a
        .cens_name
        .clone()
        .unwrap_or_else(|| a.cens_low.strip_suffix(".low").unwrap_or(&a.cens_low).to_string());
    let exact: Vec<&str> = a.endpoint.covars.iter().map(String::as_str).collect();
    let names = CovariateNames::new(cens_name, &exact);

    let (density, pooled) = match &a.density {
        Some(spec) => (density_spec(spec)?, None),
        None => {
            let fit = fit_censored_sample(&cens, family(&a.density_family)?, &opts)?;
            (fit.density.clone(), Some(fit))
        }
    };
    let fit = fit_censcov(&data, &density, &names, None, &opts)?;

    let mut table = String::new();
    if let Some(p) = &pooled {
        let rows: Vec<_> = p.coefficients.iter().collect();
        table += &coefficient_table("Covariate density (pooled censored sample):", &rows, &[]);
        table.push('\n');
    }
    let rows: Vec<_> = fit.coefficients.iter().collect();
    table += &coefficient_table(
        "Coefficients:",
        &rows,
        &[
            format!("AIC: {}", sig5(fit.aic)),
            format!("{}, censored covariate rows = {}", counts_line(fit.n, fit.n_events), fit.n_cens_cov),
        ],
    );
    Ok(Outcome {
        payload: json!({ "fit": to_json(&fit), "density_fit": pooled.as_ref().map(to_json) }),
        table,
        warnings: fit.warnings.clone(),
        input_digest: Some(input_digest),
    })
}

pub fn weibullreg(e: &Endpoint, conf: f64) -> Result<Outcome, CliError> {
    let (ds, input_digest) = load(&e.data)?;
    let rows = exact_rows(&ds, e)?;
    let fit = fit_weibull_l1(&rows, &e.covars, &options(conf))?;
    let aft = fit.coefficients(conf)?;
    let ph = convert_weibull(&fit, conf)?;
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push("optimizer stopped before meeting its convergence criterion".to_string());
    }
    let aft_rows: Vec<_> = aft.iter().collect();
    let mut ph_rows = vec![&ph.lambda, &ph.gamma];
    ph_rows.extend(&ph.beta);
    let hr_rows: Vec<_> = ph.hazard_ratios.iter().collect();
    let mut table = coefficient_table("AFT coefficients:", &aft_rows, &[]);
    table.push('\n');
    table += &coefficient_table("Weibull PH parametrization:", &ph_rows, &[]);
    if !hr_rows.is_empty() {
        table.push('\n');
        table += &coefficient_table("Hazard ratios:", &hr_rows, &[]);
    }
    let _ = writeln!(table, "AIC: {}\n{}", sig5(fit.aic()), counts_line(fit.n, fit.n_events));
    Ok(Outcome {
        payload: json!({ "aft": to_json(&fit), "aft_coefficients": to_json(&aft), "ph": to_json(&ph), "aic": fit.aic() }),
        table,
        warnings,
        input_digest: Some(input_digest),
    })
}

pub fn cox(e: &Endpoint, conf: f64) -> Result<Outcome, CliError> {
    let (ds, input_digest) = load(&e.data)?;
    let rows = exact_rows(&ds, e)?;
    let fit = fit_cox(&rows, &e.covars, conf)?;
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push("partial likelihood did not converge; coefficients may be infinite".to_string());
    }
    let hr: Vec<_> = fit.coefficients.iter().map(|c| c.mapped(c.name.clone(), f64::exp)).collect();
    let mut table = coefficient_table("Coefficients:", &fit.coefficients.iter().collect::<Vec<_>>(), &[]);
    table.push('\n');
    table += &coefficient_table("Hazard ratios:", &hr.iter().collect::<Vec<_>>(), &[]);
    let _ = writeln!(table, "Partial log-likelihood: {}", sig5(fit.partial_loglik));
    Ok(Outcome { payload: to_json(&fit), table, warnings, input_digest: Some(input_digest) })
}

pub fn onesample(a: &OneSampleArgs, conf: f64) -> Result<Outcome, CliError> {
    let (ds, input_digest) = load(&a.data)?;
    let sample = ds.censored(&a.low, &a.high)?;
    let fit = fit_censored_sample(&sample, family(&a.family)?, &options(conf))?;
    let table = coefficient_table(
        &format!("{} fit:", fit.family),
        &fit.coefficients.iter().collect::<Vec<_>>(),
        &[
            format!("Log-likelihood: {}", sig5(fit.loglik)),
            format!(
                "exact = {}, left = {}, right = {}, interval = {}",
                fit.n_exact, fit.n_left, fit.n_right, fit.n_interval
            ),
        ],
    );
    let warnings = if fit.converged { vec![] } else { vec!["optimizer did not converge".to_string()] };
    Ok(Outcome { payload: to_json(&fit), table, warnings, input_digest: Some(input_digest) })
}

pub fn meandiff(a: &MeanDiffArgs, conf: f64) -> Result<Outcome, CliError> {
    let (ds, input_digest) = load(&a.data)?;
    let values = ds.censored(&a.low, &a.high)?;
    let groups = ds.labels(&a.group)?;
    let levels: Vec<&String> = groups.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if levels.len() != 2 {
        return Err(CliError::Input(format!("`{}` must have exactly two levels, found {}", a.group, levels.len())));
    }
    let pick = |level: &String| -> Vec<CensoredValue> {
        values.iter().zip(&groups).filter(|(_, g)| *g == level).map(|(v, _)| *v).collect()
    };
    let fit = normal_mean_diff(&pick(levels[0]), &pick(levels[1]), &options(conf))?;
    let table = coefficient_table(
        &format!("Sample 1 = {}, sample 2 = {}", levels[0], levels[1]),
        &fit.rows(),
        &[format!("delta = mu1 - mu2; n1 = {}, n2 = {}", fit.sample1.n(), fit.sample2.n())],
    );
    Ok(Outcome {
        payload: json!({ "groups": [levels[0], levels[1]], "fit": to_json(&fit) }),
        table,
        warnings: vec![],
        input_digest: Some(input_digest),
    })
}

pub fn diag(a: &DiagArgs) -> Result<Outcome, CliError> {
    let (ds, input_digest) = load(&a.data)?;
    let times = ds.times(&a.time)?;
    let events = ds.binary(&a.event)?;
    let strata = a.strata.as_ref().map(|s| ds.labels(s)).transpose()?;
    let d = weibull_diag(&times, &events, strata.as_deref())?;
    let write = |path: &Path, text: String| {
        std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    };
    if let Some(p) = &a.csv {
        write(p, d.to_csv())?;
    }
    if let Some(p) = &a.svg {
        write(p, d.to_svg())?;
    }
    let header = ["stratum", "points", "slope (gamma)", "intercept (log lambda)", "lambda"].map(String::from);
    let rows: Vec<Vec<String>> = d
        .series
        .iter()
        .map(|s| {
            vec![
                s.stratum.clone(),
                s.log_time.len().to_string(),
                sig5(s.slope),
                sig5(s.intercept),
                sig5(s.intercept.exp()),
            ]
        })
        .collect();
    let mut table = String::from("Weibull diagnostic: log(-log S) against log t\n");
    table += &grid(&header, &rows);
    let warnings = d.skipped.iter().map(|(s, why)| format!("stratum {s} skipped: {why}")).collect();
    Ok(Outcome { payload: to_json(&d), table, warnings, input_digest: Some(input_digest) })
}

fn parse_matrix(text: &str, n: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Input(format!("bad covariance entry `{v}`"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Input(format!("covariance must be {n} x {n}")));
    }
    Ok(rows)
}

pub fn convert(a: &ConvertArgs, conf: f64) -> Result<Outcome, CliError> {
    let d = a.alpha.len();
    let names = if a.names.is_empty() {
        (1..=d).map(|i| format!("x{i}")).collect()
    } else if a.names.len() == d {
        a.names.clone()
    } else {
        return Err(CliError::Input(format!("{} names given for {d} coefficients", a.names.len())));
    };
    let params = WeibullAFT::new(a.mu, a.log_sigma, a.alpha.clone()).map_err(|e| CliError::Input(e.to_string()))?;
    let covariance = a.covariance.as_deref().map(|c| parse_matrix(c, d + 2)).transpose()?;
    let fit = AFTFit {
        params,
        covariance,
        covariate_names: names,
        loglik: f64::NAN,
        n: 0,
        n_events: 0,
        converged: true,
    };
    let ph = convert_weibull(&fit, conf)?;
    let mut rows = vec![&ph.lambda, &ph.gamma];
    rows.extend(&ph.beta);
    let table = coefficient_table("Weibull PH parametrization:", &rows, &[]);
    let warnings = if ph.inference_available {
        vec![]
    } else {
        vec!["no covariance given; estimates only".to_string()]
    };
    Ok(Outcome { payload: to_json(&ph), table, warnings, input_digest: None })
}

fn sim_table(r: &SimReport) -> String {
    let params = ["lambda", "gamma", "beta_tmt", "beta_mrd"];
    let header: Vec<String> = std::iter::once(String::new()).chain(params.iter().map(|p| p.to_string())).collect();
    let truth = [r.config.lambda, r.config.gamma, r.config.beta_tmt, r.config.beta_mrd];
    let block = |pick: &dyn Fn(&censcov::simulate::ParameterSummary) -> f64, relative: bool| {
        let mut rows = vec![std::iter::once("True value".to_string()).chain(truth.iter().map(|t| sig5(*t))).collect()];
        let a = r.method(Method::CensoredCovariate);
        for m in &r.methods {
            let mut row = vec![m.label.clone()];
            for p in params {
                let cell = match (m.parameter(p), a.parameter(p)) {
                    (Some(s), Some(base)) if relative && m.method != Method::CensoredCovariate => {
                        format!("x{}", sig5(pick(s) / pick(base)))
                    }
                    (Some(s), _) => sig5(pick(s)),
                    (None, _) => String::new(),
                };
                row.push(cell);
            }
            rows.push(row);
        }
        grid(&header, &rows)
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Simulation: M = {}, n = {} per arm, seed = {}",
        r.config.replications, r.config.n_per_arm, r.config.seed
    );
    let _ = writeln!(
        out,
        "Realized censoring: covariate {:.3} (control) / {:.3} (experimental), endpoint {:.3}\n",
        r.mean_cens_share_r, r.mean_cens_share_o, r.mean_endpoint_cens_share
    );
    out += "Bias\n";
    out += &block(&|s| s.bias, false);
    out += "\nBias relative to the censored-covariate fit\n";
    out += &block(&|s| s.bias.abs(), true);
    out += "\nMSE\n";
    out += &block(&|s| s.mse, false);
    out += "\nMSE relative to the censored-covariate fit\n";
    out += &block(&|s| s.mse, true);
    let _ = writeln!(out, "\nRejection rate for beta_tmt = 0 at level {TEST_LEVEL}");
    let rows: Vec<Vec<String>> = r
        .methods
        .iter()
        .map(|m| vec![m.label.clone(), sig5(m.rejection_rate_tmt), m.n_used.to_string(), m.n_failed.to_string()])
        .collect();
    out += &grid(&["method", "rate", "used", "failed"].map(String::from), &rows);
    out
}

pub fn simulate(a: &SimulateArgs, seed: Option<u64>, conf: f64) -> Result<Outcome, CliError> {
    let (mut cfg, input_digest) = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let cfg = SimConfig::from_kv_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            (cfg, Some(digest(text.as_bytes())))
        }
        None => (SimConfig::default(), None),
    };
    if let Some(m) = a.replications {
        cfg.replications = m;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let report = run_study(&cfg, &options(conf))?;
    let warnings = report
        .methods
        .iter()
        .filter(|m| m.n_failed > 0)
        .map(|m| format!("{}: {} replications excluded after failed fits", m.label, m.n_failed))
        .collect();
    Ok(Outcome { table: sim_table(&report), payload: to_json(&report), warnings, input_digest })
}

//! Cox proportional-hazards regression by Newton–Raphson on the Breslow
//! partial likelihood.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{critical_value, Coefficient};
use crate::weibull_reg::ExactObservation;

const SCORE_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
// A monotone likelihood shows up as a large standardized coefficient or as
// curvature collapsing towards zero (SE·sd(x) large).
const DIVERGENCE_BOUND: f64 = 25.0;
const FLAT_BOUND: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    /// Infinite for coefficients carrying no information.
    pub std_errors: Vec<f64>,
    pub coefficients: Vec<Coefficient>,
    pub partial_loglik: f64,
    pub max_score: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Derivs {
    loglik: f64,
    score: DVector<f64>,
    info: DMatrix<f64>,
}

/// Breslow partial log-likelihood with score and information. `order`
/// lists rows by decreasing time; `x` is centred.
fn partial_derivs(beta: &DVector<f64>, x: &[DVector<f64>], data: &[ExactObservation], order: &[usize]) -> Derivs {
    let p = beta.len();
    let mut loglik = 0.0;
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut k = 0;
    while k < order.len() {
        let t = data[order[k]].time;
        let mut end = k;
        while end < order.len() && data[order[end]].time == t {
            let i = order[end];
            let w = x[i].dot(beta).exp();
            s0 += w;
            s1.axpy(w, &x[i], 1.0);
            s2.ger(w, &x[i], &x[i], 1.0);
            end += 1;
        }
        let mut d = 0.0;
        for &i in &order[k..end] {
            if data[i].event {
                d += 1.0;
                loglik += x[i].dot(beta);
                score += &x[i];
            }
        }
        if d > 0.0 {
            let mean = &s1 / s0;
            loglik -= d * s0.ln();
            score.axpy(-d, &mean, 1.0);
            info += (&s2 / s0 - &mean * mean.transpose()) * d;
        }
        k = end;
    }
    Derivs { loglik, score, info }
}

fn prepare(data: &[ExactObservation], p: usize) -> Result<(Vec<DVector<f64>>, Vec<usize>, Vec<f64>)> {
    for (i, obs) in data.iter().enumerate() {
        if !(obs.time > 0.0 && obs.time.is_finite()) {
            return Err(Error::Domain(format!("row {}: time must be positive, got {}", i + 1, obs.time)));
        }
        if obs.covariates.len() != p {
            return Err(Error::InvalidParameter(format!(
                "row {}: expected {p} covariates, found {}",
                i + 1,
                obs.covariates.len()
            )));
        }
    }
    if !data.iter().any(|o| o.event) {
        return Err(Error::NoEvents);
    }
    let n = data.len() as f64;
    let means: Vec<f64> = (0..p)
        .map(|j| data.iter().map(|o| o.covariates[j]).sum::<f64>() / n)
        .collect();
    let sds = (0..p)
        .map(|j| {
            (data.iter().map(|o| (o.covariates[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    let x = data
        .iter()
        .map(|o| DVector::from_iterator(p, o.covariates.iter().zip(&means).map(|(v, m)| v - m)))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[b].time.total_cmp(&data[a].time));
    Ok((x, order, sds))
}

/// Breslow partial log-likelihood at `beta`.
pub fn partial_loglik(beta: &[f64], data: &[ExactObservation]) -> Result<f64> {
    let (x, order, _) = prepare(data, beta.len())?;
    Ok(partial_derivs(&DVector::from_column_slice(beta), &x, data, &order).loglik)
}

fn restrict(v: &DVector<f64>, active: &[usize]) -> DVector<f64> {
    DVector::from_iterator(active.len(), active.iter().map(|&i| v[i]))
}

fn restrict_matrix(m: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(active.len(), active.len(), |a, b| m[(active[a], active[b])])
}

/// Fits the Cox model. Coefficients whose covariate carries no information
/// at the start stay at 0 with an infinite standard error.
pub fn fit_cox(data: &[ExactObservation], names: &[String], conf_level: f64) -> Result<CoxFit> {
    let p = names.len();
    let z = critical_value(conf_level)?;
    let (x, order, sds) = prepare(data, p)?;
    let mut beta = DVector::zeros(p);
    let mut cur = partial_derivs(&beta, &x, data, &order);
    let scale = cur.info.diagonal().amax().max(1.0);
    let active: Vec<usize> = (0..p).filter(|&j| cur.info[(j, j)] > 1e-12 * scale).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        let score = restrict(&cur.score, &active);
        if score.amax() < SCORE_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let info = restrict_matrix(&cur.info, &active);
        let Some(chol) = info.cholesky() else { break };
        let step = chol.solve(&score);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = beta.clone();
            for (a, &j) in active.iter().enumerate() {
                trial[j] += t * step[a];
            }
            let next = partial_derivs(&trial, &x, data, &order);
            if next.loglik.is_finite() && next.loglik >= cur.loglik - 1e-12 * cur.loglik.abs().max(1.0) {
                beta = trial;
                cur = next;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let mut std_errors = vec![f64::INFINITY; p];
    if let Some(inv) = restrict_matrix(&cur.info, &active).cholesky().map(|c| c.inverse()) {
        for (a, &j) in active.iter().enumerate() {
            std_errors[j] = inv[(a, a)].sqrt();
        }
    }
    if active
        .iter()
        .any(|&j| (beta[j] * sds[j]).abs() > DIVERGENCE_BOUND || !(std_errors[j] * sds[j] <= FLAT_BOUND))
    {
        converged = false;
    }
    let coefficients = (0..p)
        .map(|j| {
            if std_errors[j].is_finite() {
                Coefficient::wald(names[j].clone(), beta[j], Some(std_errors[j]), Some(0.0), z)
            } else {
                Coefficient::wald(names[j].clone(), beta[j], Some(f64::INFINITY), None, z)
            }
        })
        .collect();
    Ok(CoxFit {
        beta: beta.iter().copied().collect(),
        std_errors,
        coefficients,
        partial_loglik: cur.loglik,
        max_score: restrict(&cur.score, &active).amax(),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(time: f64, event: bool, x: &[f64]) -> ExactObservation {
        ExactObservation { time, event, covariates: x.to_vec() }
    }

    fn names(p: usize) -> Vec<String> {
        (1..=p).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn zero_covariate_has_infinite_se() {
        let data = vec![
            obs(1.0, true, &[0.0, 1.0]),
            obs(2.0, true, &[0.0, 0.0]),
            obs(3.0, false, &[0.0, 1.0]),
            obs(4.0, true, &[0.0, 0.0]),
            obs(5.0, true, &[0.0, 1.0]),
        ];
        let fit = fit_cox(&data, &names(2), 0.95).unwrap();
        assert_eq!(fit.beta[0], 0.0);
        assert!(fit.std_errors[0].is_infinite());
        assert!(fit.coefficients[0].p_value.is_none());
        assert!(fit.std_errors[1].is_finite());
        assert!(fit.converged);
    }

    #[test]
    fn ties_use_breslow_denominator() {
        // Two events tied at t=1 with everyone at risk.
        let data = vec![obs(1.0, true, &[1.0]), obs(1.0, true, &[0.0]), obs(2.0, true, &[1.0])];
        let b: f64 = 0.3;
        let ll = partial_loglik(&[b], &data).unwrap();
        // The t=2 term is zero; centering cancels between numerator and denominator.
        let expected = b - 2.0 * (2.0 * b.exp() + 1.0).ln();
        assert!((ll - expected).abs() < 1e-12, "{ll} vs {expected}");
    }

    #[test]
    fn separation_is_flagged() {
        let data = vec![
            obs(1.0, true, &[1.0]),
            obs(2.0, true, &[1.0]),
            obs(3.0, true, &[0.0]),
            obs(4.0, true, &[0.0]),
        ];
        let fit = fit_cox(&data, &names(1), 0.95).unwrap();
        assert!(!fit.converged, "{fit:?}");
    }

    #[test]
    fn no_events() {
        let data = vec![obs(1.0, false, &[1.0]), obs(2.0, false, &[0.0])];
        assert!(matches!(fit_cox(&data, &names(1), 0.95), Err(Error::NoEvents)));
    }
}

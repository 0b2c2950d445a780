//! Derivative-free maximization and numerical derivatives.
//!
//! [`maximize`] runs Nelder–Mead on coordinates that may be log-transformed
//! to keep them positive, restarts once from the incumbent, and finishes
//! with a guarded Newton polish. [`hessian`] uses central differences with
//! Richardson extrapolation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a coordinate is represented while optimizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    /// Optimized as `log x`; the natural value stays positive.
    Log,
}

impl Transform {
    fn forward(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
        }
    }

    fn inverse(self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimSettings {
    /// Simplex value spread, relative to `1 + |f|`, below which the search stops.
    pub ftol: f64,
    pub max_evals: usize,
    /// Edge length of the starting simplex in transformed coordinates.
    pub initial_step: f64,
    pub restarts: usize,
    /// Newton iterations after the simplex search; 0 disables the polish.
    pub polish_steps: usize,
}

impl Default for OptimSettings {
    fn default() -> Self {
        Self {
            ftol: 1e-10,
            max_evals: 20_000,
            initial_step: 0.1,
            restarts: 1,
            polish_steps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    /// Maximizer on the natural scale.
    pub argmax: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub function_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianSettings {
    pub richardson_steps: usize,
    /// Step relative to `max(|x_i|, 1)`.
    pub initial_step: f64,
}

impl Default for HessianSettings {
    fn default() -> Self {
        Self { richardson_steps: 4, initial_step: 1e-4 }
    }
}

struct Counted<'a, F> {
    f: &'a F,
    transforms: &'a [Transform],
    evals: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<'_, F> {
    fn natural(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.transforms).map(|(v, t)| t.inverse(*v)).collect()
    }

    /// Negated objective in transformed coordinates; infeasible points map to +inf.
    fn cost(&mut self, y: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(&self.natural(y));
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    }
}

struct SimplexOutcome {
    best: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(
    obj: &mut Counted<'_, F>,
    start: &[f64],
    start_cost: f64,
    s: &OptimSettings,
    budget: usize,
) -> Result<SimplexOutcome> {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), start_cost)];
    let mut infeasible = Vec::new();
    for i in 0..n {
        let mut step = s.initial_step.max(1e-8 * start[i].abs());
        let mut vertex = None;
        for _ in 0..30 {
            for sign in [1.0, -1.0] {
                let mut y = start.to_vec();
                y[i] += sign * step;
                let c = obj.cost(&y);
                if c.is_finite() {
                    vertex = Some((y, c));
                    break;
                }
            }
            if vertex.is_some() {
                break;
            }
            step *= 0.5;
        }
        match vertex {
            Some(v) => simplex.push(v),
            None => infeasible.push(i),
        }
    }
    if !infeasible.is_empty() {
        return Err(Error::Optimization(format!(
            "objective is infeasible around the start along coordinates {infeasible:?}"
        )));
    }

    let start_evals = obj.evals;
    let mut iterations = 0;
    let mut converged = false;
    while obj.evals - start_evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if n == 0 || (worst - best).abs() <= s.ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(1.0);
        let fr = obj.cost(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(2.0);
            let fe = obj.cost(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < simplex[n].1 {
                let p = along(0.5);
                let c = obj.cost(&p);
                (p, c)
            } else {
                let p = along(-0.5);
                let c = obj.cost(&p);
                (p, c)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for (v, c) in simplex.iter_mut().skip(1) {
                    for (x, a) in v.iter_mut().zip(&anchor) {
                        *x = a + 0.5 * (*x - a);
                    }
                    *c = obj.cost(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (best, cost) = simplex.swap_remove(0);
    Ok(SimplexOutcome { best, cost, converged, iterations })
}

fn newton_polish<F: Fn(&[f64]) -> f64>(
    obj: &mut Counted<'_, F>,
    mut y: Vec<f64>,
    mut cost: f64,
    steps: usize,
) -> (Vec<f64>, f64) {
    let settings = HessianSettings { richardson_steps: 2, initial_step: 1e-4 };
    for _ in 0..steps {
        let mut g = |z: &[f64]| -obj.cost(z);
        let grad = gradient(&mut g, &y);
        let hess = hessian_mut(&mut g, &y, &settings);
        let neg = -hess;
        let Some(chol) = neg.cholesky() else { break };
        let step = chol.solve(&DVector::from_vec(grad));
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        let candidate: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
        let c = obj.cost(&candidate);
        if c <= cost {
            let size = step.amax();
            y = candidate;
            cost = c;
            if size < 1e-12 {
                break;
            }
        } else {
            break;
        }
    }
    (y, cost)
}

/// Maximizes `f` starting from `x0`. Coordinates marked [`Transform::Log`]
/// must start positive and are reported on the natural scale.
pub fn maximize<F>(f: F, x0: &[f64], transforms: &[Transform], s: &OptimSettings) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    if x0.len() != transforms.len() {
        return Err(Error::InvalidParameter(format!(
            "{} starting values but {} transforms",
            x0.len(),
            transforms.len()
        )));
    }
    let bad: Vec<usize> = x0
        .iter()
        .zip(transforms)
        .enumerate()
        .filter(|(_, (x, t))| !x.is_finite() || (**t == Transform::Log && **x <= 0.0))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::Optimization(format!(
            "starting values are invalid for their transforms at coordinates {bad:?}"
        )));
    }
    let mut obj = Counted { f: &f, transforms, evals: 0 };
    let y0: Vec<f64> = x0.iter().zip(transforms).map(|(x, t)| t.forward(*x)).collect();
    let c0 = obj.cost(&y0);
    if !c0.is_finite() {
        return Err(Error::Optimization("objective is not finite at the starting point".into()));
    }

    let mut outcome = nelder_mead(&mut obj, &y0, c0, s, s.max_evals)?;
    let mut iterations = outcome.iterations;
    for _ in 0..s.restarts {
        let remaining = s.max_evals.saturating_sub(obj.evals);
        if remaining == 0 {
            break;
        }
        let again = nelder_mead(&mut obj, &outcome.best, outcome.cost, s, remaining)?;
        iterations += again.iterations;
        outcome = SimplexOutcome { iterations, ..again };
    }
    let converged = outcome.converged;
    let (y, cost) = if s.polish_steps > 0 {
        newton_polish(&mut obj, outcome.best, outcome.cost, s.polish_steps)
    } else {
        (outcome.best, outcome.cost)
    };

    Ok(OptimResult {
        argmax: obj.natural(&y),
        value: -cost,
        converged: converged && cost.is_finite(),
        iterations,
        function_evals: obj.evals,
    })
}

// Relative for |x| > 1, absolute below: tiny steps near zero drown in rounding.
fn step_for(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient with one Richardson refinement.
pub fn gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> Vec<f64> {
    let mut z = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step_for(x[i], 1e-4);
            let mut central = |h: f64| {
                z[i] = x[i] + h;
                let up = f(&z);
                z[i] = x[i] - h;
                let down = f(&z);
                z[i] = x[i];
                (up - down) / (2.0 * h)
            };
            let coarse = central(h);
            let fine = central(0.5 * h);
            (4.0 * fine - coarse) / 3.0
        })
        .collect()
}

fn richardson(mut estimates: Vec<f64>) -> f64 {
    let mut factor = 4.0;
    while estimates.len() > 1 {
        estimates = estimates
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 4.0;
    }
    estimates[0]
}

fn hessian_mut<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], s: &HessianSettings) -> DMatrix<f64> {
    let n = x.len();
    let r = s.richardson_steps.max(2);
    let base: Vec<f64> = x.iter().map(|v| step_for(*v, s.initial_step)).collect();
    let f0 = f(x);
    let mut z = x.to_vec();
    let mut eval = |z: &mut Vec<f64>, moves: &[(usize, f64)]| {
        for &(i, d) in moves {
            z[i] = x[i] + d;
        }
        let v = f(z);
        for &(i, _) in moves {
            z[i] = x[i];
        }
        v
    };
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let est = (0..r)
            .map(|k| {
                let hi = base[i] / 2f64.powi(k as i32);
                let up = eval(&mut z, &[(i, hi)]);
                let down = eval(&mut z, &[(i, -hi)]);
                (up - 2.0 * f0 + down) / (hi * hi)
            })
            .collect();
        h[(i, i)] = richardson(est);
        for j in 0..i {
            let est = (0..r)
                .map(|k| {
                    let scale = 2f64.powi(k as i32);
                    let (hi, hj) = (base[i] / scale, base[j] / scale);
                    let pp = eval(&mut z, &[(i, hi), (j, hj)]);
                    let pm = eval(&mut z, &[(i, hi), (j, -hj)]);
                    let mp = eval(&mut z, &[(i, -hi), (j, hj)]);
                    let mm = eval(&mut z, &[(i, -hi), (j, -hj)]);
                    (pp - pm - mp + mm) / (4.0 * hi * hj)
                })
                .collect();
            let v = richardson(est);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Numerical Hessian of `f` at `x`. The result is exactly symmetric.
pub fn hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], s: &HessianSettings) -> Result<DMatrix<f64>> {
    if s.richardson_steps < 2 {
        return Err(Error::InvalidParameter("richardson_steps must be at least 2".into()));
    }
    let mut g = |z: &[f64]| f(z);
    Ok(hessian_mut(&mut g, x, s))
}

/// Replaces a matrix by the average of itself and its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of the negated Hessian (the observed information), or `None`
/// when the information is not positive definite.
pub fn covariance_from_hessian(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if h.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let info = -symmetrize(h);
    let cov = info.cholesky()?.inverse();
    if cov.diagonal().iter().all(|v| *v > 0.0 && v.is_finite()) {
        Some(cov)
    } else {
        None
    }
}

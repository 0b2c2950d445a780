//! Parametric building blocks: the three Weibull parametrizations used for the
//! endpoint, and the covariate densities `f_θ` used for the censored covariate.
//!
//! The proportional-hazards form is the working parametrization of the
//! regression code:
//!
//! ```text
//! f(z) = λ γ z^(γ-1) exp(-λ z^γ)      S(z) = exp(-λ z^γ)      h(z) = λ γ z^(γ-1)
//! ```
//!
//! The shape/scale form `(a, b)` has `γ = a`, `λ = b^(-a)`. The AFT form
//! `(μ, log σ, α)` describes `log Z = μ + αᵀx + σ W` with `W` standard
//! minimum extreme value, and maps onto the PH form through `γ = 1/σ`,
//! `λ = exp(-μ/σ)`, `β = -α/σ`.

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Standard normal CDF, accurate in both tails.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    let z = -SQRT_2 * erfc_inv(2.0 * p);
    if !z.is_finite() {
        return z;
    }
    // One Newton step against the more accurate CDF.
    z - (std_normal_cdf(z) - p) / std_normal_pdf(z)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_time(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("survival time must be positive and finite, got {z}")))
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {value}")))
    }
}

/// Weibull distribution in proportional-hazards form: rate `lambda`, shape `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullPH {
    lambda: f64,
    gamma: f64,
}

impl WeibullPH {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("gamma", gamma)?;
        Ok(Self { lambda, gamma })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Cumulative hazard `λ z^γ`.
    pub fn cumulative_hazard(&self, z: f64) -> Result<f64> {
        check_time(z)?;
        Ok(self.lambda * z.powf(self.gamma))
    }

    /// Log density, evaluated directly in log space.
    pub fn ln_pdf(&self, z: f64) -> Result<f64> {
        check_time(z)?;
        let ln_z = z.ln();
        Ok(self.lambda.ln() + self.gamma.ln() + (self.gamma - 1.0) * ln_z
            - self.lambda * (self.gamma * ln_z).exp())
    }

    pub fn pdf(&self, z: f64) -> Result<f64> {
        self.ln_pdf(z).map(f64::exp)
    }

    pub fn ln_survival(&self, z: f64) -> Result<f64> {
        self.cumulative_hazard(z).map(|h| -h)
    }

    pub fn survival(&self, z: f64) -> Result<f64> {
        self.ln_survival(z).map(f64::exp)
    }

    pub fn hazard(&self, z: f64) -> Result<f64> {
        check_time(z)?;
        Ok(self.lambda * self.gamma * z.powf(self.gamma - 1.0))
    }

    pub fn to_shape_scale(&self) -> WeibullShapeScale {
        WeibullShapeScale {
            a: self.gamma,
            b: self.lambda.powf(-1.0 / self.gamma),
        }
    }

    /// AFT parameters for this baseline together with PH coefficients `beta`.
    pub fn to_aft(&self, beta: &[f64]) -> WeibullAFT {
        let sigma = 1.0 / self.gamma;
        WeibullAFT {
            mu: -self.lambda.ln() * sigma,
            log_sigma: sigma.ln(),
            alpha: beta.iter().map(|b| -b * sigma).collect(),
        }
    }
}

/// Weibull distribution in shape/scale form, `f(z) = (a/b)(z/b)^(a-1) exp(-(z/b)^a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullShapeScale {
    a: f64,
    b: f64,
}

impl WeibullShapeScale {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        check_positive("shape", shape)?;
        check_positive("scale", scale)?;
        Ok(Self { a: shape, b: scale })
    }

    pub fn shape(&self) -> f64 {
        self.a
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    pub fn ln_pdf(&self, z: f64) -> Result<f64> {
        check_time(z)?;
        let ln_ratio = z.ln() - self.b.ln();
        Ok(self.a.ln() - self.b.ln() + (self.a - 1.0) * ln_ratio - (self.a * ln_ratio).exp())
    }

    pub fn pdf(&self, z: f64) -> Result<f64> {
        self.ln_pdf(z).map(f64::exp)
    }

    pub fn survival(&self, z: f64) -> Result<f64> {
        check_time(z)?;
        Ok((-(z / self.b).powf(self.a)).exp())
    }

    pub fn to_ph(&self) -> WeibullPH {
        WeibullPH {
            lambda: self.b.powf(-self.a),
            gamma: self.a,
        }
    }
}

impl From<WeibullPH> for WeibullShapeScale {
    fn from(p: WeibullPH) -> Self {
        p.to_shape_scale()
    }
}

impl From<WeibullShapeScale> for WeibullPH {
    fn from(p: WeibullShapeScale) -> Self {
        p.to_ph()
    }
}

/// Weibull regression in accelerated-failure-time form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullAFT {
    pub mu: f64,
    pub log_sigma: f64,
    pub alpha: Vec<f64>,
}

impl WeibullAFT {
    pub fn new(mu: f64, log_sigma: f64, alpha: Vec<f64>) -> Result<Self> {
        if !mu.is_finite() || !log_sigma.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("AFT parameters must be finite".into()));
        }
        Ok(Self { mu, log_sigma, alpha })
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    /// Baseline PH parameters and PH coefficients.
    pub fn to_ph(&self) -> (WeibullPH, Vec<f64>) {
        let sigma = self.sigma();
        let ph = WeibullPH {
            lambda: (-self.mu / sigma).exp(),
            gamma: 1.0 / sigma,
        };
        let beta = self.alpha.iter().map(|a| -a / sigma).collect();
        (ph, beta)
    }
}

/// Distribution families available for the censored covariate and for
/// one-sample fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Logistic,
    Gamma,
    Weibull,
}

impl Family {
    /// Parameter names in canonical order.
    pub fn parameter_names(&self) -> [&'static str; 2] {
        match self {
            Family::Normal => ["mu", "sigma"],
            Family::Logistic => ["location", "scale"],
            Family::Gamma => ["shape", "rate"],
            Family::Weibull => ["shape", "scale"],
        }
    }

    /// Whether each canonical parameter is constrained positive.
    pub fn positive(&self) -> [bool; 2] {
        match self {
            Family::Normal | Family::Logistic => [false, true],
            Family::Gamma | Family::Weibull => [true, true],
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Family::Normal),
            "logistic" => Ok(Family::Logistic),
            "gamma" => Ok(Family::Gamma),
            "weibull" => Ok(Family::Weibull),
            other => Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Family::Normal => "normal",
            Family::Logistic => "logistic",
            Family::Gamma => "gamma",
            Family::Weibull => "weibull",
        };
        f.write_str(name)
    }
}

/// Density `f_θ` of the censored covariate.
///
/// Gamma uses `(shape, rate)` and Logistic uses `(location, scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CovariateDensity {
    Normal { mean: f64, sd: f64 },
    Logistic { location: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl CovariateDensity {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(Family::Normal, &[mean, sd])
    }

    /// Builds a density from canonical parameters in [`Family::parameter_names`] order.
    pub fn new(family: Family, params: &[f64]) -> Result<Self> {
        let [p0, p1] = match params {
            [p0, p1] => [*p0, *p1],
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "{family} density takes 2 parameters, got {}",
                    params.len()
                )))
            }
        };
        let [n0, n1] = family.parameter_names();
        let [pos0, pos1] = family.positive();
        if pos0 {
            check_positive(n0, p0)?;
        } else if !p0.is_finite() {
            return Err(Error::InvalidParameter(format!("{n0} must be finite")));
        }
        if pos1 {
            check_positive(n1, p1)?;
        }
        Ok(match family {
            Family::Normal => Self::Normal { mean: p0, sd: p1 },
            Family::Logistic => Self::Logistic { location: p0, scale: p1 },
            Family::Gamma => Self::Gamma { shape: p0, rate: p1 },
            Family::Weibull => Self::Weibull { shape: p0, scale: p1 },
        })
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Normal { .. } => Family::Normal,
            Self::Logistic { .. } => Family::Logistic,
            Self::Gamma { .. } => Family::Gamma,
            Self::Weibull { .. } => Family::Weibull,
        }
    }

    pub fn params(&self) -> [f64; 2] {
        match *self {
            Self::Normal { mean, sd } => [mean, sd],
            Self::Logistic { location, scale } => [location, scale],
            Self::Gamma { shape, rate } => [shape, rate],
            Self::Weibull { shape, scale } => [shape, scale],
        }
    }

    /// Open support interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Normal { .. } | Self::Logistic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Gamma { .. } | Self::Weibull { .. } => (0.0, f64::INFINITY),
        }
    }

    fn in_support(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x > lo && x < hi
    }

    /// Log density; a domain error outside the support.
    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        if !self.in_support(x) {
            return Err(Error::Domain(format!(
                "{} density evaluated outside its support at {x}",
                self.family()
            )));
        }
        Ok(self.ln_pdf_unchecked(x))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }

    /// Log density without the support check; callers guarantee `x` is interior.
    pub(crate) fn ln_pdf_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - LN_SQRT_2PI - sd.ln()
            }
            Self::Logistic { location, scale } => {
                let z = (x - location) / scale;
                -z - 2.0 * softplus(-z) - scale.ln()
            }
            Self::Gamma { shape, rate } => {
                shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
            }
            Self::Weibull { shape, scale } => {
                let ln_ratio = x.ln() - scale.ln();
                shape.ln() - scale.ln() + (shape - 1.0) * ln_ratio - (shape * ln_ratio).exp()
            }
        }
    }

    /// `P(X ≤ x)`; defined on the whole real line.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match *self {
            Self::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Self::Logistic { location, scale } => {
                let z = (x - location) / scale;
                1.0 / (1.0 + (-z).exp())
            }
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else if x.is_infinite() {
                    1.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Self::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
        }
    }

    /// `P(X > x)`, computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match *self {
            Self::Normal { mean, sd } => std_normal_cdf(-(x - mean) / sd),
            Self::Logistic { location, scale } => {
                let z = (x - location) / scale;
                1.0 / (1.0 + z.exp())
            }
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else if x.is_infinite() {
                    0.0
                } else {
                    gamma_ur(shape, rate * x)
                }
            }
            Self::Weibull { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(x / scale).powf(shape)).exp()
                }
            }
        }
    }

    pub fn ln_cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Logistic { location, scale } => -softplus(-(x - location) / scale),
            _ => self.cdf(x).ln(),
        }
    }

    pub fn ln_sf(&self, x: f64) -> f64 {
        match *self {
            Self::Logistic { location, scale } => -softplus((x - location) / scale),
            Self::Weibull { shape, scale } if x > 0.0 => -(x / scale).powf(shape),
            _ => self.sf(x).ln(),
        }
    }

    /// Probability mass of `(low, high]`.
    pub fn interval_mass(&self, low: f64, high: f64) -> f64 {
        if high <= low {
            return 0.0;
        }
        // Difference of survival functions keeps precision in the upper tail.
        let upper_half = self.cdf(low) > 0.5;
        let mass = if upper_half {
            self.sf(low) - self.sf(high)
        } else {
            self.cdf(high) - self.cdf(low)
        };
        mass.max(0.0)
    }

    /// Median, used for starting values and tests.
    pub fn median(&self) -> f64 {
        match *self {
            Self::Normal { mean, .. } => mean,
            Self::Logistic { location, .. } => location,
            Self::Weibull { shape, scale } => scale * std::f64::consts::LN_2.powf(1.0 / shape),
            Self::Gamma { .. } => {
                // Bisection on the CDF; the Gamma median has no closed form.
                let (mut lo, mut hi) = (0.0, 1.0);
                while self.cdf(hi) < 0.5 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < 0.5 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// A length scale of the density, used to size quadrature checks.
    pub fn spread(&self) -> f64 {
        match *self {
            Self::Normal { sd, .. } => sd,
            Self::Logistic { scale, .. } => scale * PI / 3f64.sqrt(),
            Self::Gamma { shape, rate } => shape.sqrt() / rate,
            Self::Weibull { shape, scale } => {
                let m1 = statrs::function::gamma::gamma(1.0 + 1.0 / shape);
                let m2 = statrs::function::gamma::gamma(1.0 + 2.0 / shape);
                scale * (m2 - m1 * m1).max(0.0).sqrt()
            }
        }
    }
}

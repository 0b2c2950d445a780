//! Encoding of possibly censored measurements and their log-likelihood
//! contributions under a parametric density.

use serde::{Deserialize, Serialize};

use crate::distributions::CovariateDensity;
use crate::error::{Error, Result};

/// Token read as a missing bound in two-column (`interval2`) data.
pub const MISSING_MARKER: &str = "NA";

/// A scalar measurement known exactly or only up to bounds.
///
/// `low == high` is an exact value, a missing `low` is left-censoring at
/// `high`, a missing `high` is right-censoring at `low`, and `low < high`
/// is an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredValue {
    low: Option<f64>,
    high: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CensorKind {
    Exact,
    Left,
    Right,
    Interval,
}

/// Observation status: `Observed` when the value is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CensStatus {
    Observed,
    Censored,
}

impl CensStatus {
    pub fn indicator(self) -> u8 {
        match self {
            CensStatus::Observed => 1,
            CensStatus::Censored => 0,
        }
    }
}

impl CensoredValue {
    pub fn new(low: Option<f64>, high: Option<f64>) -> Result<Self> {
        match (low, high) {
            (None, None) => Err(Error::InvalidParameter(
                "censored value needs at least one bound".into(),
            )),
            (Some(l), _) if l.is_nan() => Err(Error::InvalidParameter("NaN lower bound".into())),
            (_, Some(h)) if h.is_nan() => Err(Error::InvalidParameter("NaN upper bound".into())),
            (Some(l), Some(h)) if l > h => Err(Error::InvalidParameter(format!(
                "lower bound {l} exceeds upper bound {h}"
            ))),
            _ => Ok(Self { low, high }),
        }
    }

    pub fn exact(x: f64) -> Self {
        Self { low: Some(x), high: Some(x) }
    }

    pub fn left(high: f64) -> Self {
        Self { low: None, high: Some(high) }
    }

    pub fn right(low: f64) -> Self {
        Self { low: Some(low), high: None }
    }

    pub fn interval(low: f64, high: f64) -> Result<Self> {
        Self::new(Some(low), Some(high))
    }

    pub fn low(&self) -> Option<f64> {
        self.low
    }

    pub fn high(&self) -> Option<f64> {
        self.high
    }

    pub fn kind(&self) -> CensorKind {
        match (self.low, self.high) {
            (Some(l), Some(h)) if l == h => CensorKind::Exact,
            (Some(_), Some(_)) => CensorKind::Interval,
            (None, Some(_)) => CensorKind::Left,
            (Some(_), None) => CensorKind::Right,
            (None, None) => unreachable!("constructors require a bound"),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.kind() == CensorKind::Exact
    }

    pub fn status(&self) -> CensStatus {
        if self.is_exact() {
            CensStatus::Observed
        } else {
            CensStatus::Censored
        }
    }

    /// The exact value, if any.
    pub fn value(&self) -> Option<f64> {
        self.is_exact().then(|| self.low.unwrap())
    }

    /// Region bounds with missing ends as infinities.
    pub fn bounds(&self) -> (f64, f64) {
        (
            self.low.unwrap_or(f64::NEG_INFINITY),
            self.high.unwrap_or(f64::INFINITY),
        )
    }

    /// A single representative number: the value for exact observations,
    /// the finite bound for one-sided censoring, the midpoint for intervals.
    /// This is the limit-of-detection imputation for left-censored values.
    pub fn imputed(&self) -> f64 {
        match (self.low, self.high) {
            (Some(l), Some(h)) => 0.5 * (l + h),
            (Some(l), None) => l,
            (None, Some(h)) => h,
            (None, None) => unreachable!("constructors require a bound"),
        }
    }

    /// Adds `k` to every present bound.
    pub fn shifted(&self, k: f64) -> Self {
        Self {
            low: self.low.map(|l| l + k),
            high: self.high.map(|h| h + k),
        }
    }
}

/// Log-likelihood contribution of one observation under `density`.
///
/// Exact values contribute the log density, censored values the log
/// probability of their region. A region carrying no mass yields `-inf`,
/// which optimizers treat as an infeasible point.
pub fn loglik_contribution(value: &CensoredValue, density: &CovariateDensity) -> f64 {
    match (value.low, value.high) {
        (Some(l), Some(h)) if l == h => density.ln_pdf(l).unwrap_or(f64::NEG_INFINITY),
        (Some(l), Some(h)) => density.interval_mass(l, h).ln(),
        (None, Some(h)) => density.ln_cdf(h),
        (Some(l), None) => density.ln_sf(l),
        (None, None) => unreachable!("constructors require a bound"),
    }
}

fn parse_bound(token: &str, row: usize, which: &str) -> Result<Option<f64>> {
    let t = token.trim();
    if t.is_empty() || t == MISSING_MARKER {
        return Ok(None);
    }
    t.parse::<f64>()
        .map_err(|_| Error::Parse { row, message: format!("cannot parse {which} bound `{t}`") })
        .and_then(|v| {
            if v.is_nan() {
                Err(Error::Parse { row, message: format!("{which} bound is NaN") })
            } else {
                Ok(Some(v))
            }
        })
}

/// Reads a two-column `(low, high)` pair. `NA` or an empty field marks a
/// missing bound; `row` is carried into error messages.
pub fn parse_interval2(low_text: &str, high_text: &str, row: usize) -> Result<CensoredValue> {
    let low = parse_bound(low_text, row, "lower")?;
    let high = parse_bound(high_text, row, "upper")?;
    match (low, high) {
        (None, None) => Err(Error::Parse {
            row,
            message: "both bounds missing; the value carries no information".into(),
        }),
        (Some(l), Some(h)) if l > h => Err(Error::Parse {
            row,
            message: format!("lower bound {l} exceeds upper bound {h}"),
        }),
        _ => Ok(CensoredValue { low, high }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{std_normal_cdf, Family};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn std_normal() -> CovariateDensity {
        CovariateDensity::normal(0.0, 1.0).unwrap()
    }

    #[test]
    fn kinds() {
        assert_eq!(CensoredValue::exact(1.0).kind(), CensorKind::Exact);
        assert_eq!(CensoredValue::left(1.0).kind(), CensorKind::Left);
        assert_eq!(CensoredValue::right(1.0).kind(), CensorKind::Right);
        assert_eq!(CensoredValue::interval(0.0, 1.0).unwrap().kind(), CensorKind::Interval);
        assert!(CensoredValue::new(None, None).is_err());
        assert!(CensoredValue::interval(2.0, 1.0).is_err());
        assert_eq!(CensoredValue::exact(1.0).status().indicator(), 1);
        assert_eq!(CensoredValue::left(1.0).status(), CensStatus::Censored);
    }

    #[test]
    fn contribution_examples() {
        let d = std_normal();
        assert_relative_eq!(
            loglik_contribution(&CensoredValue::exact(0.0), &d),
            0.398_942_280_401_432_7f64.ln(),
            epsilon = 1e-14
        );
        for d in [
            std_normal(),
            CovariateDensity::new(Family::Logistic, &[1.0, 2.0]).unwrap(),
            CovariateDensity::new(Family::Gamma, &[3.0, 0.5]).unwrap(),
            CovariateDensity::new(Family::Weibull, &[2.0, 3.0]).unwrap(),
        ] {
            let v = CensoredValue::left(d.median());
            assert!((loglik_contribution(&v, &d) - 0.5f64.ln()).abs() < 1e-10, "{d:?}");
        }
        let v = CensoredValue::interval(-1.0, 1.0).unwrap();
        let expected = (std_normal_cdf(1.0) - std_normal_cdf(-1.0)).ln();
        assert_relative_eq!(loglik_contribution(&v, &std_normal()), expected, epsilon = 1e-14);
        assert_relative_eq!(loglik_contribution(&v, &std_normal()).exp(), 0.682_689_5, epsilon = 1e-7);
    }

    #[test]
    fn zero_mass_is_negative_infinity() {
        let g = CovariateDensity::new(Family::Gamma, &[2.0, 1.0]).unwrap();
        assert_eq!(loglik_contribution(&CensoredValue::left(-1.0), &g), f64::NEG_INFINITY);
        assert_eq!(loglik_contribution(&CensoredValue::exact(-1.0), &g), f64::NEG_INFINITY);
    }

    #[test]
    fn left_contribution_tends_to_zero() {
        let d = std_normal();
        assert!(loglik_contribution(&CensoredValue::left(40.0), &d).abs() < 1e-300);
        assert_eq!(loglik_contribution(&CensoredValue::left(f64::INFINITY), &d), 0.0);
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_interval2("-1.5124", "-1.5124", 1).unwrap(), CensoredValue::exact(-1.5124));
        assert_eq!(parse_interval2("NA", "-3.9673", 6).unwrap(), CensoredValue::left(-3.9673));
        assert_eq!(parse_interval2("", "-3.9673", 6).unwrap(), CensoredValue::left(-3.9673));
        assert_eq!(parse_interval2("2", "NA", 2).unwrap(), CensoredValue::right(2.0));
        assert_eq!(parse_interval2("1", "2", 2).unwrap().kind(), CensorKind::Interval);
        assert!(matches!(parse_interval2("NA", "NA", 4), Err(Error::Parse { row: 4, .. })));
        assert!(matches!(parse_interval2("3", "2", 5), Err(Error::Parse { row: 5, .. })));
        assert!(parse_interval2("na", "1", 1).is_err());
        assert!(parse_interval2("abc", "1", 1).is_err());
    }

    #[test]
    fn degenerate_interval_parses_as_exact() {
        let v = parse_interval2("0.25", "0.25", 1).unwrap();
        assert!(v.is_exact());
        assert_eq!(
            loglik_contribution(&v, &std_normal()),
            std_normal().ln_pdf(0.25).unwrap()
        );
    }

    proptest! {
        #[test]
        fn contributions_are_additive_over_partitions(a in -5.0f64..5.0, w1 in 1e-3f64..3.0, w2 in 1e-3f64..3.0,
                                                      mean in -1.0f64..1.0, sd in 0.5f64..2.0) {
            let d = CovariateDensity::normal(mean, sd).unwrap();
            let (b, c) = (a + w1, a + w1 + w2);
            let p = |l, h| loglik_contribution(&CensoredValue::interval(l, h).unwrap(), &d).exp();
            prop_assert!((p(a, b) + p(b, c) - p(a, c)).abs() < 1e-10);
        }
    }
}

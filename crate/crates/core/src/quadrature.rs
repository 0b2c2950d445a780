//! Adaptive 15-point Gauss–Kronrod quadrature over finite, semi-infinite and
//! infinite ranges.
//!
//! Infinite ends are mapped onto `[0, 1)` with `x = h ∓ t/(1-t)`, so a
//! censored region is integrated without choosing a cutoff. Integrand values
//! below [`IntegrationSettings::trunc_eps`] are set to zero before they are
//! accumulated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::censlik::CensoredValue;
use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1], outermost first; odd indices are Gauss points.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integrand values with magnitude below this are treated as zero.
    pub trunc_eps: f64,
    pub max_subdivisions: usize,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            trunc_eps: 1e-100,
            max_subdivisions: 200,
        }
    }
}

impl IntegrationSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.rel_tol) && ok(self.abs_tol) && ok(self.trunc_eps) && self.max_subdivisions > 0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid integration settings {self:?}")))
        }
    }
}

/// Outcome of an integration. `converged` is false when the subdivision
/// budget ran out; `value` and `abs_error` then hold the best estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

fn gauss_kronrod_15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_g = f_center * WG[3];
    let mut res_k = f_center * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * half;
    let abs_half = half.abs();
    (
        res_k * half,
        rescale_error(err, res_abs * abs_half, res_asc * abs_half),
    )
}

fn adaptive<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, s: &IntegrationSettings) -> Integral {
    let (value, error) = gauss_kronrod_15(f, a, b);
    let mut heap = BinaryHeap::with_capacity(s.max_subdivisions + 1);
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut subdivisions = 1;
    let tolerance = |total: f64| s.abs_tol.max(s.rel_tol * total.abs());

    while total_err > tolerance(total) && subdivisions < s.max_subdivisions {
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Segment cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod_15(f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_15(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        subdivisions += 1;
    }

    // Re-sum to shed drift from the incremental updates.
    let mut segments = heap.into_vec();
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = segments.iter().map(|seg| seg.value).sum();
    let abs_error: f64 = segments.iter().map(|seg| seg.error).sum();
    Integral {
        value,
        abs_error,
        subdivisions,
        converged: abs_error <= tolerance(value),
    }
}

/// Integrates `f` over `[lo, hi]`, where either end may be infinite.
pub fn integrate<F>(f: F, lo: f64, hi: f64, s: &IntegrationSettings) -> Integral
where
    F: Fn(f64) -> f64,
{
    let eps = s.trunc_eps;
    let g = |x: f64| {
        let v = f(x);
        if v.abs() < eps {
            0.0
        } else {
            v
        }
    };
    integrate_truncated(&g, lo, hi, s)
}

fn integrate_truncated(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, s: &IntegrationSettings) -> Integral {
    if lo.is_nan() || hi.is_nan() {
        return Integral { value: f64::NAN, abs_error: f64::NAN, subdivisions: 0, converged: false };
    }
    if lo >= hi {
        return Integral { value: 0.0, abs_error: 0.0, subdivisions: 0, converged: true };
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(g, lo, hi, s),
        (false, true) => adaptive(
            &|t: f64| {
                let u = 1.0 - t;
                g(hi - t / u) / (u * u)
            },
            0.0,
            1.0,
            s,
        ),
        (true, false) => adaptive(
            &|t: f64| {
                let u = 1.0 - t;
                g(lo + t / u) / (u * u)
            },
            0.0,
            1.0,
            s,
        ),
        (false, false) => {
            let left = integrate_truncated(g, f64::NEG_INFINITY, 0.0, s);
            let right = integrate_truncated(g, 0.0, f64::INFINITY, s);
            Integral {
                value: left.value + right.value,
                abs_error: left.abs_error + right.abs_error,
                subdivisions: left.subdivisions + right.subdivisions,
                converged: left.converged && right.converged,
            }
        }
    }
}

/// Integrates `g` over the region a censored value encodes: `(-∞, high]`
/// for left-censoring, `[low, ∞)` for right-censoring, `[low, high]` for an
/// interval. An exact value encodes a region of zero width.
pub fn integrate_censored_region<F>(g: F, v: &CensoredValue, s: &IntegrationSettings) -> Integral
where
    F: Fn(f64) -> f64,
{
    let (lo, hi) = v.bounds();
    integrate(g, lo, hi, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::std_normal_pdf;
    use libm::erf;

    fn phi_interval(a: f64, b: f64) -> f64 {
        0.5 * (erf(b / std::f64::consts::SQRT_2) - erf(a / std::f64::consts::SQRT_2))
    }

    #[test]
    fn normal_half_line() {
        let s = IntegrationSettings::default();
        let r = integrate_censored_region(std_normal_pdf, &CensoredValue::left(0.0), &s);
        assert!(r.converged);
        assert!((r.value - 0.5).abs() < 1e-10, "{r:?}");
        let r = integrate_censored_region(std_normal_pdf, &CensoredValue::right(0.0), &s);
        assert!((r.value - 0.5).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn normal_interval() {
        let s = IntegrationSettings::default();
        let v = CensoredValue::interval(-1.0, 1.0).unwrap();
        let r = integrate_censored_region(std_normal_pdf, &v, &s);
        assert!((r.value - phi_interval(-1.0, 1.0)).abs() < 1e-12, "{r:?} {}", phi_interval(-1.0, 1.0));
        assert!((r.value - 0.682_689_5).abs() < 1e-7);
        assert!(r.abs_error <= s.abs_tol.max(s.rel_tol * r.value));
    }

    #[test]
    fn zero_integrand_is_exactly_zero() {
        let s = IntegrationSettings::default();
        let r = integrate_censored_region(|_| 0.0, &CensoredValue::interval(0.0, 1.0).unwrap(), &s);
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn whole_line() {
        let s = IntegrationSettings::default();
        let r = integrate(std_normal_pdf, f64::NEG_INFINITY, f64::INFINITY, &s);
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tiny_values_are_truncated() {
        let s = IntegrationSettings::default();
        let r = integrate(|_| 1e-120, 0.0, 1.0, &s);
        assert_eq!(r.value, 0.0);
        let loose = IntegrationSettings { trunc_eps: 1e-130, ..s };
        let r = integrate(|_| 1e-120, 0.0, 1.0, &loose);
        assert!((r.value - 1e-120).abs() < 1e-132);
    }

    #[test]
    fn exhausted_budget_is_flagged() {
        let s = IntegrationSettings { max_subdivisions: 2, ..Default::default() };
        let r = integrate(|x: f64| (1.0 / x).sin() / x.sqrt(), 1e-6, 1.0, &s);
        assert!(!r.converged);
        assert!(r.value.is_finite());
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(IntegrationSettings::default().validate().is_ok());
        let bad = IntegrationSettings { rel_tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reversed_bounds_give_zero() {
        let r = integrate(std_normal_pdf, 1.0, 0.0, &IntegrationSettings::default());
        assert_eq!(r.value, 0.0);
    }
}

//! Kaplan–Meier curves and the Weibull log–log diagnostic.
//!
//! Under a Weibull PH model `log(-log S(t)) = log λ + γ log t`, so straight,
//! parallel lines across strata support both the Weibull form and
//! proportional hazards.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMCurve {
    pub stratum: String,
    /// Distinct event times, increasing.
    pub times: Vec<f64>,
    /// Survival just after each time.
    pub survival: Vec<f64>,
    pub n_risk: Vec<usize>,
    pub n_events: Vec<usize>,
}

impl KMCurve {
    /// Step-function value at `t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.times.iter().rposition(|&s| s <= t) {
            Some(k) => self.survival[k],
            None => 1.0,
        }
    }
}

fn check_inputs(times: &[f64], events: &[bool], strata: Option<&[String]>) -> Result<()> {
    if times.len() != events.len() || strata.is_some_and(|s| s.len() != times.len()) {
        return Err(Error::InvalidParameter("times, events and strata must have equal length".into()));
    }
    if let Some(i) = times.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Domain(format!("row {}: time must be positive, got {}", i + 1, times[i])));
    }
    Ok(())
}

fn km_single(stratum: String, rows: &[(f64, bool)]) -> KMCurve {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut curve = KMCurve { stratum, times: vec![], survival: vec![], n_risk: vec![], n_events: vec![] };
    let mut at_risk = rows.len();
    let mut s = 1.0;
    let mut k = 0;
    while k < rows.len() {
        let t = rows[k].0;
        let mut end = k;
        let mut d = 0;
        while end < rows.len() && rows[end].0 == t {
            d += rows[end].1 as usize;
            end += 1;
        }
        // Censorings tied with events count as still at risk.
        if d > 0 {
            s *= 1.0 - d as f64 / at_risk as f64;
            curve.times.push(t);
            curve.survival.push(s);
            curve.n_risk.push(at_risk);
            curve.n_events.push(d);
        }
        at_risk -= end - k;
        k = end;
    }
    curve
}

/// Product-limit estimate per stratum, strata in sorted order. Without
/// strata a single curve labelled `all` is returned.
pub fn kaplan_meier(times: &[f64], events: &[bool], strata: Option<&[String]>) -> Result<Vec<KMCurve>> {
    check_inputs(times, events, strata)?;
    let mut groups: BTreeMap<String, Vec<(f64, bool)>> = BTreeMap::new();
    for i in 0..times.len() {
        let key = strata.map_or_else(|| "all".to_string(), |s| s[i].clone());
        groups.entry(key).or_default().push((times[i], events[i]));
    }
    Ok(groups.into_iter().map(|(k, rows)| km_single(k, &rows)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagSeries {
    pub stratum: String,
    pub log_time: Vec<f64>,
    pub loglog_surv: Vec<f64>,
    /// Least-squares line evaluated at `log_time`.
    pub fitted: Vec<f64>,
    /// Estimates γ.
    pub slope: f64,
    /// Estimates log λ.
    pub intercept: f64,
}

/// Fits the log–log line to survival values `surv` at `times`. Points with
/// `surv` outside (0, 1) carry no information and are dropped.
pub fn diag_from_survival(stratum: &str, times: &[f64], surv: &[f64]) -> Result<DiagSeries> {
    if times.len() != surv.len() {
        return Err(Error::InvalidParameter("times and survival values must have equal length".into()));
    }
    let (log_time, loglog_surv): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(surv)
        .filter(|(t, s)| **t > 0.0 && **s > 0.0 && **s < 1.0)
        .map(|(t, s)| (t.ln(), (-s.ln()).ln()))
        .unzip();
    let n = log_time.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("stratum {stratum}: {n} usable points, need 2")));
    }
    let mx = log_time.iter().sum::<f64>() / n as f64;
    let my = loglog_surv.iter().sum::<f64>() / n as f64;
    let sxx: f64 = log_time.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(format!("stratum {stratum}: all usable points share one time")));
    }
    let sxy: f64 = log_time.iter().zip(&loglog_surv).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let fitted = log_time.iter().map(|x| intercept + slope * x).collect();
    Ok(DiagSeries { stratum: stratum.to_string(), log_time, loglog_surv, fitted, slope, intercept })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullDiag {
    pub series: Vec<DiagSeries>,
    /// Strata with too few usable points, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Kaplan–Meier per stratum followed by the log–log fit.
pub fn weibull_diag(times: &[f64], events: &[bool], strata: Option<&[String]>) -> Result<WeibullDiag> {
    let curves = kaplan_meier(times, events, strata)?;
    let mut out = WeibullDiag { series: vec![], skipped: vec![] };
    for c in curves {
        match diag_from_survival(&c.stratum, &c.times, &c.survival) {
            Ok(s) => out.series.push(s),
            Err(e) => out.skipped.push((c.stratum, e.to_string())),
        }
    }
    if out.series.is_empty() {
        return Err(Error::InsufficientData("no stratum has two usable survival points".into()));
    }
    Ok(out)
}

impl WeibullDiag {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("stratum,log_time,loglog_surv,fitted\n");
        for d in &self.series {
            for k in 0..d.log_time.len() {
                let _ = writeln!(s, "{},{},{},{}", d.stratum, d.log_time[k], d.loglog_surv[k], d.fitted[k]);
            }
        }
        s
    }

    /// A minimal SVG scatter with fitted lines, one colour per stratum.
    pub fn to_svg(&self) -> String {
        const W: f64 = 480.0;
        const H: f64 = 360.0;
        const PAD: f64 = 40.0;
        const COLOURS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];
        let xs = self.series.iter().flat_map(|d| d.log_time.iter().copied());
        let ys = self.series.iter().flat_map(|d| d.loglog_surv.iter().chain(&d.fitted).copied());
        let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0).max(1e-12) * (H - 2.0 * PAD);
        let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n");
        let _ = writeln!(
            s,
            "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" font-size=\"12\">log t</text>", W / 2.0, H - 10.0);
        let _ = writeln!(s, "<text x=\"4\" y=\"{}\" font-size=\"12\">log(-log S)</text>", PAD - 10.0);
        for (i, d) in self.series.iter().enumerate() {
            let c = COLOURS[i % COLOURS.len()];
            for (x, y) in d.log_time.iter().zip(&d.loglog_surv) {
                let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{c}\"/>", sx(*x), sy(*y));
            }
            let (first, last) = (0, d.log_time.len() - 1);
            let _ = writeln!(
                s,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{c}\"/>",
                sx(d.log_time[first]),
                sy(d.fitted[first]),
                sx(d.log_time[last]),
                sy(d.fitted[last])
            );
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{c}\">{}: slope {:.3}</text>",
                PAD + 8.0,
                PAD + 16.0 * (i + 1) as f64,
                d.stratum,
                d.slope
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

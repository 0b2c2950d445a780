use std::fmt::Write as _;

use censcov::Coefficient;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub command: Vec<String>,
    /// SHA-256 of the input file, when there is one.
    pub input_digest: Option<String>,
    pub payload: serde_json::Value,
    pub warnings: Vec<String>,
    pub version: String,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// `x` with five significant digits.
pub fn sig5(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..5).contains(&mag) {
        return format!("{x:.4e}");
    }
    format!("{:.*}", (4 - mag).max(0) as usize, x)
}

pub fn p_value(p: Option<f64>) -> String {
    match p {
        None => "NA".into(),
        Some(p) if p < 2e-16 => "<2e-16".into(),
        Some(p) if p < 1e-4 => format!("{p:.2e}"),
        Some(p) => sig5(p),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), sig5)
}

/// Aligned coefficient block: one row per coefficient, then optional trailer lines.
pub fn coefficient_table(title: &str, rows: &[&Coefficient], trailer: &[String]) -> String {
    let header = ["", "Estimate", "Std. Error", "CI.low", "CI.up", "p-value"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|c| {
            [
                c.name.clone(),
                sig5(c.estimate),
                opt(c.std_error),
                opt(c.ci_low),
                opt(c.ci_high),
                p_value(c.p_value),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for r in &body {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = format!("{title}\n");
    let line = |cells: &[&str]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            let _ = write!(s, "  {cell:>w$}");
        }
        s
    };
    let _ = writeln!(out, "{}", line(&header));
    for r in &body {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}", line(&cells));
    }
    for t in trailer {
        let _ = writeln!(out, "{t}");
    }
    out
}

/// Plain aligned grid with a header row; the first column is left-aligned.
pub fn grid(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let _ = write!(out, "{:<w$}", r[0], w = widths[0]);
        for (c, w) in r[1..].iter().zip(&widths[1..]) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_significant_digits() {
        assert_eq!(sig5(0.745953), "0.74595");
        assert_eq!(sig5(2290.123), "2290.1");
        assert_eq!(sig5(-0.0601), "-0.060100");
        assert_eq!(sig5(123456.7), "1.2346e5");
        assert_eq!(sig5(0.0), "0");
    }

    #[test]
    fn tiny_p_values() {
        assert_eq!(p_value(Some(1e-20)), "<2e-16");
        assert_eq!(p_value(Some(1.2e-9)), "1.20e-9");
        assert_eq!(p_value(None), "NA");
    }

    #[test]
    fn envelope_round_trips() {
        let env = ReportEnvelope {
            command: vec!["censcov".into(), "convert".into()],
            input_digest: Some(digest(b"abc")),
            payload: serde_json::json!({"x": 0.1 + 0.2, "y": [1e-300, -2.5]}),
            warnings: vec!["w".into()],
            version: "0.1.0".into(),
        };
        let text = serde_json::to_string(&env).unwrap();
        assert_eq!(serde_json::from_str::<ReportEnvelope>(&text).unwrap(), env);
        assert_eq!(
            env.input_digest.as_deref(),
            Some("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
        );
    }
}

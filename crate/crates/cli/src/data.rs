//! CSV ingestion. Cells reading `NA` or empty are missing.

use censcov::censlik::MISSING_MARKER;
use censcov::{parse_interval2, CensoredValue};

use crate::CliError;

/// A header plus raw cells, parsed on demand per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == MISSING_MARKER
}

// Header is line 1.
fn line(row: usize) -> usize {
    row + 2
}

impl Dataset {
    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Input(format!("malformed header: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.is_empty() || headers.iter().any(String::is_empty) {
            return Err(CliError::Input("malformed header: empty column name".into()));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Input(format!("line {}: {e}", line(i))))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { headers, rows })
    }

    #[cfg(test)]
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing memory")).expect("csv output is utf-8")
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("column `{name}` not found; available: {}", self.headers.join(", "))))
    }

    fn cells<'a>(&'a self, name: &str) -> Result<impl Iterator<Item = (usize, &'a str)> + 'a, CliError> {
        let j = self.column(name)?;
        Ok(self.rows.iter().enumerate().map(move |(i, r)| (i, r[j].as_str())))
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>, CliError> {
        self.cells(name)?
            .map(|(i, c)| {
                if is_missing(c) {
                    return Err(CliError::Input(format!("line {}: column `{name}` is missing", line(i))));
                }
                c.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Input(format!("line {}: column `{name}`: `{c}` is not a number", line(i))))
            })
            .collect()
    }

    pub fn times(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let v = self.numeric(name)?;
        if let Some(i) = v.iter().position(|t| *t <= 0.0) {
            return Err(CliError::Input(format!("line {}: time must be positive, got {}", line(i), v[i])));
        }
        Ok(v)
    }

    pub fn binary(&self, name: &str) -> Result<Vec<bool>, CliError> {
        self.cells(name)?
            .map(|(i, c)| match c.trim() {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(CliError::Input(format!("line {}: column `{name}` must be 0 or 1, got `{other}`", line(i)))),
            })
            .collect()
    }

    pub fn labels(&self, name: &str) -> Result<Vec<String>, CliError> {
        self.cells(name)?
            .map(|(i, c)| {
                if is_missing(c) {
                    Err(CliError::Input(format!("line {}: column `{name}` is missing", line(i))))
                } else {
                    Ok(c.trim().to_string())
                }
            })
            .collect()
    }

    /// A censored column given as lower and upper bound columns.
    pub fn censored(&self, low: &str, high: &str) -> Result<Vec<CensoredValue>, CliError> {
        let (jl, jh) = (self.column(low)?, self.column(high)?);
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| parse_interval2(&r[jl], &r[jh], line(i)).map_err(|e| CliError::Input(e.to_string())))
            .collect()
    }
}

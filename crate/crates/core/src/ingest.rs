//! Scalar series files, gap filling, segmentation into curves and conversion
//! of frequencies to calendar periods.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{uniform_grid, FunctionalSample};
use crate::error::{invalid, Error, Result};

/// A per-tick scalar series with missing positions marked `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub values: Vec<Option<f64>>,
    pub header: Option<String>,
}

fn parse_record(line: &str) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(line.as_bytes());
    match rdr.records().next() {
        Some(rec) => Ok(rec?.iter().map(str::to_string).collect()),
        None => Ok(vec![String::new()]),
    }
}

fn parse_cell(cell: &str) -> Option<Option<f64>> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") {
        return Some(None);
    }
    c.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
}

impl SeriesFile {
    /// Reads one value per line, or the named/indexed column of a wider file.
    /// A first line that does not parse as a number is taken as a header.
    pub fn from_reader<R: Read>(mut reader: R, column: Option<&str>) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut values = Vec::new();
        let mut header = None;
        let mut col_idx: Option<usize> = match column {
            Some(c) => c.parse::<usize>().ok(),
            None => Some(0),
        };
        // One record per line; blank lines are gaps.
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let rec = parse_record(raw)?;
            if line == 1 && rec.iter().any(|c| parse_cell(c).is_none()) {
                header = Some(rec.join(","));
                if col_idx.is_none() {
                    let name = column.unwrap_or_default();
                    col_idx = rec.iter().position(|c| c == name);
                    if col_idx.is_none() {
                        return invalid(format!("column '{name}' not found in header"));
                    }
                }
                continue;
            }
            let idx = col_idx.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "column '{}' requested but the file has no header",
                    column.unwrap_or_default()
                ))
            })?;
            let cell = rec.get(idx).map(String::as_str).unwrap_or("");
            match parse_cell(cell) {
                Some(v) => values.push(v),
                None => return invalid(format!("line {line}: cannot parse '{cell}' as a number")),
            }
        }
        if values.iter().all(Option::is_none) {
            return invalid("series has no observed values");
        }
        Ok(Self { values, header })
    }

    pub fn from_path(path: &Path, column: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file), column)
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Replaces every gap with the last observed value before it.
pub fn impute(values: &[Option<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    let mut last: Option<f64> = None;
    for (i, v) in values.iter().enumerate() {
        match (v, last) {
            (Some(x), _) => {
                last = Some(*x);
                out.push(*x);
            }
            (None, Some(prev)) => out.push(prev),
            (None, None) => {
                return invalid(format!(
                    "value at index {i} is missing with no earlier observation"
                ))
            }
        }
    }
    Ok(out)
}

/// How calendar years are shortened to a whole number of curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YearTrim {
    /// Use the series as is.
    None,
    /// Years of `year_length` ticks, each cut to its first `keep`.
    Fixed { year_length: usize, keep: usize },
    /// Daily data starting on 1 January of `start_year`, each year cut to
    /// its first `keep` days.
    Gregorian { start_year: i32, keep: usize },
}

fn is_leap(y: i32) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

impl YearTrim {
    pub fn keep(&self) -> Option<usize> {
        match *self {
            YearTrim::None => None,
            YearTrim::Fixed { keep, .. } | YearTrim::Gregorian { keep, .. } => Some(keep),
        }
    }

    /// Drops the trailing ticks of every year.
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        let keep = match self.keep() {
            None => return Ok(values.to_vec()),
            Some(k) => k,
        };
        let mut out = Vec::with_capacity(values.len());
        let mut pos = 0usize;
        let mut year = 0i32;
        while pos < values.len() {
            let len = match *self {
                YearTrim::Fixed { year_length, .. } => year_length,
                YearTrim::Gregorian { start_year, .. } => {
                    if is_leap(start_year + year) {
                        366
                    } else {
                        365
                    }
                }
                YearTrim::None => unreachable!(),
            };
            if keep > len || keep == 0 {
                return invalid(format!("cannot keep {keep} ticks of a {len}-tick year"));
            }
            let end = (pos + len).min(values.len());
            out.extend_from_slice(&values[pos..(pos + keep).min(end)]);
            pos = end;
            year += 1;
        }
        Ok(out)
    }
}

/// Trims years and cuts the series into consecutive curves of `m` ticks on
/// the uniform grid `(g-1)/(m-1)`; an incomplete last block is dropped.
pub fn segment(values: &[f64], m: usize, trim: &YearTrim) -> Result<FunctionalSample> {
    if m < 2 {
        return invalid(format!("curve length m must be at least 2, got {m}"));
    }
    if let Some(keep) = trim.keep() {
        if keep % m != 0 {
            return invalid(format!(
                "kept year length {keep} is not divisible by m = {m}"
            ));
        }
    }
    let trimmed = trim.apply(values)?;
    let n = trimmed.len() / m;
    if n < 2 {
        return invalid(format!(
            "only {n} complete curve(s) of length {m} in {} values",
            trimmed.len()
        ));
    }
    let data = DMatrix::from_row_slice(n, m, &trimmed[..n * m]);
    FunctionalSample::new(uniform_grid(m), data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub theta_hat: f64,
    /// Period in curves, `2π/θ`.
    pub period_functions: f64,
    pub period_days: f64,
    pub period_years: f64,
    pub display: String,
}

/// Converts a frequency in radians per curve to calendar units.
pub fn period_convert(theta_hat: f64, m: usize, days_per_year: f64) -> Result<PeriodReport> {
    if !(theta_hat > 0.0 && theta_hat < PI) {
        return invalid(format!("frequency {theta_hat} is outside (0, pi)"));
    }
    if m == 0 || !(days_per_year > 0.0) {
        return invalid("m and days per year must be positive");
    }
    let period_functions = 2.0 * PI / theta_hat;
    let period_days = period_functions * m as f64;
    let period_years = period_days / days_per_year;
    let months = (period_years * 12.0).round() as i64;
    let display = format!(
        "{:.1}-year cycle ({} y {} m, {:.1} ticks, {:.2} curves)",
        period_years,
        months / 12,
        months % 12,
        period_days,
        period_functions
    );
    Ok(PeriodReport {
        theta_hat,
        period_functions,
        period_days,
        period_years,
        display,
    })
}

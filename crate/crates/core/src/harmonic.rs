//! Trigonometric regression on `1, cos(t θ_k), sin(t θ_k)` with time index
//! `t = 1..N`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Ratio of smallest to largest |R_kk| below which the design is rejected.
const DESIGN_COND_TOL: f64 = 1e-9;

/// Least-squares fit of a (possibly vector) series on a set of frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicFit {
    pub freqs: Vec<f64>,
    /// `(2r + 1) x d`; row 0 is the mean, rows `2k - 1` and `2k` the cosine
    /// and sine amplitudes of frequency `k`.
    #[serde(with = "crate::matrix_serde")]
    pub coef: DMatrix<f64>,
    /// `N x d`.
    #[serde(with = "crate::matrix_serde")]
    pub residuals: DMatrix<f64>,
    pub rss: f64,
}

impl HarmonicFit {
    pub fn len(&self) -> usize {
        self.residuals.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.nrows() == 0
    }

    /// Stacked parameter vector `(μ, α_1, β_1, ..., α_r, β_r)`, each block of length `d`.
    pub fn psi(&self) -> Vec<f64> {
        self.coef
            .row_iter()
            .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
            .collect()
    }

    /// Fitted values `Q ψ`.
    pub fn fitted(&self) -> DMatrix<f64> {
        design_matrix(self.len(), &self.freqs) * &self.coef
    }
}

/// `(1, cos(tθ_1), sin(tθ_1), ..., cos(tθ_r), sin(tθ_r))`.
pub fn design_row(t: f64, freqs: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * freqs.len() + 1);
    row.push(1.0);
    for &theta in freqs {
        let (s, c) = (t * theta).sin_cos();
        row.push(c);
        row.push(s);
    }
    row
}

pub(crate) fn design_matrix(n: usize, freqs: &[f64]) -> DMatrix<f64> {
    let k = 2 * freqs.len() + 1;
    let mut q = DMatrix::zeros(n, k);
    for t in 0..n {
        for (j, v) in design_row((t + 1) as f64, freqs).into_iter().enumerate() {
            q[(t, j)] = v;
        }
    }
    q
}

fn check_freqs(n: usize, freqs: &[f64]) -> Result<()> {
    if let Some(th) = freqs.iter().find(|th| !(**th > 0.0 && **th < PI)) {
        return invalid(format!("frequency {th} is outside (0, pi)"));
    }
    let min_gap = 2.0 * PI / (10.0 * n as f64);
    for i in 0..freqs.len() {
        for j in i + 1..freqs.len() {
            if (freqs[i] - freqs[j]).abs() <= min_gap {
                return Err(Error::Conditioning(format!(
                    "frequencies {} and {} are closer than 2pi/(10N) = {min_gap:.3e}",
                    freqs[i], freqs[j]
                )));
            }
        }
    }
    Ok(())
}

/// Ordinary least squares of every column of `series` (`N x d`) on the
/// shared trigonometric design, solved by Householder QR.
pub fn fit(series: &DMatrix<f64>, freqs: &[f64]) -> Result<HarmonicFit> {
    let n = series.nrows();
    let k = 2 * freqs.len() + 1;
    if n <= k {
        return invalid(format!("need N > 2r + 1 (N = {n}, r = {})", freqs.len()));
    }
    if series.ncols() == 0 {
        return invalid("series has no columns");
    }
    check_freqs(n, freqs)?;

    let q = design_matrix(n, freqs);
    let qr = q.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= DESIGN_COND_TOL * max {
        let (a, b) = closest_pair(freqs);
        return Err(Error::Conditioning(format!(
            "near-singular harmonic design around frequencies {a} and {b}"
        )));
    }

    let mut qty = series.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, k).into_owned();
    let coef = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| Error::Conditioning("singular triangular factor".into()))?;
    let residuals = series - &q * &coef;
    let rss = residuals.norm_squared();
    Ok(HarmonicFit {
        freqs: freqs.to_vec(),
        coef,
        residuals,
        rss,
    })
}

/// Scalar-series convenience wrapper around [`fit`].
pub fn fit_scalar(series: &[f64], freqs: &[f64]) -> Result<HarmonicFit> {
    fit(&DMatrix::from_column_slice(series.len(), 1, series), freqs)
}

pub fn residual_series(fit: &HarmonicFit) -> &DMatrix<f64> {
    &fit.residuals
}

fn closest_pair(freqs: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NAN);
    let mut gap = f64::INFINITY;
    for i in 0..freqs.len() {
        for j in i + 1..freqs.len() {
            let d = (freqs[i] - freqs[j]).abs();
            if d < gap {
                gap = d;
                best = (freqs[i], freqs[j]);
            }
        }
    }
    best
}

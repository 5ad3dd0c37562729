//! Conditional least-squares autoregressions without intercept.
//!
//! Indices are 0-based: `window_start = s` means `x[s], ..., x[N-1]` are
//! predicted from their `h` predecessors.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

const LAG_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    pub h: usize,
    /// `η_1, ..., η_h`; the prediction is `Σ η_j x[t - j]`.
    pub coef: Vec<f64>,
    pub sigma2: f64,
    pub window_start: usize,
}

/// One-step prediction errors for orders `0..=H` on a shared window.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    /// `sigma2[h]` for `h = 0..=H`.
    pub sigma2: Vec<f64>,
    pub window_start: usize,
    pub n_pred: usize,
}

impl ErrorProfile {
    pub fn max_order(&self) -> usize {
        self.sigma2.len() - 1
    }
}

fn lag_matrix(series: &[f64], h: usize, start: usize) -> DMatrix<f64> {
    let m = series.len() - start;
    DMatrix::from_fn(m, h, |i, j| series[start + i - j - 1])
}

fn check_window(n: usize, h: usize, window_start: usize) -> Result<usize> {
    if window_start < h {
        return invalid(format!(
            "window start {window_start} leaves no room for {h} lags"
        ));
    }
    if window_start >= n {
        return invalid(format!(
            "window start {window_start} is past the series end {n}"
        ));
    }
    let m = n - window_start;
    if m < 5 * h.max(1) {
        return invalid(format!("window of {m} points is too short for order {h}"));
    }
    Ok(m)
}

/// Regresses `x[t]` on `x[t-1], ..., x[t-h]` for `t >= window_start`.
pub fn fit_ar(series: &[f64], h: usize, window_start: usize) -> Result<ArFit> {
    let m = check_window(series.len(), h, window_start)?;
    let y = DVector::from_column_slice(&series[window_start..]);
    if h == 0 {
        return Ok(ArFit {
            h,
            coef: Vec::new(),
            sigma2: y.norm_squared() / m as f64,
            window_start,
        });
    }
    if series.iter().all(|v| *v == 0.0) {
        return Ok(ArFit {
            h,
            coef: vec![0.0; h],
            sigma2: 0.0,
            window_start,
        });
    }
    let x = lag_matrix(series, h, window_start);
    let qr = x.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..h).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|d| *d <= LAG_RANK_TOL * max) {
        return Err(Error::Conditioning(format!(
            "lag matrix of order {h} is singular"
        )));
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let coef = r
        .solve_upper_triangular(&qty.rows(0, h).into_owned())
        .ok_or_else(|| Error::Conditioning(format!("lag matrix of order {h} is singular")))?;
    let resid = &y - &x * &coef;
    Ok(ArFit {
        h,
        coef: coef.iter().copied().collect(),
        sigma2: resid.norm_squared() / m as f64,
        window_start,
    })
}

/// Prediction errors of all orders `0..=max_order`, each predicting
/// `x[max_order..]`.
///
/// Regressors are added one lag at a time with modified Gram-Schmidt, so the
/// residual sums of squares are nested and never increase with the order. A
/// lag that is numerically dependent on the earlier ones adds nothing.
pub fn prediction_error_profile(series: &[f64], max_order: usize) -> Result<ErrorProfile> {
    let n = series.len();
    if n <= 5 * max_order || n < 2 {
        return invalid(format!("need N > 5H (N = {n}, H = {max_order})"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return invalid("series contains non-finite values");
    }
    let start = max_order;
    let m = n - start;
    let mut resid = DVector::from_column_slice(&series[start..]);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_order);
    let mut rss = resid.norm_squared();
    let mut sigma2 = vec![rss / m as f64];
    for k in 1..=max_order {
        let mut col = DVector::from_iterator(m, (0..m).map(|i| series[start + i - k]));
        let scale = col.norm();
        // second pass re-orthogonalizes
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&col);
                col.axpy(-c, q, 1.0);
            }
        }
        let norm = col.norm();
        if scale > 0.0 && norm > LAG_RANK_TOL * scale {
            col /= norm;
            let c = col.dot(&resid);
            resid.axpy(-c, &col, 1.0);
            basis.push(col);
        }
        rss = rss.min(resid.norm_squared());
        sigma2.push(rss / m as f64);
    }
    Ok(ErrorProfile {
        sigma2,
        window_start: start,
        n_pred: m,
    })
}

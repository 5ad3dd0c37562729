//! Function bases on `[0, 1]` and least-squares projection of sampled curves.
//!
//! Three families are supported: clamped cubic B-splines with uniform
//! interior knots, the real Fourier basis and the Haar wavelet system.
//! Inner products are approximated with the trapezoidal rule on the
//! evaluation grid, and the same weights are used when projecting data, so
//! that projection, Gram matrix and FPCA normalisation are mutually
//! consistent.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative eigenvalue floor below which a Gram matrix is treated as singular.
const GRAM_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    BsplineCubic,
    Fourier,
    Haar,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BasisKind::BsplineCubic => "bspline_cubic",
            BasisKind::Fourier => "fourier",
            BasisKind::Haar => "haar",
        };
        f.write_str(name)
    }
}

/// `g` equally spaced points from 0 to 1 inclusive.
pub fn uniform_grid(g: usize) -> Vec<f64> {
    match g {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..g).map(|i| i as f64 / (g - 1) as f64).collect(),
    }
}

/// Trapezoidal quadrature weights for a strictly increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let g = grid.len();
    let mut w = vec![0.0; g];
    for i in 1..g {
        let half = 0.5 * (grid[i] - grid[i - 1]);
        w[i - 1] += half;
        w[i] += half;
    }
    w
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return invalid(format!("grid needs at least 2 points, got {}", grid.len()));
    }
    if grid.iter().any(|u| !u.is_finite() || *u < 0.0 || *u > 1.0) {
        return invalid("grid points must lie in [0, 1]");
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return invalid(format!(
            "grid must be strictly increasing (violated at index {})",
            i + 1
        ));
    }
    Ok(())
}

/// A finite basis evaluated on a fixed grid.
#[derive(Debug, Clone)]
pub struct BasisSet {
    kind: BasisKind,
    p: usize,
    grid: Vec<f64>,
    weights: Vec<f64>,
    eval: DMatrix<f64>,
    gram: DMatrix<f64>,
    // gram^{-1} B^T W, so that coefficients = projector * samples.
    projector: DMatrix<f64>,
}

/// Builds `p` functions of the given family evaluated on `grid`.
pub fn make_basis(kind: BasisKind, p: usize, grid: &[f64]) -> Result<BasisSet> {
    if p == 0 {
        return invalid("basis size p must be at least 1");
    }
    validate_grid(grid)?;
    if grid.len() < p {
        return Err(Error::RankDeficient {
            kind: kind.to_string(),
            p,
            detail: format!("grid has only {} points", grid.len()),
        });
    }

    let family = Family::new(kind, p);
    let g = grid.len();
    let mut eval = DMatrix::zeros(g, p);
    let mut row = vec![0.0; p];
    for (i, &u) in grid.iter().enumerate() {
        family.eval_into(u, &mut row);
        for (j, v) in row.iter().enumerate() {
            eval[(i, j)] = *v;
        }
    }

    let weights = trapezoid_weights(grid);
    let mut weighted_t = eval.transpose();
    for (c, w) in weights.iter().enumerate() {
        weighted_t.column_mut(c).scale_mut(*w);
    }
    let gram = &weighted_t * &eval;
    let gram = (&gram + gram.transpose()) * 0.5;

    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= GRAM_RANK_TOL * max {
        return Err(Error::RankDeficient {
            kind: kind.to_string(),
            p,
            detail: format!("Gram eigenvalue ratio {:.3e}", min / max),
        });
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient {
            kind: kind.to_string(),
            p,
            detail: "Gram matrix is not positive definite".into(),
        })?;
    let projector = chol.solve(&weighted_t);

    Ok(BasisSet {
        kind,
        p,
        grid: grid.to_vec(),
        weights,
        eval,
        gram,
        projector,
    })
}

impl BasisSet {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `G x p` matrix of basis values at the grid points.
    pub fn eval_matrix(&self) -> &DMatrix<f64> {
        &self.eval
    }

    /// `p x p` matrix of trapezoidal inner products between basis functions.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Values of all basis functions at an arbitrary point of `[0, 1]`.
    pub fn evaluate(&self, u: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        Family::new(self.kind, self.p).eval_into(u, &mut out);
        out
    }

    /// Trapezoidal inner product of two functions sampled on the grid.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Sampled curves (`N x G`) for the coefficient rows of `coef` (`N x p`).
    pub fn reconstruct(&self, coef: &DMatrix<f64>) -> DMatrix<f64> {
        coef * self.eval.transpose()
    }

    /// Least-squares basis coefficients for every observation in `sample`.
    pub fn project(&self, sample: &FunctionalSample) -> Result<DMatrix<f64>> {
        if !same_grid(sample.grid(), &self.grid) {
            return invalid("sample grid differs from the basis evaluation grid");
        }
        Ok(self.project_values(sample.values()))
    }

    pub(crate) fn project_values(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        values * self.projector.transpose()
    }
}

pub(crate) fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-14)
}

enum Family {
    Bspline {
        order: usize,
        knots: Vec<f64>,
        p: usize,
    },
    Fourier {
        p: usize,
    },
    Haar {
        p: usize,
    },
}

impl Family {
    fn new(kind: BasisKind, p: usize) -> Self {
        match kind {
            BasisKind::BsplineCubic => {
                // Small bases fall back to the highest order that fits (Bernstein polynomials).
                let order = p.min(4);
                let spans = p - order + 1;
                let mut knots = vec![0.0; order];
                knots.extend((1..spans).map(|i| i as f64 / spans as f64));
                knots.extend(std::iter::repeat(1.0).take(order));
                Family::Bspline { order, knots, p }
            }
            BasisKind::Fourier => Family::Fourier { p },
            BasisKind::Haar => Family::Haar { p },
        }
    }

    fn eval_into(&self, u: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self {
            Family::Bspline { order, knots, p } => bspline_into(*order, knots, *p, u, out),
            Family::Fourier { p } => {
                out[0] = 1.0;
                for i in 1..*p {
                    let k = ((i + 1) / 2) as f64;
                    let arg = 2.0 * PI * k * u;
                    out[i] = if i % 2 == 1 {
                        SQRT_2 * arg.cos()
                    } else {
                        SQRT_2 * arg.sin()
                    };
                }
            }
            Family::Haar { p } => {
                out[0] = 1.0;
                for i in 1..*p {
                    out[i] = haar_wavelet(i - 1, u);
                }
            }
        }
    }
}

/// The `m`-th Haar wavelet in (level, shift) order, L2-normalised on `[0, 1]`.
fn haar_wavelet(m: usize, u: f64) -> f64 {
    let level = usize::BITS - 1 - (m + 1).leading_zeros();
    let shift = (m + 1 - (1usize << level)) as f64;
    let scale = (1u64 << level) as f64;
    let x = scale * u - shift;
    let amp = scale.sqrt();
    if (0.0..0.5).contains(&x) {
        amp
    } else if (0.5..1.0).contains(&x) || (x == 1.0 && u == 1.0) {
        -amp
    } else {
        0.0
    }
}

// Cox-de Boor recursion for the `order` non-zero B-splines at `u`.
fn bspline_into(order: usize, knots: &[f64], p: usize, u: f64, out: &mut [f64]) {
    let deg = order - 1;
    let u = u.clamp(0.0, 1.0);
    // Last non-empty span is [knots[p-1], knots[p]]; u = 1 belongs to it.
    let span = if u >= knots[p] {
        p - 1
    } else {
        let mut s = deg;
        while s + 1 < p && knots[s + 1] <= u {
            s += 1;
        }
        s
    };

    let mut n = vec![0.0; order];
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    n[0] = 1.0;
    for j in 1..=deg {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    for (r, v) in n.into_iter().enumerate() {
        out[span - deg + r] = v;
    }
}

/// `N` functional observations sampled on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    grid: Vec<f64>,
    values: DMatrix<f64>,
}

impl FunctionalSample {
    /// `values` has one row per observation and one column per grid point.
    pub fn new(grid: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if values.ncols() != grid.len() {
            return invalid(format!(
                "values have {} columns but the grid has {} points",
                values.ncols(),
                grid.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("functional sample contains non-finite values");
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Observations concatenated in time order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        for row in self.values.row_iter() {
            out.extend(row.iter().copied());
        }
        out
    }
}

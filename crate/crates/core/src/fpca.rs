//! Empirical functional principal components and the first principal
//! component of a score series.
//!
//! Covariances use divisor `N`. The covariance operator is diagonalised in
//! basis-coefficient space against the Gram matrix, so eigenfunctions are
//! orthonormal under the same trapezoidal inner product used for scores.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::{same_grid, BasisSet, FunctionalSample};
use crate::error::{invalid, Error, Result};

const RANK_TOL: f64 = 1e-10;

/// `N x p` matrix of score vectors, one row per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    scores: DMatrix<f64>,
}

impl ScoreSeries {
    pub fn new(scores: DMatrix<f64>) -> Result<Self> {
        let (n, p) = scores.shape();
        if p == 0 {
            return invalid("score series needs at least one column");
        }
        if n <= 2 * p {
            return invalid(format!("score series needs N > 2p (N = {n}, p = {p})"));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return invalid("score series contains non-finite values");
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.scores.ncols()
    }

    /// The same series with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            scores: &self.scores * c,
        }
    }
}

/// Leading eigenvector of the score covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcDirection {
    pub v: DVector<f64>,
    pub eigenvalue: f64,
    /// Sum of all covariance eigenvalues.
    pub total_variance: f64,
}

/// Estimated eigenfunctions expressed in a representation basis.
#[derive(Debug, Clone)]
pub struct Eigenfunctions {
    basis: BasisSet,
    coef: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    mean: Vec<f64>,
}

impl Eigenfunctions {
    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    /// `K x p` coefficients; column `l` expands the `l`-th eigenfunction.
    pub fn coef(&self) -> &DMatrix<f64> {
        &self.coef
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn p(&self) -> usize {
        self.coef.ncols()
    }

    /// Eigenfunction values on the grid, `G x p`.
    pub fn values(&self) -> DMatrix<f64> {
        self.basis.eval_matrix() * &self.coef
    }
}

/// Pointwise average of the observations.
pub fn mean_function(sample: &FunctionalSample) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return invalid("cannot average an empty sample");
    }
    let n = sample.len() as f64;
    Ok(sample.values().column_iter().map(|c| c.sum() / n).collect())
}

fn fix_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Top-`p` eigenpairs of the empirical covariance operator of `sample`.
pub fn empirical_eigenfunctions(
    sample: &FunctionalSample,
    basis: &BasisSet,
    p: usize,
) -> Result<Eigenfunctions> {
    if sample.is_empty() {
        return invalid("cannot run FPCA on an empty sample");
    }
    if p == 0 || p > basis.p() {
        return invalid(format!(
            "number of components must be in 1..={} (got {p})",
            basis.p()
        ));
    }
    if !same_grid(sample.grid(), basis.grid()) {
        return invalid("sample grid differs from the basis evaluation grid");
    }

    let mean = mean_function(sample)?;
    let n = sample.len();
    let centered = DMatrix::from_fn(n, mean.len(), |t, g| sample.values()[(t, g)] - mean[g]);
    let c = basis.project_values(&centered);
    let cov = c.transpose() * &c / n as f64;

    // Gamma acts on coefficients as cov * Gram; with Gram = L L^T the
    // symmetric form L^T cov L shares its eigenvalues.
    let chol = basis
        .gram()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient {
            kind: basis.kind().to_string(),
            p: basis.p(),
            detail: "Gram matrix is not positive definite".into(),
        })?;
    let l = chol.l();
    let sym = l.transpose() * cov * &l;
    let (values, vectors) = sorted_eigen(sym);

    let top = values.first().copied().unwrap_or(0.0);
    let rank = values
        .iter()
        .filter(|&&v| top > 0.0 && v > RANK_TOL * top)
        .count();
    if p > rank {
        return Err(Error::RankExceeded {
            requested: p,
            attainable: rank,
        });
    }

    let lt = l.transpose();
    let mut coef = DMatrix::zeros(basis.p(), p);
    for k in 0..p {
        let a = vectors.column(k).into_owned();
        let mut b = lt
            .solve_upper_triangular(&a)
            .ok_or_else(|| Error::Conditioning("Cholesky factor is singular".into()))?;
        let norm = (b.transpose() * basis.gram() * &b)[(0, 0)].sqrt();
        b /= norm;
        fix_sign(&mut b);
        coef.set_column(k, &b);
    }

    Ok(Eigenfunctions {
        basis: basis.clone(),
        coef,
        eigenvalues: values[..p].iter().map(|v| v.max(0.0)).collect(),
        mean,
    })
}

/// Inner products of each raw observation with each eigenfunction.
pub fn score_series(sample: &FunctionalSample, eig: &Eigenfunctions) -> Result<ScoreSeries> {
    if !same_grid(sample.grid(), eig.basis().grid()) {
        return invalid("sample grid differs from the eigenfunction grid");
    }
    let mut phi = eig.values();
    for (g, w) in eig.basis().weights().iter().enumerate() {
        phi.row_mut(g).scale_mut(*w);
    }
    ScoreSeries::new(sample.values() * phi)
}

fn centered_covariance(scores: &DMatrix<f64>) -> DMatrix<f64> {
    let n = scores.nrows();
    let means: Vec<f64> = scores.column_iter().map(|c| c.mean()).collect();
    let centered = DMatrix::from_fn(n, scores.ncols(), |t, j| scores[(t, j)] - means[j]);
    centered.transpose() * &centered / n as f64
}

/// Leading principal direction of the demeaned score covariance.
pub fn first_pc(scores: &ScoreSeries) -> Result<PcDirection> {
    let s = scores.scores();
    if s.nrows() < 2 {
        return invalid("first principal component needs N >= 2");
    }
    let cov = centered_covariance(s);
    let total_variance = cov.trace();
    if !(total_variance > 0.0) {
        return Err(Error::Degenerate("score covariance is zero".into()));
    }
    let (values, vectors) = sorted_eigen(cov);
    let mut v = vectors.column(0).into_owned();
    v /= v.norm();
    fix_sign(&mut v);
    Ok(PcDirection {
        v,
        eigenvalue: values[0].max(0.0),
        total_variance,
    })
}

/// Projects every score vector on the principal direction.
pub fn scalarize(scores: &ScoreSeries, dir: &PcDirection) -> Result<Vec<f64>> {
    if dir.v.len() != scores.dim() {
        return invalid(format!(
            "direction has dimension {} but scores have {}",
            dir.v.len(),
            scores.dim()
        ));
    }
    Ok((scores.scores() * &dir.v).iter().copied().collect())
}

//! Synthetic functional time series: functional autoregressive noise in basis
//! coordinates plus a harmonic signal with a fixed spatial envelope.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{make_basis, uniform_grid, BasisKind, BasisSet, FunctionalSample};
use crate::error::{invalid, Error, Result};
use crate::fpca::ScoreSeries;

/// Grid resolution used by the shipped presets.
pub const DEFAULT_GRID_POINTS: usize = 101;

fn default_burn_in() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub grid_points: usize,
}

/// One autoregressive coefficient operator in generating-basis coordinates.
///
/// Matrices are stored as `M[target][source] = <Φ(ν_source), ν_target>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PhiSpec {
    Zero,
    Diagonal { value: f64 },
    Block3,
    Matrix { rows: Vec<Vec<f64>> },
}

impl PhiSpec {
    pub fn matrix(&self, p: usize) -> Result<DMatrix<f64>> {
        match self {
            PhiSpec::Zero => Ok(DMatrix::zeros(p, p)),
            PhiSpec::Diagonal { value } => Ok(make_phi1_diagonal(p, *value)),
            PhiSpec::Block3 => Ok(make_phi2_block(p)),
            PhiSpec::Matrix { rows } => {
                let m = crate::matrix_serde::from_rows(rows).map_err(Error::InvalidInput)?;
                if m.shape() != (p, p) {
                    return invalid(format!(
                        "coefficient matrix is {:?}, expected {p}x{p}",
                        m.shape()
                    ));
                }
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalComponent {
    pub theta: f64,
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub basis: BasisSpec,
    pub p: usize,
    pub n: usize,
    pub ar_order: usize,
    pub phi_specs: Vec<PhiSpec>,
    pub signal: Vec<SignalComponent>,
    /// Envelope polynomial coefficients: `ω(u) = Σ omega[k] u^k`.
    pub omega: Vec<f64>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
}

/// A simulated sample with its least-squares coordinates in the generating basis.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub sample: FunctionalSample,
    pub scores: ScoreSeries,
}

pub fn make_phi1_diagonal(p: usize, value: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal_element(p, p, value)
}

/// Repeats the 3x3 lag-two block along the diagonal; trailing coordinates
/// outside a complete block stay zero.
pub fn make_phi2_block(p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    for s in 0..p / 3 {
        let o = 3 * s;
        m[(o, o)] = 0.7;
        m[(o + 1, o + 1)] = -0.5;
        m[(o + 2, o + 2)] = 0.3;
        m[(o, o + 2)] = 0.3;
        m[(o + 1, o + 2)] = -0.1;
    }
    m
}

/// Spectral radius of the companion matrix of `X_t = Σ_k Φ_k X_{t-k}`.
pub fn spectral_radius(phis: &[DMatrix<f64>]) -> f64 {
    if phis.is_empty() {
        return 0.0;
    }
    let p = phis[0].nrows();
    let q = phis.len();
    let mut c = DMatrix::zeros(p * q, p * q);
    for (k, phi) in phis.iter().enumerate() {
        c.view_mut((0, k * p), (p, p)).copy_from(phi);
    }
    for k in 1..q {
        c.view_mut((k * p, (k - 1) * p), (p, p))
            .copy_from(&DMatrix::identity(p, p));
    }
    match nalgebra::linalg::Schur::try_new(c.clone(), 1e-14, 10_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => gelfand_radius(c),
    }
}

// ||C^(2^k)||^(1/2^k) with rescaling, for matrices where Schur stalls.
fn gelfand_radius(mut c: DMatrix<f64>) -> f64 {
    let mut log_scale = 0.0;
    let mut est = f64::INFINITY;
    for k in 0..40 {
        let norm = c.norm();
        if norm == 0.0 {
            return 0.0;
        }
        est = ((norm.ln() + log_scale) / 2f64.powi(k)).exp();
        c /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        c = &c * &c;
    }
    est
}

fn omega_at(coef: &[f64], u: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

impl SimSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn phi_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        self.phi_specs.iter().map(|s| s.matrix(self.p)).collect()
    }

    pub fn generating_basis(&self) -> Result<BasisSet> {
        make_basis(
            self.basis.kind,
            self.p,
            &uniform_grid(self.basis.grid_points),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return invalid("p must be at least 1");
        }
        if self.n < 3 {
            return invalid(format!("N must be at least 3, got {}", self.n));
        }
        if self.phi_specs.len() != self.ar_order {
            return invalid(format!(
                "ar_order {} but {} coefficient operators given",
                self.ar_order,
                self.phi_specs.len()
            ));
        }
        if self.omega.is_empty() || self.omega.iter().any(|c| !c.is_finite()) {
            return invalid("envelope needs at least one finite coefficient");
        }
        for (i, s) in self.signal.iter().enumerate() {
            if !(s.theta > 0.0 && s.theta < PI) {
                return invalid(format!("signal frequency {} is outside (0, pi)", s.theta));
            }
            if self.signal[..i].iter().any(|o| o.theta == s.theta) {
                return invalid(format!("signal frequency {} is repeated", s.theta));
            }
        }
        let rho = spectral_radius(&self.phi_matrices()?);
        if rho >= 1.0 {
            return Err(Error::NonStationary(rho));
        }
        Ok(())
    }

    /// Noise-free signal values, `N x G`.
    pub fn signal_values(&self) -> DMatrix<f64> {
        let grid = uniform_grid(self.basis.grid_points);
        let env: Vec<f64> = grid.iter().map(|&u| omega_at(&self.omega, u)).collect();
        DMatrix::from_fn(self.n, grid.len(), |t, g| {
            let t = (t + 1) as f64;
            let s: f64 = self
                .signal
                .iter()
                .map(|c| c.alpha * (t * c.theta).cos() + c.beta * (t * c.theta).sin())
                .sum();
            s * env[g]
        })
    }
}

/// Draws one sample; the seed selects the generator, `stream` the replication.
pub fn simulate_stream(spec: &SimSpec, stream: u64) -> Result<Simulation> {
    spec.validate()?;
    let basis = spec.generating_basis()?;
    let phis = spec.phi_matrices()?;
    let p = spec.p;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);

    let total = spec.burn_in + spec.n;
    let q = spec.ar_order;
    let mut history: Vec<nalgebra::DVector<f64>> = vec![nalgebra::DVector::zeros(p); q];
    let mut coords = DMatrix::zeros(spec.n, p);
    for step in 0..total {
        let mut x = nalgebra::DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        for (k, phi) in phis.iter().enumerate() {
            x.gemv(1.0, phi, &history[k], 1.0);
        }
        if q > 0 {
            history.rotate_right(1);
            history[0] = x.clone();
        }
        if step >= spec.burn_in {
            coords
                .row_mut(step - spec.burn_in)
                .copy_from(&x.transpose());
        }
    }
    let values = &coords * basis.eval_matrix().transpose() + spec.signal_values();
    let sample = FunctionalSample::new(basis.grid().to_vec(), values)?;
    let scores = ScoreSeries::new(basis.project(&sample)?)?;
    Ok(Simulation { sample, scores })
}

pub fn simulate(spec: &SimSpec) -> Result<Simulation> {
    simulate_stream(spec, 0)
}

fn cosines(periods: &[f64], amp: &[f64]) -> Vec<SignalComponent> {
    periods
        .iter()
        .zip(amp)
        .map(|(per, a)| SignalComponent {
            theta: 2.0 * PI / per,
            alpha: *a,
            beta: 0.0,
        })
        .collect()
}

fn bspline30(n: usize, seed: u64) -> SimSpec {
    SimSpec {
        basis: BasisSpec {
            kind: BasisKind::BsplineCubic,
            grid_points: DEFAULT_GRID_POINTS,
        },
        p: 30,
        n,
        ar_order: 2,
        phi_specs: vec![PhiSpec::Diagonal { value: 0.2 }, PhiSpec::Block3],
        signal: Vec::new(),
        omega: vec![1.0],
        burn_in: default_burn_in(),
        seed,
    }
}

/// Periods 5, 6 and 15 with envelope `1 + u²` over lag-two functional noise.
pub fn three_cycle(n: usize, seed: u64) -> SimSpec {
    SimSpec {
        signal: cosines(&[5.0, 6.0, 15.0], &[1.0; 3]),
        omega: vec![1.0, 0.0, 1.0],
        ..bspline30(n, seed)
    }
}

/// Periods 5, 6 and 15 with a flat unit envelope.
pub fn three_cycle_flat(n: usize, seed: u64) -> SimSpec {
    SimSpec {
        signal: cosines(&[5.0, 6.0, 15.0], &[1.0; 3]),
        ..bspline30(n, seed)
    }
}

/// Flat three-cycle model with amplitudes `20/√N, 20/√N, 10/√N`.
pub fn three_cycle_local(n: usize, seed: u64) -> SimSpec {
    let s = (n as f64).sqrt();
    SimSpec {
        signal: cosines(&[5.0, 6.0, 15.0], &[20.0 / s, 20.0 / s, 10.0 / s]),
        ..bspline30(n, seed)
    }
}

fn five_cycle_with(n: usize, seed: u64, amp: f64) -> SimSpec {
    SimSpec {
        basis: BasisSpec {
            kind: BasisKind::BsplineCubic,
            grid_points: DEFAULT_GRID_POINTS,
        },
        p: 30,
        n,
        ar_order: 1,
        phi_specs: vec![PhiSpec::Diagonal { value: 0.5 }],
        signal: cosines(&[4.0, 5.0, 6.0, 20.0, 30.0], &[amp; 5]),
        omega: vec![1.0],
        burn_in: default_burn_in(),
        seed,
    }
}

/// Periods 4, 5, 6, 20 and 30 over lag-one noise in 30 cubic B-splines.
pub fn five_cycle(n: usize, seed: u64) -> SimSpec {
    five_cycle_with(n, seed, 1.0)
}

/// Five-cycle model with common amplitude `55/√N`.
pub fn five_cycle_local(n: usize, seed: u64) -> SimSpec {
    five_cycle_with(n, seed, 55.0 / (n as f64).sqrt())
}

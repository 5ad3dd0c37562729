//! Detection of the number of hidden periodicities in functional time series.
//!
//! The pipeline reduces each curve to a score vector (basis projection or
//! empirical FPCA), extracts candidate frequencies one at a time from the
//! periodogram of the score residuals, removes them by harmonic least
//! squares and scores each candidate model with a BIC-type criterion built
//! on the autoregressive prediction error of the first principal component.
//!
//! ```
//! use perioscope_core::{detect, CriterionConfig, ScoreSeries};
//! use nalgebra::DMatrix;
//!
//! let n = 120;
//! let theta = 2.0 * std::f64::consts::PI * 12.0 / n as f64;
//! let scores = DMatrix::from_fn(n, 2, |t, j| {
//!     let t = (t + 1) as f64;
//!     (j as f64 + 1.0) * (t * theta).cos() + 0.3 * ((t * 1.7).sin() * 43758.5453).fract()
//! });
//! let result = detect(&ScoreSeries::new(scores).unwrap(), &CriterionConfig::default()).unwrap();
//! assert!(result.r_hat >= 1);
//! assert!((result.freqs[0] - theta).abs() < 1e-12);
//! ```

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
    }};
}

pub mod arfit;
pub mod basis;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod fpca;
pub mod freqscan;
pub mod harmonic;
pub mod ingest;
mod matrix_serde;
pub mod simgen;

pub use arfit::{fit_ar, prediction_error_profile, ArFit, ErrorProfile};
pub use basis::{make_basis, uniform_grid, BasisKind, BasisSet, FunctionalSample};
pub use detector::{
    detect, kappa_sweep, phi, select, CriterionConfig, CriterionKind, DetectionPath,
    DetectionResult,
};
pub use error::{Error, Result};
pub use fpca::{
    empirical_eigenfunctions, first_pc, mean_function, scalarize, score_series, Eigenfunctions,
    PcDirection, ScoreSeries,
};
pub use freqscan::{next_frequency, pyn, scan, FreqGrid};
pub use harmonic::{design_row, fit, residual_series, HarmonicFit};
pub use ingest::{impute, period_convert, segment, PeriodReport, SeriesFile, YearTrim};
pub use simgen::{make_phi1_diagonal, make_phi2_block, simulate, SimSpec};

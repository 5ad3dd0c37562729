//! Information-criterion selection of the number of periodicities.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::arfit::prediction_error_profile;
use crate::error::{invalid, Error, Result};
use crate::fpca::{first_pc, scalarize, PcDirection, ScoreSeries};
use crate::freqscan::{next_frequency, residual_after, FreqGrid};
use crate::harmonic::{fit, fit_scalar, HarmonicFit};

/// Prediction errors at or below this fraction of the series mean square are
/// treated as an exact fit.
const PERFECT_FIT_TOL: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Bic,
    Aic,
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriterionKind::Bic => "bic",
            CriterionKind::Aic => "aic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub kappa: f64,
    /// Largest autoregressive order `H`.
    pub max_order: usize,
    pub r_max: usize,
    pub kind: CriterionKind,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            max_order: 8,
            r_max: 10,
            kind: CriterionKind::Bic,
        }
    }
}

impl CriterionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return invalid(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.max_order < 1 {
            return invalid("maximum autoregressive order must be at least 1");
        }
        if self.r_max < 1 {
            return invalid("r_max must be at least 1");
        }
        Ok(())
    }

    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    fn check_length(&self, n: usize) -> Result<()> {
        if n <= 5 * self.max_order {
            return invalid(format!("need N > 5H (N = {n}, H = {})", self.max_order));
        }
        if n <= 2 * self.r_max + 1 {
            return invalid(format!(
                "need N > 2 r_max + 1 (N = {n}, r_max = {})",
                self.r_max
            ));
        }
        Ok(())
    }
}

/// `log σ² + (κ r + h) log N / N` (bic) or `log σ² + 2 (κ r + h) / N` (aic).
pub fn phi(sigma2: f64, r: usize, h: usize, n: usize, cfg: &CriterionConfig) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Degenerate(format!(
            "prediction error {sigma2} is not positive at r = {r}, h = {h}"
        )));
    }
    let nf = n as f64;
    let dof = cfg.kappa * r as f64 + h as f64;
    let penalty = match cfg.kind {
        CriterionKind::Bic => dof * nf.ln() / nf,
        CriterionKind::Aic => 2.0 * dof / nf,
    };
    Ok(sigma2.ln() + penalty)
}

/// Everything computed for `r = 0, 1, ...` that does not depend on `κ`.
#[derive(Debug, Clone)]
pub struct DetectionPath {
    n: usize,
    max_order: usize,
    pc: PcDirection,
    scalar: Vec<f64>,
    scores: DMatrix<f64>,
    grid: FreqGrid,
    step_fits: Vec<HarmonicFit>,
    /// Candidate frequencies in extraction order.
    pub freqs: Vec<f64>,
    /// `profiles[r][h]` for every computed `r`.
    pub profiles: Vec<Vec<f64>>,
    /// First `r` whose residual is explained exactly.
    pub degenerate_at: Option<usize>,
    pub grid_exhausted: bool,
    tol: f64,
}

impl DetectionPath {
    /// Computes the `r = 0` step.
    pub fn start(scores: &ScoreSeries, max_order: usize) -> Result<Self> {
        let n = scores.len();
        let pc = first_pc(scores)?;
        let scalar = scalarize(scores, &pc)?;
        let grid = FreqGrid::new(n)?;
        let mean = scalar.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = scalar.iter().map(|v| v - mean).collect();
        let ms = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let mut path = Self {
            n,
            max_order,
            pc,
            scalar,
            scores: scores.scores().clone(),
            grid,
            step_fits: Vec::new(),
            freqs: Vec::new(),
            profiles: Vec::new(),
            degenerate_at: None,
            grid_exhausted: false,
            tol: PERFECT_FIT_TOL * ms,
        };
        path.push_profile(&centered)?;
        Ok(path)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pc(&self) -> &PcDirection {
        &self.pc
    }

    /// Largest `r` with a computed profile.
    pub fn depth(&self) -> usize {
        self.profiles.len() - 1
    }

    /// True when no further step can be computed.
    pub fn finished(&self) -> bool {
        self.grid_exhausted || self.degenerate_at.is_some()
    }

    fn push_profile(&mut self, resid: &[f64]) -> Result<()> {
        let prof = prediction_error_profile(resid, self.max_order)?;
        if prof.sigma2[0] <= self.tol {
            self.degenerate_at = Some(self.profiles.len());
        }
        self.profiles.push(prof.sigma2);
        Ok(())
    }

    /// Extracts the next frequency and profiles the joint scalar refit.
    pub fn extend(&mut self) -> Result<()> {
        if self.finished() {
            return Ok(());
        }
        let theta = match next_frequency(&self.scores, &self.step_fits, &mut self.grid) {
            Ok(theta) => theta,
            Err(Error::EmptyGrid) => {
                self.grid_exhausted = true;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let resid = residual_after(&self.scores, &self.step_fits)?;
        self.step_fits.push(fit(&resid, &[theta])?);
        self.freqs.push(theta);
        let joint = self.scalar_fit(self.freqs.len())?;
        let resid: Vec<f64> = joint.residuals.iter().copied().collect();
        self.push_profile(&resid)
    }

    fn scalar_fit(&self, r: usize) -> Result<HarmonicFit> {
        fit_scalar(&self.scalar, &self.freqs[..r])
    }

    /// `(ĥ_r, φ(r, ĥ_r))`; orders whose error is an exact fit are skipped.
    fn best_order(&self, r: usize, cfg: &CriterionConfig) -> Result<(usize, f64)> {
        let prof = &self.profiles[r];
        let mut best: Option<(usize, f64)> = None;
        for (h, &s2) in prof.iter().enumerate().take(cfg.max_order + 1) {
            if s2 <= self.tol {
                continue;
            }
            let v = phi(s2, r, h, self.n, cfg)?;
            if best.map_or(true, |(_, b)| v < b) {
                best = Some((h, v));
            }
        }
        best.ok_or_else(|| Error::Degenerate(format!("no usable prediction error at r = {r}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub r: usize,
    pub h: usize,
    /// Absent when the residual at this `r` is an exact fit.
    pub phi: Option<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub p: usize,
    /// Share of score variance carried by the first principal component.
    pub leading_share: f64,
    pub leading_eigenvalue: f64,
    pub grid_resolution: f64,
    pub cap_hit: bool,
    pub degenerate: bool,
    pub grid_exhausted: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub r_hat: usize,
    pub freqs: Vec<f64>,
    /// Every extracted frequency, including the one that failed to improve.
    pub candidates: Vec<f64>,
    pub best_h: Vec<usize>,
    pub trace: Vec<TraceEntry>,
    pub config: CriterionConfig,
    /// Harmonic fit of the first-PC series on the selected frequencies.
    pub fit: HarmonicFit,
    /// First principal direction of the scores.
    pub direction: Vec<f64>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub r_hat: usize,
    pub trace: Vec<TraceEntry>,
    pub cap_hit: bool,
    pub degenerate: bool,
    pub grid_exhausted: bool,
}

// Returns `None` when the stopping rule needs a step the path does not have yet.
fn try_select(path: &DetectionPath, cfg: &CriterionConfig) -> Result<Option<Selection>> {
    let mut sel = Selection {
        r_hat: 0,
        trace: Vec::new(),
        cap_hit: false,
        degenerate: false,
        grid_exhausted: false,
    };
    if path.degenerate_at == Some(0) {
        sel.degenerate = true;
        sel.trace.push(TraceEntry {
            r: 0,
            h: 0,
            phi: None,
            sigma2: path.profiles[0][0],
        });
        return Ok(Some(sel));
    }
    let (h0, mut current) = path.best_order(0, cfg)?;
    sel.trace.push(TraceEntry {
        r: 0,
        h: h0,
        phi: Some(current),
        sigma2: path.profiles[0][h0],
    });
    let mut r = 0;
    loop {
        if r + 1 > cfg.r_max {
            sel.cap_hit = true;
            break;
        }
        if r + 1 > path.depth() {
            if path.grid_exhausted {
                sel.grid_exhausted = true;
                break;
            }
            return Ok(None);
        }
        if path.degenerate_at == Some(r + 1) {
            sel.trace.push(TraceEntry {
                r: r + 1,
                h: 0,
                phi: None,
                sigma2: path.profiles[r + 1][0],
            });
            sel.degenerate = true;
            r += 1;
            break;
        }
        let (h, v) = path.best_order(r + 1, cfg)?;
        sel.trace.push(TraceEntry {
            r: r + 1,
            h,
            phi: Some(v),
            sigma2: path.profiles[r + 1][h],
        });
        if v < current {
            current = v;
            r += 1;
        } else {
            break;
        }
    }
    sel.r_hat = r;
    Ok(Some(sel))
}

/// Applies the stopping rule to a precomputed path.
pub fn select(path: &DetectionPath, cfg: &CriterionConfig) -> Result<Selection> {
    cfg.validate()?;
    if cfg.max_order > path.max_order {
        return invalid(format!(
            "path was computed up to order {} but the criterion asks for {}",
            path.max_order, cfg.max_order
        ));
    }
    try_select(path, cfg)?
        .ok_or_else(|| Error::InvalidInput("path is too short for this criterion".into()))
}

fn finish(path: &DetectionPath, cfg: &CriterionConfig, sel: Selection) -> Result<DetectionResult> {
    let fit = path.scalar_fit(sel.r_hat)?;
    let mut warnings = Vec::new();
    let h4 = (cfg.max_order as f64).powi(4);
    if h4 > path.n as f64 {
        warnings.push(format!("H^4 = {h4} exceeds N = {}", path.n));
    }
    let pc = &path.pc;
    Ok(DetectionResult {
        r_hat: sel.r_hat,
        freqs: path.freqs[..sel.r_hat].to_vec(),
        candidates: path.freqs[..(sel.trace.len() - 1).min(path.freqs.len())].to_vec(),
        best_h: sel.trace.iter().map(|e| e.h).collect(),
        trace: sel.trace,
        config: *cfg,
        fit,
        direction: pc.v.iter().copied().collect(),
        diagnostics: Diagnostics {
            n: path.n,
            p: pc.v.len(),
            leading_share: pc.eigenvalue / pc.total_variance,
            leading_eigenvalue: pc.eigenvalue,
            grid_resolution: path.grid.resolution(),
            cap_hit: sel.cap_hit,
            degenerate: sel.degenerate,
            grid_exhausted: sel.grid_exhausted,
            warnings,
        },
    })
}

/// Runs the sequential extraction until the criterion stops improving.
pub fn detect(scores: &ScoreSeries, cfg: &CriterionConfig) -> Result<DetectionResult> {
    cfg.validate()?;
    cfg.check_length(scores.len())?;
    let mut path = DetectionPath::start(scores, cfg.max_order)?;
    loop {
        if let Some(sel) = try_select(&path, cfg)? {
            return finish(&path, cfg, sel);
        }
        path.extend()?;
    }
}

/// Builds the path as deep as `template.r_max` allows.
pub fn full_path(scores: &ScoreSeries, template: &CriterionConfig) -> Result<DetectionPath> {
    template.validate()?;
    template.check_length(scores.len())?;
    let mut path = DetectionPath::start(scores, template.max_order)?;
    while path.depth() < template.r_max && !path.finished() {
        path.extend()?;
    }
    Ok(path)
}

/// `r̂` for each `κ`, sharing the extracted frequencies and error profiles.
pub fn kappa_sweep(
    scores: &ScoreSeries,
    kappas: &[f64],
    template: &CriterionConfig,
) -> Result<Vec<(f64, DetectionResult)>> {
    let path = full_path(scores, template)?;
    kappas
        .iter()
        .map(|&k| {
            let cfg = template.with_kappa(k);
            let sel = select(&path, &cfg)?;
            Ok((k, finish(&path, &cfg, sel)?))
        })
        .collect()
}

//! Seeded Monte-Carlo replications of the detector over simulated samples.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{make_basis, BasisKind, FunctionalSample};
use crate::detector::{kappa_sweep, CriterionConfig};
use crate::error::{invalid, Result};
use crate::fpca::{empirical_eigenfunctions, score_series, ScoreSeries};
use crate::simgen::{simulate_stream, SimSpec};

/// Environment variable capping the worker count of replication sweeps.
pub const THREADS_ENV: &str = "PERIOSCOPE_THREADS";

/// How curves are reduced to score vectors before detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ScoreSource {
    /// Empirical FPCA with `p` components, represented in `nbasis` cubic B-splines.
    Fpca { p: usize, nbasis: usize },
    /// Least-squares coordinates in a fixed basis.
    Projection { kind: BasisKind, p: usize },
}

impl ScoreSource {
    pub fn p(&self) -> usize {
        match *self {
            ScoreSource::Fpca { p, .. } | ScoreSource::Projection { p, .. } => p,
        }
    }
}

pub fn sample_scores(sample: &FunctionalSample, source: &ScoreSource) -> Result<ScoreSeries> {
    match *source {
        ScoreSource::Fpca { p, nbasis } => {
            let k = nbasis.max(p).min(sample.grid().len());
            let basis = make_basis(BasisKind::BsplineCubic, k, sample.grid())?;
            let eig = empirical_eigenfunctions(sample, &basis, p)?;
            score_series(sample, &eig)
        }
        ScoreSource::Projection { kind, p } => {
            let basis = make_basis(kind, p, sample.grid())?;
            ScoreSeries::new(basis.project(sample)?)
        }
    }
}

/// Detector output of one replication for one `κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kappa: f64,
    pub r_hat: usize,
    pub freqs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: u64,
    pub runs: Vec<RunSummary>,
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

fn one(
    spec: &SimSpec,
    source: &ScoreSource,
    cfg: &CriterionConfig,
    kappas: &[f64],
    index: u64,
) -> Result<Replication> {
    let sim = simulate_stream(spec, index)?;
    let scores = sample_scores(&sim.sample, source)?;
    let runs = kappa_sweep(&scores, kappas, cfg)?
        .into_iter()
        .map(|(kappa, res)| RunSummary {
            kappa,
            r_hat: res.r_hat,
            freqs: res.freqs,
        })
        .collect();
    Ok(Replication { index, runs })
}

/// Runs replications `0..reps` (generator stream = replication index) and
/// returns them ordered by index regardless of scheduling.
pub fn replicate(
    spec: &SimSpec,
    source: &ScoreSource,
    cfg: &CriterionConfig,
    kappas: &[f64],
    reps: u64,
) -> Result<Vec<Replication>> {
    if kappas.is_empty() {
        return invalid("at least one kappa value is required");
    }
    for &k in kappas {
        cfg.with_kappa(k).validate()?;
    }
    let work = || -> Result<Vec<Replication>> {
        (0..reps)
            .into_par_iter()
            .map(|i| one(spec, source, cfg, kappas, i))
            .collect()
    };
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| crate::error::Error::InvalidInput(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Counts of `r̂` per `κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaTable {
    pub kappas: Vec<f64>,
    pub r_max: usize,
    /// `counts[i][r]` replications with `r̂ = r` under `kappas[i]`.
    pub counts: Vec<Vec<usize>>,
}

impl KappaTable {
    pub fn from_replications(reps: &[Replication], kappas: &[f64], r_max: usize) -> Self {
        let mut counts = vec![vec![0; r_max + 1]; kappas.len()];
        for rep in reps {
            for (i, run) in rep.runs.iter().enumerate() {
                counts[i][run.r_hat.min(r_max)] += 1;
            }
        }
        Self {
            kappas: kappas.to_vec(),
            r_max,
            counts,
        }
    }

    pub fn count(&self, kappa_index: usize, r: usize) -> usize {
        self.counts[kappa_index].get(r).copied().unwrap_or(0)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["kappa".to_string()];
        header.extend((0..=self.r_max).map(|r| format!("r{r}")));
        w.write_record(&header)?;
        for (k, row) in self.kappas.iter().zip(&self.counts) {
            let mut rec = vec![k.to_string()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Histogram of `r̂` for a single `κ`.
pub fn histogram(reps: &[Replication], kappa_index: usize) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for rep in reps {
        *h.entry(rep.runs[kappa_index].r_hat).or_insert(0) += 1;
    }
    h
}

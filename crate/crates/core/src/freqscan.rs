//! Periodogram statistic over the Fourier grid and sequential frequency
//! extraction.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::harmonic::HarmonicFit;

// Scans with fewer multiply-adds than this run serially.
const PARALLEL_WORK: usize = 1 << 18;

/// Fourier frequencies `2πj/N` strictly inside `(0, π)`, minus excluded indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreqGrid {
    n: usize,
    excluded: BTreeSet<usize>,
}

impl FreqGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return invalid(format!("frequency grid needs N >= 3, got {n}"));
        }
        Ok(Self {
            n,
            excluded: BTreeSet::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest index with `2πj/N < π`.
    pub fn max_index(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    /// Grid spacing `2π/N`.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.max_index()).filter(|j| !self.excluded.contains(j))
    }

    pub fn points(&self) -> Vec<f64> {
        self.indices().map(|j| self.theta(j)).collect()
    }

    pub fn excluded(&self) -> &BTreeSet<usize> {
        &self.excluded
    }

    pub fn exclude(&mut self, j: usize) {
        self.excluded.insert(j);
    }

    pub fn is_empty(&self) -> bool {
        self.indices().next().is_none()
    }

    /// Index of the grid point nearest to `theta`.
    pub fn nearest_index(&self, theta: f64) -> usize {
        let j = (theta / self.resolution()).round() as usize;
        j.clamp(1, self.max_index())
    }
}

/// Result of a grid scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanHit {
    pub index: usize,
    pub theta: f64,
    pub value: f64,
}

fn demeaned(scores: &DMatrix<f64>) -> DMatrix<f64> {
    let means: Vec<f64> = scores.column_iter().map(|c| c.mean()).collect();
    DMatrix::from_fn(scores.nrows(), scores.ncols(), |t, j| {
        scores[(t, j)] - means[j]
    })
}

/// `Σ_j |N⁻¹ Σ_t (Y_t^(j) − Ȳ^(j)) e^{itθ}|²` with `t = 1..N`.
pub fn pyn(scores: &DMatrix<f64>, theta: f64) -> f64 {
    let n = scores.nrows();
    if n == 0 {
        return 0.0;
    }
    let (sin, cos): (Vec<f64>, Vec<f64>) = (1..=n).map(|t| (t as f64 * theta).sin_cos()).unzip();
    let x = demeaned(scores);
    x.column_iter()
        .map(|col| {
            let (mut re, mut im) = (0.0, 0.0);
            for t in 0..n {
                re += col[t] * cos[t];
                im += col[t] * sin[t];
            }
            (re * re + im * im) / (n * n) as f64
        })
        .sum()
}

/// `pyn` at every remaining grid index, in increasing index order.
pub fn grid_values(scores: &DMatrix<f64>, grid: &FreqGrid) -> Result<Vec<(usize, f64)>> {
    let n = scores.nrows();
    if n != grid.n() {
        return invalid(format!(
            "grid was built for N = {} but the series has {n} rows",
            grid.n()
        ));
    }
    let x = demeaned(scores);
    // cos/sin of 2πm/N, indexed by j t mod N.
    let (sin, cos): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|m| (2.0 * PI * m as f64 / n as f64).sin_cos())
        .unzip();
    let eval = |j: usize| {
        let mut total = 0.0;
        for col in x.column_iter() {
            let (mut re, mut im) = (0.0, 0.0);
            for t in 1..=n {
                let m = (j * t) % n;
                let v = col[t - 1];
                re += v * cos[m];
                im += v * sin[m];
            }
            total += (re * re + im * im) / (n * n) as f64;
        }
        (j, total)
    };
    let idx: Vec<usize> = grid.indices().collect();
    let work = idx.len() * n * x.ncols();
    Ok(if work >= PARALLEL_WORK {
        idx.into_par_iter().map(eval).collect()
    } else {
        idx.into_iter().map(eval).collect()
    })
}

/// Grid maximiser of `pyn`; ties go to the lowest frequency.
pub fn scan(scores: &DMatrix<f64>, grid: &FreqGrid) -> Result<ScanHit> {
    let values = grid_values(scores, grid)?;
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in values {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    let (index, value) = best.ok_or(Error::EmptyGrid)?;
    Ok(ScanHit {
        index,
        theta: grid.theta(index),
        value,
    })
}

/// Scores minus the fitted values of every accumulated per-step fit.
pub fn residual_after(scores: &DMatrix<f64>, fits: &[HarmonicFit]) -> Result<DMatrix<f64>> {
    let mut resid = scores.clone();
    for f in fits {
        if f.residuals.shape() != scores.shape() {
            return invalid("accumulated fit does not match the score dimensions");
        }
        resid -= f.fitted();
    }
    Ok(resid)
}

/// Scans the residual left by `fits` and removes the winning index from `grid`.
pub fn next_frequency(
    scores: &DMatrix<f64>,
    fits: &[HarmonicFit],
    grid: &mut FreqGrid,
) -> Result<f64> {
    if fits.iter().any(|f| f.freqs.len() != 1) {
        return invalid("each accumulated fit must carry exactly one frequency");
    }
    let resid = residual_after(scores, fits)?;
    let hit = scan(&resid, grid)?;
    grid.exclude(hit.index);
    Ok(hit.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::fit;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn column(n: usize, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, 1, |t, _| f((t + 1) as f64))
    }

    // Direct complex summation, written independently of `pyn`.
    fn oracle(y: &[f64], theta: f64) -> f64 {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let mut acc = (0.0f64, 0.0f64);
        for (i, v) in y.iter().enumerate() {
            let t = (i + 1) as f64;
            acc.0 += (v - mean) * (t * theta).cos();
            acc.1 += (v - mean) * (t * theta).sin();
        }
        (acc.0 * acc.0 + acc.1 * acc.1) / (n * n)
    }

    #[test]
    fn grid_excludes_pi() {
        assert_eq!(FreqGrid::new(20).unwrap().max_index(), 9);
        assert_eq!(FreqGrid::new(21).unwrap().max_index(), 10);
        let g = FreqGrid::new(20).unwrap();
        assert!(g.points().iter().all(|&th| th > 0.0 && th < PI));
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn closed_form_values_at_fourier_frequencies() {
        let y = column(20, |t| (2.0 * PI * t / 5.0).cos());
        let v: Vec<f64> = y.iter().copied().collect();
        assert_close!(pyn(&y, 2.0 * PI / 5.0), 0.25, 1e-12);
        assert_close!(oracle(&v, 2.0 * PI / 5.0), 0.25, 1e-12);
        assert_close!(pyn(&y, 2.0 * PI * 3.0 / 20.0), 0.0, 1e-12);
        assert_close!(pyn(&DMatrix::zeros(20, 2), 1.0), 0.0, 0.0);
    }

    #[test]
    fn amplitude_limit_at_grid_frequency() {
        let (a, b) = (1.3, -0.4);
        for n in [60usize, 240, 960] {
            let theta = 2.0 * PI * (n / 6) as f64 / n as f64;
            let y = column(n, |t| a * (t * theta).cos() + b * (t * theta).sin());
            let v = pyn(&y, theta);
            assert!(
                (v - (a * a + b * b) / 4.0).abs() < 10.0 / n as f64,
                "n = {n}: {v}"
            );
        }
    }

    #[test]
    fn grid_values_match_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = DMatrix::from_fn(97, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let grid = FreqGrid::new(97).unwrap();
        for (j, v) in grid_values(&y, &grid).unwrap() {
            assert_close!(v, pyn(&y, grid.theta(j)), 1e-12);
        }
    }

    #[test]
    fn scan_finds_planted_cosine() {
        let y = column(20, |t| (2.0 * PI * 4.0 * t / 20.0).cos());
        let grid = FreqGrid::new(20).unwrap();
        let hit = scan(&y, &grid).unwrap();
        let exhaustive = (1..=9)
            .map(|j| (j, pyn(&y, 2.0 * PI * j as f64 / 20.0)))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert_eq!(hit.index, exhaustive.0);
        assert_close!(hit.theta, 2.0 * PI * 4.0 / 20.0, 1e-15);
    }

    #[test]
    fn scan_prefers_the_larger_amplitude() {
        let n = 120;
        let (t1, t2) = (2.0 * PI / 5.0, 2.0 * PI / 12.0);
        let y = column(n, |t| (t * t1).cos() + 3.0 * (t * t2).cos());
        let hit = scan(&y, &FreqGrid::new(n).unwrap()).unwrap();
        assert_close!(hit.theta, t2, 1e-12);
    }

    #[test]
    fn ties_go_to_the_lowest_frequency() {
        let n = 40;
        let (t1, t2) = (2.0 * PI * 3.0 / 40.0, 2.0 * PI * 11.0 / 40.0);
        let y = column(n, |t| (t * t1).cos() + (t * t2).cos());
        let values = grid_values(&y, &FreqGrid::new(n).unwrap()).unwrap();
        let v3 = values.iter().find(|v| v.0 == 3).unwrap().1;
        let v11 = values.iter().find(|v| v.0 == 11).unwrap().1;
        assert_eq!(
            v3.to_bits(),
            v11.to_bits(),
            "planted values are not bitwise equal"
        );
        assert_eq!(scan(&y, &FreqGrid::new(n).unwrap()).unwrap().index, 3);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let mut grid = FreqGrid::new(5).unwrap();
        grid.exclude(1);
        grid.exclude(2);
        assert!(grid.is_empty());
        assert!(matches!(
            scan(&DMatrix::zeros(5, 1), &grid),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn white_noise_maxima_are_spread_out() {
        let n = 200;
        let grid = FreqGrid::new(n).unwrap();
        let mut counts = std::collections::HashMap::new();
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let y = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            *counts.entry(scan(&y, &grid).unwrap().index).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c <= 10), "{counts:?}");
    }

    #[test]
    fn sequential_extraction() {
        let n = 120;
        let (t1, t2) = (2.0 * PI / 5.0, 2.0 * PI / 15.0);
        let y = DMatrix::from_fn(n, 2, |t, j| {
            let t = (t + 1) as f64;
            3.0 * (t * t1).cos() * (j as f64 + 1.0) + (t * t2).sin()
        });
        let mut grid = FreqGrid::new(n).unwrap();
        let first = next_frequency(&y, &[], &mut grid).unwrap();
        assert_eq!(first, scan(&y, &FreqGrid::new(n).unwrap()).unwrap().theta);
        assert_close!(first, t1, 1e-12);
        assert!(grid.excluded().contains(&24));

        let f1 = fit(&y, &[first]).unwrap();
        let second = next_frequency(&y, &[f1.clone()], &mut grid).unwrap();
        assert_close!(second, t2, 1e-12);

        let resid = residual_after(&y, &[f1.clone()]).unwrap();
        let f2 = fit(&resid, &[second]).unwrap();
        let left = residual_after(&y, &[f1, f2]).unwrap();
        let hit = scan(&left, &grid).unwrap();
        assert!(hit.value < 1e-10, "residual max {}", hit.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scaling_and_shift_behaviour(seed in any::<u64>(), c in 0.01f64..50.0, shift in -100.0f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 64;
            let y = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let theta = 2.0 * PI * 7.0 / n as f64;
            let base = pyn(&y, theta);
            prop_assert!((pyn(&(&y * c), theta) - c * c * base).abs() <= 1e-10 * c * c * base.max(1e-3));
            let mut shifted = y.clone();
            shifted.column_mut(1).add_scalar_mut(shift);
            prop_assert!((pyn(&shifted, theta) - base).abs() <= 1e-9 * (1.0 + shift.abs()));
            let grid = FreqGrid::new(n).unwrap();
            prop_assert_eq!(scan(&y, &grid).unwrap().index, scan(&(&y * c), &grid).unwrap().index);
        }
    }
}

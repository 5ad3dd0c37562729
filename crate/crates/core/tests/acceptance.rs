//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test -p perioscope-core --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use perioscope_core::arfit::prediction_error_profile;
use perioscope_core::experiment::{replicate, Replication, ScoreSource};
use perioscope_core::fpca::{empirical_eigenfunctions, score_series};
use perioscope_core::harmonic::fit;
use perioscope_core::simgen::{five_cycle, simulate_stream, three_cycle};
use perioscope_core::{
    detect, impute, make_basis, period_convert, pyn, scan, segment, uniform_grid, BasisKind,
    CriterionConfig, CriterionKind, FreqGrid, ScoreSeries, SeriesFile, YearTrim,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 1;

fn report(id: u32, ok: bool, what: &str) {
    println!("{} [{id}] {what}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {what}");
}

fn three_cycle_kappas() -> &'static [f64] {
    &[5.0, 4.0, 6.0, 8.0, 10.0]
}

// Shared by the rate, kappa and frequency-accuracy checks.
fn three_cycle_runs() -> &'static Vec<Replication> {
    static RUNS: OnceLock<Vec<Replication>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let src = ScoreSource::Projection {
            kind: BasisKind::BsplineCubic,
            p: 30,
        };
        replicate(
            &three_cycle(120, SEED),
            &src,
            &CriterionConfig::default(),
            three_cycle_kappas(),
            100,
        )
        .unwrap()
    })
}

fn correct(runs: &[Replication], k: usize, r0: usize) -> usize {
    runs.iter().filter(|r| r.runs[k].r_hat == r0).count()
}

#[test]
fn c1_three_cycle_rate_at_n120() {
    let runs = three_cycle_runs();
    let hits = correct(runs, 0, 3);
    report(
        1,
        hits >= 90,
        &format!(
            "three-cycle model, N=120, B-spline p=30, kappa=5: r_hat=3 in {hits}/100 (need >= 90)"
        ),
    );
}

#[test]
fn c2_kappa_insensitivity() {
    let runs = three_cycle_runs();
    let rates: Vec<(f64, usize)> = (1..5)
        .map(|k| (three_cycle_kappas()[k], correct(runs, k, 3)))
        .collect();
    let ok = rates.iter().all(|(_, c)| *c >= 90);
    let list: Vec<String> = rates
        .iter()
        .map(|(k, c)| format!("kappa={k}: {c}"))
        .collect();
    report(
        2,
        ok,
        &format!(
            "three-cycle model, N=120, correct out of 100: {} (each >= 90)",
            list.join(", ")
        ),
    );
}

#[test]
fn c3_frequencies_hit_grid_points() {
    let runs = three_cycle_runs();
    let grid = FreqGrid::new(120).unwrap();
    let want: Vec<u64> = {
        let mut v: Vec<f64> = [5.0, 6.0, 15.0]
            .iter()
            .map(|per| grid.theta(grid.nearest_index(2.0 * PI / per)))
            .collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.iter().map(|x| x.to_bits()).collect()
    };
    let mut checked = 0;
    let mut bad = 0;
    for rep in runs.iter() {
        let run = &rep.runs[0];
        if run.r_hat != 3 {
            continue;
        }
        checked += 1;
        let mut got = run.freqs.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if got.iter().map(|x| x.to_bits()).collect::<Vec<_>>() != want {
            bad += 1;
        }
    }
    report(
        3,
        bad == 0 && checked > 0,
        &format!(
            "exact grid frequencies in {} of {checked} correct runs",
            checked - bad
        ),
    );
}

#[test]
fn c4_periodogram_closed_form() {
    let n = 20;
    let y = DMatrix::from_fn(n, 1, |t, _| (2.0 * PI * (t + 1) as f64 / 5.0).cos());
    let direct = |theta: f64| {
        let mean = y.column(0).mean();
        let (mut re, mut im) = (0.0, 0.0);
        for t in 0..n {
            let a = (t + 1) as f64 * theta;
            re += (y[(t, 0)] - mean) * a.cos();
            im += (y[(t, 0)] - mean) * a.sin();
        }
        (re * re + im * im) / (n * n) as f64
    };
    let (t1, t2) = (2.0 * PI / 5.0, 2.0 * PI * 3.0 / 20.0);
    let (a, b) = (pyn(&y, t1), pyn(&y, t2));
    let ok = (a - 0.25).abs() <= 1e-12
        && b.abs() <= 1e-12
        && (direct(t1) - 0.25).abs() <= 1e-12
        && direct(t2).abs() <= 1e-12
        && (a - direct(t1)).abs() <= 1e-12;
    report(
        4,
        ok,
        &format!(
            "p(2pi/5) - 0.25 = {:.3e}, p(3pi/10) = {b:.3e} (within 1e-12); direct sum agrees",
            a - 0.25
        ),
    );
}

fn basis_rate(p: usize) -> usize {
    let src = ScoreSource::Projection {
        kind: BasisKind::Fourier,
        p,
    };
    let runs = replicate(
        &three_cycle(960, SEED),
        &src,
        &CriterionConfig::default(),
        &[5.0],
        30,
    )
    .unwrap();
    correct(&runs, 0, 3)
}

#[test]
fn c5_fourier_basis_robustness() {
    let rates: Vec<(usize, usize)> = [1, 5].iter().map(|&p| (p, basis_rate(p))).collect();
    let ok = rates.iter().all(|(_, c)| *c as f64 >= 0.85 * 30.0);
    let list: Vec<String> = rates
        .iter()
        .map(|(p, c)| format!("p={p}: {c}/30"))
        .collect();
    report(
        5,
        ok,
        &format!(
            "three-cycle model, N=960, Fourier analysis basis: {} (need >= 85%)",
            list.join(", ")
        ),
    );
}

#[test]
fn c6_white_noise_null() {
    let cfg = CriterionConfig::default();
    let mut zeros = 0;
    for rep in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        rng.set_stream(rep);
        let s = DMatrix::from_fn(480, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        if detect(&ScoreSeries::new(s).unwrap(), &cfg).unwrap().r_hat == 0 {
            zeros += 1;
        }
    }
    report(
        6,
        zeros >= 45,
        &format!("white-noise scores, p=3, N=480: r_hat=0 in {zeros}/50 (need >= 45)"),
    );
}

#[test]
fn c7_aic_overfits_more_than_bic() {
    let src = ScoreSource::Fpca { p: 5, nbasis: 30 };
    let spec = five_cycle(120, SEED);
    let count = |kind: CriterionKind| {
        let cfg = CriterionConfig {
            kind,
            ..CriterionConfig::default()
        };
        let runs = replicate(&spec, &src, &cfg, &[5.0], 100).unwrap();
        let over = runs.iter().filter(|r| r.runs[0].r_hat > 5).count();
        let exact = correct(&runs, 0, 5);
        (over, exact)
    };
    let (aic, aic5) = count(CriterionKind::Aic);
    let (bic, bic5) = count(CriterionKind::Bic);
    report(
        7,
        aic > bic,
        &format!("five-cycle model, N=120: r_hat>5 aic {aic} vs bic {bic} (r_hat=5: aic {aic5}, bic {bic5})"),
    );
}

/// Daily counts, one per line, starting 1 January 1876.
fn sunspot_path() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("PERIOSCOPE_SUNSPOT_CSV") {
        return Some(PathBuf::from(p));
    }
    let bundled =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/data/sunspots_daily_1876_2015.csv");
    bundled.exists().then_some(bundled)
}

#[test]
fn c8_sunspot_eleven_year_cycle() {
    let Some(path) = sunspot_path() else {
        report(
            8,
            false,
            "daily sunspot series 1876-2015 not available (set PERIOSCOPE_SUNSPOT_CSV or add crates/cli/data/sunspots_daily_1876_2015.csv)",
        );
        return;
    };
    let file = SeriesFile::from_path(&path, None).unwrap();
    let values = impute(&file.values).unwrap();
    let trim = YearTrim::Gregorian {
        start_year: 1876,
        keep: 364,
    };
    let sample = segment(&values, 182, &trim).unwrap();
    let basis = make_basis(BasisKind::BsplineCubic, 30, sample.grid()).unwrap();
    let eig = empirical_eigenfunctions(&sample, &basis, 10).unwrap();
    let scores = score_series(&sample, &eig).unwrap();
    let res = detect(&scores, &CriterionConfig::default()).unwrap();
    let years = res
        .freqs
        .first()
        .map(|&th| period_convert(th, 182, 364.0).unwrap().period_years);
    let ok = matches!(years, Some(y) if (10.0..=12.0).contains(&y));
    report(
        8,
        ok,
        &format!(
            "sunspots m=182, p=10: N={}, r_hat={}, first period {years:?} years (need 10-12)",
            sample.len(),
            res.r_hat
        ),
    );
}

#[test]
fn c9_invariant_suite() {
    let mut failures = Vec::new();

    // nested prediction-error profiles never increase
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..300)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let s = prediction_error_profile(&x, 8).unwrap().sigma2;
        if s.windows(2).any(|w| w[1] > w[0]) {
            failures.push(format!("profile increases for seed {seed}"));
        }
    }

    // harmonic residuals are orthogonal to the design
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 150;
        let scale = 10f64.powi(seed as i32 % 5 - 2);
        let y = DMatrix::from_fn(n, 3, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let freqs = [2.0 * PI * 7.0 / n as f64, 2.0 * PI * 31.0 / n as f64, 1.234];
        let f = fit(&y, &freqs).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..3 {
            for k in 0..7 {
                let dot: f64 = (0..n)
                    .map(|t| {
                        let row = perioscope_core::design_row((t + 1) as f64, &freqs);
                        row[k] * f.residuals[(t, j)]
                    })
                    .sum();
                worst = worst.max(dot.abs());
            }
        }
        if worst > 1e-6 * n as f64 * scale {
            failures.push(format!("orthogonality {worst:.3e} for seed {seed}"));
        }
    }

    // FPCA eigenfunctions are orthonormal under the quadrature inner product
    for seed in 0..10u64 {
        let sim = simulate_stream(&three_cycle(120, SEED), seed).unwrap();
        let basis = make_basis(BasisKind::BsplineCubic, 30, &uniform_grid(101)).unwrap();
        let eig = empirical_eigenfunctions(&sim.sample, &basis, 8).unwrap();
        let v = eig.values();
        for a in 0..8 {
            for b in 0..8 {
                let ip = basis.inner(v.column(a).as_slice(), v.column(b).as_slice());
                let want = if a == b { 1.0 } else { 0.0 };
                if (ip - want).abs() > 1e-8 {
                    failures.push(format!("eigenfunction inner product ({a},{b}) = {ip}"));
                }
            }
        }
    }

    // scan argmax is unchanged by positive rescaling
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DMatrix::from_fn(128, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let grid = FreqGrid::new(128).unwrap();
        let base = scan(&y, &grid).unwrap().index;
        for c in [1e-6, 0.3, 17.0, 1e5] {
            if scan(&(&y * c), &grid).unwrap().index != base {
                failures.push(format!(
                    "scan argmax moved under scaling {c} for seed {seed}"
                ));
            }
        }
    }

    // identical seeds give bitwise-identical samples
    let spec = three_cycle(120, SEED);
    for rep in 0..5u64 {
        let a = simulate_stream(&spec, rep).unwrap();
        let b = simulate_stream(&spec, rep).unwrap();
        let same = a
            .sample
            .values()
            .iter()
            .zip(b.sample.values().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        if !same {
            failures.push(format!("replication {rep} is not reproducible"));
        }
    }

    report(
        9,
        failures.is_empty(),
        &format!(
            "invariant suite: {} violation(s) {:?}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

use std::error::Error;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use perioscope_core::experiment::{replicate, sample_scores, KappaTable, ScoreSource};
use perioscope_core::simgen::simulate;
use perioscope_core::{
    detect, impute, period_convert, segment, BasisKind, CriterionConfig, CriterionKind,
    DetectionResult, PeriodReport, SeriesFile, SimSpec, YearTrim,
};
use serde::{Deserialize, Serialize};

type Res<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "perioscope",
    version,
    about = "Count and locate hidden periodicities in functional time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a scalar series into curves and estimate its periodicities.
    Detect(DetectArgs),
    /// Draw one sample from a simulation spec.
    Simulate(SimulateArgs),
    /// Tabulate the estimated number of periodicities over replications and kappa values.
    BenchKappa(BenchArgs),
    /// Convert a frequency in radians per curve to calendar units.
    Period(PeriodArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Fpca,
    Bspline,
    Fourier,
    Haar,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Bic,
    Aic,
}

#[derive(Args)]
struct CriterionArgs {
    #[arg(long, default_value_t = 5.0)]
    kappa: f64,
    /// Largest autoregressive order.
    #[arg(long = "H", default_value_t = 8)]
    h: usize,
    /// Largest number of periodicities.
    #[arg(long, default_value_t = 10)]
    rmax: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Bic)]
    criterion: CriterionArg,
}

impl CriterionArgs {
    fn config(&self) -> Res<CriterionConfig> {
        let cfg = CriterionConfig {
            kappa: self.kappa,
            max_order: self.h,
            r_max: self.rmax,
            kind: match self.criterion {
                CriterionArg::Bic => CriterionKind::Bic,
                CriterionArg::Aic => CriterionKind::Aic,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SourceArgs {
    #[arg(long, value_enum, default_value_t = BasisArg::Fpca)]
    basis: BasisArg,
    /// Number of scores per curve.
    #[arg(long, default_value_t = 10)]
    p: usize,
    /// B-spline representation size used by fpca.
    #[arg(long, default_value_t = 30)]
    nbasis: usize,
}

impl SourceArgs {
    fn source(&self) -> ScoreSource {
        let kind = match self.basis {
            BasisArg::Fpca => {
                return ScoreSource::Fpca {
                    p: self.p,
                    nbasis: self.nbasis,
                }
            }
            BasisArg::Bspline => BasisKind::BsplineCubic,
            BasisArg::Fourier => BasisKind::Fourier,
            BasisArg::Haar => BasisKind::Haar,
        };
        ScoreSource::Projection { kind, p: self.p }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// CSV file with one value per line; `-` reads standard input.
    input: PathBuf,
    /// Column name or zero-based index.
    #[arg(long)]
    column: Option<String>,
    /// Ticks per curve.
    #[arg(long)]
    m: usize,
    /// Ticks per year, used for trimming and period conversion.
    #[arg(long, default_value_t = 365.0)]
    days_per_year: f64,
    /// Daily data starting 1 January of this year; trims each calendar year to --days-per-year.
    #[arg(long, conflicts_with = "year_length")]
    start_year: Option<i32>,
    /// Fixed year length in ticks; trims each year to --days-per-year.
    #[arg(long)]
    year_length: Option<usize>,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    criterion: CriterionArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// SimSpec JSON file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of curves.
    #[arg(long)]
    n: Option<usize>,
    /// Write generating-basis scores instead of curve values.
    #[arg(long)]
    scores: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Comma-separated kappa values.
    #[arg(long, value_delimiter = ',', default_value = "4,5,6,8,10")]
    kappa: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    reps: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "H", default_value_t = 8)]
    h: usize,
    #[arg(long, default_value_t = 10)]
    rmax: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Bic)]
    criterion: CriterionArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PeriodArgs {
    /// Frequency in radians per curve.
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 365.0)]
    days_per_year: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectOutput {
    curves: usize,
    missing: usize,
    result: DetectionResult,
    periods: Vec<PeriodReport>,
}

fn read_spec(path: &Path, seed: Option<u64>) -> Res<SimSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let spec = SimSpec::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(match seed {
        Some(s) => spec.with_seed(s),
        None => spec,
    })
}

fn run_detect(a: &DetectArgs) -> Res<String> {
    let file = if a.input.as_os_str() == "-" {
        SeriesFile::from_reader(std::io::stdin().lock(), a.column.as_deref())?
    } else {
        SeriesFile::from_path(&a.input, a.column.as_deref())
            .map_err(|e| format!("{}: {e}", a.input.display()))?
    };
    let values = impute(&file.values)?;
    if a.days_per_year.fract() != 0.0 && (a.start_year.is_some() || a.year_length.is_some()) {
        return Err("--days-per-year must be a whole number when trimming years".into());
    }
    let keep = a.days_per_year as usize;
    let trim = match (a.start_year, a.year_length) {
        (Some(start_year), _) => YearTrim::Gregorian { start_year, keep },
        (None, Some(year_length)) => YearTrim::Fixed { year_length, keep },
        (None, None) => YearTrim::None,
    };
    let sample = segment(&values, a.m, &trim)?;
    let scores = sample_scores(&sample, &a.source.source())?;
    let result = detect(&scores, &a.criterion.config()?)?;
    let periods = result
        .freqs
        .iter()
        .map(|&th| period_convert(th, a.m, a.days_per_year))
        .collect::<Result<Vec<_>, _>>()?;
    let out = DetectOutput {
        curves: sample.len(),
        missing: file.missing(),
        result,
        periods,
    };
    Ok(serde_json::to_string_pretty(&out)? + "\n")
}

fn run_simulate(a: &SimulateArgs) -> Res<String> {
    let mut spec = read_spec(&a.spec, a.seed)?;
    if let Some(n) = a.n {
        spec = spec.with_n(n);
    }
    let sim = simulate(&spec)?;
    let (header, m) = if a.scores {
        let s = sim.scores.scores().clone();
        (
            (1..=s.ncols()).map(|i| format!("s{i}")).collect::<Vec<_>>(),
            s,
        )
    } else {
        let g = sim.sample.grid();
        (
            g.iter().map(|u| format!("u={u}")).collect(),
            sim.sample.values().clone(),
        )
    };
    let mut text = header.join(",");
    text.push('\n');
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    Ok(text)
}

fn run_bench(a: &BenchArgs) -> Res<String> {
    let spec = read_spec(&a.spec, a.seed)?;
    let crit = CriterionArgs {
        kappa: a.kappa.first().copied().unwrap_or(5.0),
        h: a.h,
        rmax: a.rmax,
        criterion: a.criterion,
    };
    let cfg = crit.config()?;
    let runs = replicate(&spec, &a.source.source(), &cfg, &a.kappa, a.reps)?;
    Ok(KappaTable::from_replications(&runs, &a.kappa, cfg.r_max).to_csv()?)
}

fn run_period(a: &PeriodArgs) -> Res<String> {
    let rep = period_convert(a.theta, a.m, a.days_per_year)?;
    Ok(serde_json::to_string_pretty(&rep)? + "\n")
}

// Writes beside the target, then renames.
fn emit(text: &str, out: Option<&Path>) -> Res<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| format!("{}: {e}", dir.display()))?;
            tmp.write_all(text.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(path)
                .map_err(|e| format!("{}: {}", path.display(), e.error))?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Res<()> {
    let (text, out) = match &cli.command {
        Command::Detect(a) => (run_detect(a)?, a.out.as_deref()),
        Command::Simulate(a) => (run_simulate(a)?, a.out.as_deref()),
        Command::BenchKappa(a) => (run_bench(a)?, a.out.as_deref()),
        Command::Period(a) => (run_period(a)?, a.out.as_deref()),
    };
    emit(&text, out)
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!(
                "perioscope: {}",
                one_line(first.trim_start_matches("error: "))
            );
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("perioscope: {}", one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}

//! Command workflows: fit, benchmark, sweep-sigma, search-trace and bound.
//!
//! Every command prints a human-readable table on stdout and, with `--out`,
//! writes a JSON report. Outputs are written only after all computation has
//! succeeded, each through a temporary file renamed into place, so a failed
//! run leaves no partial files. Timing fields are the only nondeterministic
//! report content.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bound::{convexity_check, g_table, minimize_g, BoundParams};
use crate::dataset::{
    downsample, generate_synthetic, load_table, split_train_test, Dataset, Standardizer, SyntheticConfig,
    TableFormat,
};
use crate::error::{Error, Result};
use crate::linmodel::{LearningRate, TrainConfig};
use crate::methods::{fit_baseline, fit_feataug, fit_import, fit_pred, Baseline, MethodResult};
use crate::search::{run_strategy, AlphaEvaluator, SearchReport, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "reweight", version, about = "Domain adaptation by tuned loss reweighting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search alpha, refit, and write the model and search report.
    Fit(FitArgs),
    /// Compare baselines, competing methods and the alpha search.
    Benchmark(BenchmarkArgs),
    /// Benchmark a fixed synthetic target against sources of varying shift.
    SweepSigma(SweepArgs),
    /// Best-so-far accuracy traces of gss, grid and random search.
    SearchTrace(CommonArgs),
    /// Tabulate and minimize the error bound g(alpha).
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Gss,
    Grid,
    Random,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Gss => Strategy::Gss,
            StrategyArg::Grid => Strategy::Grid,
            StrategyArg::Random => Strategy::Random,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Target data file (CSV with header, or sparse `label idx:val` rows).
    #[arg(long, requires = "source", conflicts_with = "synthetic")]
    pub target: Option<PathBuf>,
    /// Source data file, same format and dimension as the target.
    #[arg(long, requires = "target")]
    pub source: Option<PathBuf>,
    /// File format; inferred from the extension (`.csv` or not) when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// CSV column holding the 0/1 or -1/+1 label.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Use generated data instead of files.
    #[arg(long, required_unless_present = "target")]
    pub synthetic: bool,
    /// Target training rows (synthetic: rows drawn from the split's train part;
    /// files: optional downsample of the train part).
    #[arg(long)]
    pub n_target: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub n_source: usize,
    /// Synthetic target rows generated before the train/test split.
    #[arg(long, default_value_t = 10_000)]
    pub target_pool: usize,
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    /// Fraction of target rows held out for testing.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Alpha precision.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Cross-validation folds over target training rows.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "gss")]
    pub strategy: StrategyArg,
    /// Probes drawn by random search.
    #[arg(long, default_value_t = 25)]
    pub probes: usize,
    /// Train every probe from zero instead of from the nearest cached alpha.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Z-score every column using statistics of target-train plus source.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta0: f64,
    /// Inverse-scaling decay; 0 gives a constant learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub decay: f64,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Where to write the refit model as `key=value` text.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated source shifts.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,4,8")]
    pub sigmas: Vec<f64>,
    /// Also run the grid/cold-start comparator and timing section per sigma.
    #[arg(long)]
    pub with_unoptimized: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    /// Intervals in the printed table.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Files {
        target: PathBuf,
        source: PathBuf,
        format: TableFormat,
        label_column: String,
        n_target: Option<usize>,
    },
    Synthetic {
        config: SyntheticConfig,
        n_target: usize,
    },
}

/// Validated settings shared by the data-driven commands; echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub data: DataSource,
    pub test_fraction: f64,
    pub delta: f64,
    pub k: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub random_probes: usize,
    pub warm_start: bool,
    pub standardize: bool,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_args(command: &str, a: &CommonArgs) -> Result<Self> {
        let data = match (&a.target, &a.source) {
            (Some(target), Some(source)) => DataSource::Files {
                format: match a.format {
                    Some(FormatArg::Csv) => TableFormat::Csv,
                    Some(FormatArg::Sparse) => TableFormat::Sparse,
                    None if target.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => TableFormat::Csv,
                    None => TableFormat::Sparse,
                },
                target: target.clone(),
                source: source.clone(),
                label_column: a.label_column.clone(),
                n_target: a.n_target,
            },
            _ => DataSource::Synthetic {
                config: SyntheticConfig {
                    n_target: a.target_pool,
                    n_source: a.n_source,
                    d: a.d,
                    sigma: a.sigma,
                    noise_sd: a.noise_sd,
                    seed: a.seed,
                },
                n_target: a.n_target.unwrap_or(500),
            },
        };
        let learning_rate = if a.decay == 0.0 {
            LearningRate::Constant { eta0: a.eta0 }
        } else {
            LearningRate::InverseScaling {
                eta0: a.eta0,
                decay: a.decay,
            }
        };
        let run = RunConfig {
            command: command.to_string(),
            data,
            test_fraction: a.test_fraction,
            delta: a.delta,
            k: a.k,
            seed: a.seed,
            strategy: a.strategy.into(),
            random_probes: a.probes,
            warm_start: !a.no_warm_start,
            standardize: a.standardize,
            train: TrainConfig {
                l2_penalty: a.l2,
                learning_rate,
                max_epochs: a.max_epochs,
                tolerance: a.tol,
                batch_size: a.batch_size,
                seed: a.seed,
            },
        };
        run.validate()?;
        Ok(run)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return bad(format!("delta {} not in (0, 0.5]", self.delta));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.random_probes < 1 {
            return bad("random search needs at least one probe".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test fraction {} not in (0, 1)", self.test_fraction));
        }
        if let DataSource::Synthetic { config, n_target } = &self.data {
            config.validate()?;
            if *n_target < 1 {
                return bad("n_target must be at least 1".into());
            }
        }
        self.train.validate()
    }
}

/// Target train/test partition plus source rows, ready for training.
#[derive(Debug, Clone)]
pub struct Split {
    pub target_train: Dataset,
    pub target_test: Dataset,
    pub source: Dataset,
}

impl Split {
    /// Splits `target` into train and test with `test_fraction`, optionally
    /// downsamples the train part, and optionally standardizes all parts with
    /// statistics of target-train plus source.
    pub fn new(
        target: &Dataset,
        source: Dataset,
        test_fraction: f64,
        n_train: Option<usize>,
        standardize: bool,
        seed: u64,
    ) -> Result<Self> {
        let (mut target_train, mut target_test) = split_train_test(target, test_fraction, seed)?;
        if let Some(n) = n_train {
            target_train = downsample(&target_train, n, seed)?;
        }
        let mut source = source;
        if standardize {
            let z = Standardizer::fit(&[&target_train, &source])?;
            target_train = z.apply(&target_train)?;
            target_test = z.apply(&target_test)?;
            source = z.apply(&source)?;
        }
        Ok(Self {
            target_train,
            target_test,
            source,
        })
    }
}

/// Loads or generates the data a run describes.
pub fn prepare(run: &RunConfig) -> Result<Split> {
    match &run.data {
        DataSource::Files {
            target,
            source,
            format,
            label_column,
            n_target,
        } => {
            let t = load_table(target, *format, label_column)?;
            let s = load_table(source, *format, label_column)?;
            Split::new(&t, s, run.test_fraction, *n_target, run.standardize, run.seed)
        }
        DataSource::Synthetic { config, n_target } => {
            let (t, s) = generate_synthetic(config)?;
            Split::new(&t, s, run.test_fraction, Some(*n_target), run.standardize, run.seed)
        }
    }
}

fn evaluator(split: &Split, run: &RunConfig, warm_start: bool) -> Result<AlphaEvaluator> {
    Ok(AlphaEvaluator::new(&split.target_train, &split.source, run.k, run.train.clone())?.with_warm_start(warm_start))
}

fn run_search(split: &Split, run: &RunConfig, strategy: Strategy, warm_start: bool) -> Result<(SearchReport, f64)> {
    let start = Instant::now();
    let mut ev = evaluator(split, run, warm_start)?;
    let (_, report) = run_strategy(&mut ev, strategy, run.delta, run.random_probes, run.seed)?;
    Ok((report, start.elapsed().as_secs_f64()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: RunConfig,
    pub n_target_train: usize,
    pub n_target_test: usize,
    pub n_source: usize,
    pub alpha_star: f64,
    pub cv_accuracy: f64,
    pub test_accuracy: f64,
    pub fit_seconds: f64,
    pub search: SearchReport,
}

pub fn fit(run: &RunConfig, split: &Split) -> Result<FitReport> {
    let (search, fit_seconds) = run_search(split, run, run.strategy, run.warm_start)?;
    Ok(FitReport {
        config: run.clone(),
        n_target_train: split.target_train.n_rows(),
        n_target_test: split.target_test.n_rows(),
        n_source: split.source.n_rows(),
        alpha_star: search.alpha_star,
        cv_accuracy: search.cv_accuracy,
        test_accuracy: search.final_model.accuracy(&split.target_test)?,
        fit_seconds,
        search,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub name: String,
    pub test_accuracy: f64,
    pub fit_seconds: f64,
    pub alpha: Option<f64>,
}

impl From<&MethodResult> for MethodRow {
    fn from(r: &MethodResult) -> Self {
        Self {
            name: r.method_name.clone(),
            test_accuracy: r.test_accuracy,
            fit_seconds: r.fit_seconds,
            alpha: r.alpha,
        }
    }
}

/// One cumulative optimization stage of the alpha search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub stage: String,
    pub seconds: f64,
    pub evaluations: usize,
    pub epochs: usize,
    /// Baseline seconds divided by this stage's seconds.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: RunConfig,
    pub rows: Vec<MethodRow>,
    pub alpha_star: f64,
    pub search: SearchReport,
    pub timing: Vec<TimingRow>,
}

impl BenchmarkReport {
    pub fn accuracy(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.test_accuracy)
    }
}

/// Fits every method on the same split and scores all on the same test rows.
/// With `unoptimized`, also runs grid search with cold starts and a
/// cumulative timing section: grid + cold starts, then gss, then warm starts.
pub fn benchmark(run: &RunConfig, split: &Split, unoptimized: bool) -> Result<BenchmarkReport> {
    let (t, s, test, cfg) = (&split.target_train, &split.source, &split.target_test, &run.train);
    let mut rows = Vec::new();
    for kind in [Baseline::Target, Baseline::Source, Baseline::All] {
        rows.push(MethodRow::from(&fit_baseline(kind, t, s, test, cfg)?));
    }
    let (search, gss_seconds) = run_search(split, run, Strategy::Gss, true)?;
    rows.push(MethodRow {
        name: "crosstrainer".into(),
        test_accuracy: search.final_model.accuracy(test)?,
        fit_seconds: gss_seconds,
        alpha: Some(search.alpha_star),
    });

    let mut timing = Vec::new();
    if unoptimized {
        let (grid, grid_seconds) = run_search(split, run, Strategy::Grid, false)?;
        rows.push(MethodRow {
            name: "crosstrainer-unopt".into(),
            test_accuracy: grid.final_model.accuracy(test)?,
            fit_seconds: grid_seconds,
            alpha: Some(grid.alpha_star),
        });
        let (gss_cold, gss_cold_seconds) = run_search(split, run, Strategy::Gss, false)?;
        for (stage, report, seconds) in [
            ("grid+cold", &grid, grid_seconds),
            ("+gss", &gss_cold, gss_cold_seconds),
            ("+warm-start", &search, gss_seconds),
        ] {
            timing.push(TimingRow {
                stage: stage.into(),
                seconds,
                evaluations: report.probes.len(),
                epochs: report.total_epochs(),
                speedup: grid_seconds / seconds,
            });
        }
    }

    rows.push(MethodRow::from(&fit_pred(t, s, test, cfg)?));
    rows.push(MethodRow::from(&fit_import(t, s, test, cfg)?));
    rows.push(MethodRow::from(&fit_feataug(t, s, test, cfg)?));
    Ok(BenchmarkReport {
        config: run.clone(),
        rows,
        alpha_star: search.alpha_star,
        search,
        timing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub report: BenchmarkReport,
}

/// Benchmarks each sigma in order. The synthetic target does not depend on
/// sigma, so every row shares the same target split.
pub fn sweep_sigma(run: &RunConfig, sigmas: &[f64], unoptimized: bool) -> Result<Vec<SweepRow>> {
    let DataSource::Synthetic { config, n_target } = &run.data else {
        return Err(Error::Config("sweep-sigma needs --synthetic data".into()));
    };
    if sigmas.is_empty() {
        return Err(Error::Config("no sigmas given".into()));
    }
    if let Some(bad) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::Config(format!("sigma {bad} must be finite and non-negative")));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            let mut run = run.clone();
            run.data = DataSource::Synthetic {
                config: SyntheticConfig {
                    sigma,
                    ..config.clone()
                },
                n_target: *n_target,
            };
            let split = prepare(&run)?;
            Ok(SweepRow {
                sigma,
                report: benchmark(&run, &split, unoptimized)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub alpha: f64,
    pub accuracy: f64,
    pub best_so_far: f64,
    pub cumulative_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTrace {
    pub strategy: Strategy,
    pub alpha_star: f64,
    pub test_accuracy: f64,
    pub points: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub config: RunConfig,
    pub traces: Vec<StrategyTrace>,
}

/// Runs gss, grid and random search, each with a fresh evaluator built from
/// the same configuration.
pub fn search_trace(run: &RunConfig, split: &Split) -> Result<TraceReport> {
    let traces = [Strategy::Gss, Strategy::Grid, Strategy::Random]
        .into_iter()
        .map(|strategy| {
            let (report, _) = run_search(split, run, strategy, run.warm_start)?;
            let mut elapsed = 0.0;
            let points = report
                .probes
                .iter()
                .zip(report.best_so_far())
                .enumerate()
                .map(|(i, (p, best))| {
                    elapsed += p.train_seconds;
                    TracePoint {
                        iteration: i + 1,
                        alpha: p.alpha,
                        accuracy: p.accuracy,
                        best_so_far: best,
                        cumulative_seconds: elapsed,
                    }
                })
                .collect();
            Ok(StrategyTrace {
                strategy,
                alpha_star: report.alpha_star,
                test_accuracy: report.final_model.accuracy(&split.target_test)?,
                points,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TraceReport {
        config: run.clone(),
        traces,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub params: BoundParams,
    pub alpha_min: f64,
    pub g_min: f64,
    pub convex: bool,
    pub table: Vec<(f64, f64)>,
}

pub fn bound_report(args: &BoundArgs) -> Result<BoundReport> {
    let params = BoundParams::new(args.beta, args.a, args.b)?;
    let alpha_min = minimize_g(&params, args.tol)?;
    Ok(BoundReport {
        params,
        alpha_min,
        g_min: crate::bound::g_alpha(alpha_min, &params)?,
        convex: convexity_check(&params, 0.001)?,
        table: g_table(&params, args.points)?,
    })
}

/// Writes `contents` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s.into_bytes()
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

pub fn render_fit(r: &FitReport) -> String {
    let mut out = String::new();
    writeln!(out, "strategy      {}", r.search.strategy).unwrap();
    writeln!(out, "delta         {}", r.config.delta).unwrap();
    writeln!(out, "k             {}", r.config.k).unwrap();
    writeln!(out, "warm_start    {}", r.config.warm_start).unwrap();
    writeln!(out, "rows          target {} / test {} / source {}", r.n_target_train, r.n_target_test, r.n_source).unwrap();
    writeln!(out, "alpha*        {:.6}", r.alpha_star).unwrap();
    writeln!(out, "cv accuracy   {}%", pct(r.cv_accuracy)).unwrap();
    writeln!(out, "test accuracy {}%", pct(r.test_accuracy)).unwrap();
    writeln!(out, "evaluations   {}", r.search.probes.len()).unwrap();
    writeln!(out, "epochs        {}", r.search.total_epochs()).unwrap();
    writeln!(out, "seconds       {:.3}", r.fit_seconds).unwrap();
    out
}

pub fn render_benchmark(r: &BenchmarkReport) -> String {
    let mut out = String::new();
    writeln!(out, "{:<20} {:>9} {:>10} {:>8}", "method", "test acc%", "seconds", "alpha").unwrap();
    for row in &r.rows {
        let alpha = row.alpha.map_or("-".to_string(), |a| format!("{a:.4}"));
        writeln!(out, "{:<20} {:>9} {:>10.3} {:>8}", row.name, pct(row.test_accuracy), row.fit_seconds, alpha).unwrap();
    }
    if !r.timing.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "{:<14} {:>10} {:>6} {:>8} {:>8}", "stage", "seconds", "evals", "epochs", "speedup").unwrap();
        for t in &r.timing {
            writeln!(
                out,
                "{:<14} {:>10.3} {:>6} {:>8} {:>7.2}x",
                t.stage, t.seconds, t.evaluations, t.epochs, t.speedup
            )
            .unwrap();
        }
    }
    out
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let names: Vec<String> = rows
        .first()
        .map(|r| r.report.rows.iter().map(|m| m.name.clone()).collect())
        .unwrap_or_default();
    write!(out, "{:>6}", "sigma").unwrap();
    for n in &names {
        write!(out, " {:>18}", n).unwrap();
    }
    writeln!(out, " {:>8}", "alpha*").unwrap();
    for row in rows {
        write!(out, "{:>6}", row.sigma).unwrap();
        for m in &row.report.rows {
            write!(out, " {:>18}", pct(m.test_accuracy)).unwrap();
        }
        writeln!(out, " {:>8.4}", row.report.alpha_star).unwrap();
    }
    out
}

pub fn render_trace(r: &TraceReport) -> String {
    let mut out = String::new();
    for t in &r.traces {
        writeln!(
            out,
            "# {} evaluations={} alpha*={:.4} test={}%",
            t.strategy,
            t.points.len(),
            t.alpha_star,
            pct(t.test_accuracy)
        )
        .unwrap();
        writeln!(out, "iteration\talpha\taccuracy\tbest_so_far\tseconds").unwrap();
        for p in &t.points {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.4}",
                p.iteration, p.alpha, p.accuracy, p.best_so_far, p.cumulative_seconds
            )
            .unwrap();
        }
    }
    out
}

pub fn render_bound(r: &BoundReport) -> String {
    let mut out = String::new();
    writeln!(out, "alpha\tg").unwrap();
    for (a, g) in &r.table {
        writeln!(out, "{a:.4}\t{g:.6}").unwrap();
    }
    writeln!(out, "argmin {:.6} g {:.6} convex {}", r.alpha_min, r.g_min, r.convex).unwrap();
    out
}

/// Runs a parsed command; returns the text for stdout. Files are written only
/// once everything has been computed.
pub fn execute(cli: &Cli) -> Result<String> {
    let (stdout, files): (String, Vec<(PathBuf, Vec<u8>)>) = match &cli.command {
        Command::Fit(a) => {
            let run = RunConfig::from_args("fit", &a.common)?;
            let split = prepare(&run)?;
            let report = fit(&run, &split)?;
            let mut files = Vec::new();
            if let Some(p) = &a.model_out {
                files.push((p.clone(), report.search.final_model.to_text(Some(&run.train)).into_bytes()));
            }
            if let Some(p) = &a.common.out {
                files.push((p.clone(), to_json(&report)));
            }
            (render_fit(&report), files)
        }
        Command::Benchmark(a) => {
            let run = RunConfig::from_args("benchmark", &a.common)?;
            let split = prepare(&run)?;
            let report = benchmark(&run, &split, true)?;
            let files = a.common.out.iter().map(|p| (p.clone(), to_json(&report))).collect();
            (render_benchmark(&report), files)
        }
        Command::SweepSigma(a) => {
            let run = RunConfig::from_args("sweep-sigma", &a.common)?;
            let rows = sweep_sigma(&run, &a.sigmas, a.with_unoptimized)?;
            let files = a.common.out.iter().map(|p| (p.clone(), to_json(&rows))).collect();
            (render_sweep(&rows), files)
        }
        Command::SearchTrace(a) => {
            let run = RunConfig::from_args("search-trace", a)?;
            let split = prepare(&run)?;
            let report = search_trace(&run, &split)?;
            let files = a.out.iter().map(|p| (p.clone(), to_json(&report))).collect();
            (render_trace(&report), files)
        }
        Command::Bound(a) => {
            let report = bound_report(a)?;
            let files = a.out.iter().map(|p| (p.clone(), to_json(&report))).collect();
            (render_bound(&report), files)
        }
    };
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    Ok(stdout)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Config(_) | Error::Validation(_) | Error::Format { .. } => EXIT_VALIDATION,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("reweight: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let cli = Cli::try_parse_from(["reweight", "fit", "--synthetic"]).unwrap();
        let Command::Fit(a) = cli.command else { panic!() };
        let run = RunConfig::from_args("fit", &a.common).unwrap();
        assert_eq!(run.delta, 0.01);
        assert_eq!(run.k, 5);
        assert_eq!(run.strategy, Strategy::Gss);
        assert!(run.warm_start);
    }

    #[test]
    fn rejects_bad_search_settings() {
        for args in [["reweight", "fit", "--synthetic", "--delta", "0.7"], ["reweight", "fit", "--synthetic", "--k", "1"]] {
            let Command::Fit(a) = Cli::try_parse_from(args).unwrap().command else { panic!() };
            assert!(matches!(RunConfig::from_args("fit", &a.common), Err(Error::Config(_))));
        }
    }

    #[test]
    fn data_source_is_required() {
        assert!(Cli::try_parse_from(["reweight", "fit"]).is_err());
        assert!(Cli::try_parse_from(["reweight", "fit", "--target", "t.csv"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Validation("x".into())), EXIT_VALIDATION);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
    }
}

//! The `graybox` command line. Every command is a thin shell over library
//! calls.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graybox_core::benchmark::{synth_benchmark, SynthOptions};
use graybox_core::metrics::Axis;

use crate::bench_io::{load_benchmark, save_benchmark};
use crate::error::{io_err, Error, Result};
use crate::report::{report, write_csv, Metric, ReportOptions};
use crate::runner::{execute, parse_seeds, Method, MethodOptions, RunSpec};
use crate::trace_io::read_trace;

#[derive(Debug, Parser)]
#[command(
    name = "graybox",
    version,
    about = "Gray-box hyperparameter optimization on tabular learning-curve benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic benchmark directory.
    Synth(SynthArgs),
    /// Run a method over several seeds, one trace file per seed.
    Run(RunArgs),
    /// Compute a metric from trace files as tidy CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub configs: usize,
    #[arg(long, default_value_t = 20)]
    pub budgets: usize,
    /// Fraction of configurations whose curves cross late, in [0, 1].
    #[arg(long, default_value_t = 0.3, value_parser = unit_interval)]
    pub crossing: f64,
    #[arg(long, default_value_t = 0.01, value_parser = non_negative)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Benchmark directory with meta.json and curves.jsonl.
    pub benchmark: PathBuf,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Seeds as `0..10`, `0..=9` or `1,2,5`.
    #[arg(long, default_value = "0..10", value_parser = seed_list)]
    pub seeds: SeedList,
    /// Total epochs each run may spend.
    #[arg(long)]
    pub budget_cap: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 10)]
    pub n_init: usize,
    #[arg(long, default_value_t = 3)]
    pub eta: usize,
    /// Score this many random candidates per step instead of all.
    #[arg(long)]
    pub candidates: Option<usize>,
}

/// Seed list parsed from a single flag value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

fn seed_list(s: &str) -> std::result::Result<SeedList, String> {
    parse_seeds(s).map(SeedList)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Epochs,
    Seconds,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_parser = parse_metric)]
    pub metric: Metric,
    /// Glob pattern of trace files, e.g. `out/*.jsonl`.
    #[arg(long)]
    pub traces: String,
    /// Benchmark directories the traces refer to, matched by name.
    #[arg(long = "benchmark", required = true)]
    pub benchmarks: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = AxisArg::Epochs)]
    pub axis: AxisArg,
    /// Top fraction for the precision metric.
    #[arg(long, default_value_t = 0.01, value_parser = unit_interval)]
    pub top_fraction: f64,
    /// Grid spacing for rank reports.
    #[arg(long, default_value_t = 10.0)]
    pub rank_every: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and non-negative"))
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse()
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse()
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let b = synth_benchmark(&SynthOptions {
        n_configs: a.configs,
        max_budget: a.budgets,
        crossing_fraction: a.crossing,
        noise_sd: a.noise,
        seed: a.seed,
    })?;
    save_benchmark(&b, &a.out)
}

pub fn cmd_run(a: &RunArgs) -> Result<Vec<PathBuf>> {
    let spec = RunSpec {
        benchmark_path: a.benchmark.clone(),
        method: a.method,
        seeds: a.seeds.0.clone(),
        budget_cap: a.budget_cap,
        output_dir: a.out.clone(),
        options: MethodOptions {
            n_init_random: a.n_init,
            eta: a.eta,
            candidate_sample: a.candidates,
        },
    };
    let benchmark = load_benchmark(&spec.benchmark_path)?;
    execute(&spec, &benchmark, a.jobs)
}

/// Trace files matching `pattern`, sorted so output order is stable.
pub fn expand_traces(pattern: &str) -> Result<Vec<PathBuf>> {
    let bad = |reason: String| Error::Format {
        path: pattern.into(),
        reason,
    };
    let mut paths = glob::glob(pattern)
        .map_err(|e| bad(e.to_string()))?
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| bad(e.to_string()))?;
    if paths.is_empty() {
        return Err(bad("no trace files match".into()));
    }
    paths.sort();
    Ok(paths)
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut benchmarks = BTreeMap::new();
    for dir in &a.benchmarks {
        let b = load_benchmark(dir)?;
        benchmarks.insert(b.name().to_string(), b);
    }
    let traces = expand_traces(&a.traces)?
        .iter()
        .map(read_trace)
        .collect::<Result<Vec<_>>>()?;
    let opts = ReportOptions {
        axis: match a.axis {
            AxisArg::Epochs => Axis::Epochs,
            AxisArg::Seconds => Axis::Seconds,
        },
        top_fraction: a.top_fraction,
        rank_every: a.rank_every,
    };
    let rows = report(a.metric, &traces, &benchmarks, &opts)?;
    match &a.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            write_csv(&rows, io::BufWriter::new(file))
        }
        None => write_csv(&rows, io::stdout().lock()),
    }
}

/// Parses `args` (program name first) and runs the command. Exit code 0 on
/// success, 2 on usage errors, 1 on runtime failures.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a).map(|_| ()),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(1)
        }
    }
}

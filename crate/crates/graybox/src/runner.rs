//! Runs one method over many seeds and writes one trace per seed.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use graybox_core::baselines::{run_asha, run_hyperband, run_random_search, run_successive_halving};
use graybox_core::benchmark::Benchmark;
use graybox_core::optimizer::{run_dyhpo, CandidatePool, DyhpoOptions};
use graybox_core::trace::RunTrace;
use rayon::prelude::*;

use crate::error::{io_err, Error, Result};
use crate::trace_io::write_trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Dyhpo,
    DyhpoNoCurve,
    RandomSearch,
    SuccessiveHalving,
    Hyperband,
    Asha,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dyhpo,
        Method::DyhpoNoCurve,
        Method::RandomSearch,
        Method::SuccessiveHalving,
        Method::Hyperband,
        Method::Asha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dyhpo => "dyhpo",
            Method::DyhpoNoCurve => "dyhpo-nocurve",
            Method::RandomSearch => "rs",
            Method::SuccessiveHalving => "sh",
            Method::Hyperband => "hyperband",
            Method::Asha => "asha",
        }
    }

    pub fn supported() -> String {
        Self::ALL.map(Method::name).join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`, supported: {}", Self::supported()))
    }
}

/// Options that only some methods read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOptions {
    pub n_init_random: usize,
    pub eta: usize,
    /// Score only this many random candidates per step instead of all.
    pub candidate_sample: Option<usize>,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            n_init_random: 10,
            eta: 3,
            candidate_sample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub benchmark_path: PathBuf,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub budget_cap: usize,
    pub output_dir: PathBuf,
    pub options: MethodOptions,
}

/// Runs `method` once on `benchmark`. Same inputs, same trace.
pub fn run_method(
    benchmark: &Benchmark,
    method: Method,
    seed: u64,
    budget_cap: usize,
    options: &MethodOptions,
) -> graybox_core::Result<RunTrace> {
    match method {
        Method::Dyhpo | Method::DyhpoNoCurve => {
            let mut o = DyhpoOptions::new(budget_cap, seed);
            o.n_init_random = options.n_init_random;
            o.use_curve_input = method == Method::Dyhpo;
            o.fit.use_curve = o.use_curve_input;
            if let Some(k) = options.candidate_sample {
                o.candidate_pool = CandidatePool::Sampled(k);
            }
            run_dyhpo(benchmark, &o)
        }
        Method::RandomSearch => run_random_search(benchmark, budget_cap, seed),
        Method::SuccessiveHalving => {
            run_successive_halving(benchmark, budget_cap, seed, options.eta)
        }
        Method::Hyperband => run_hyperband(benchmark, budget_cap, seed, options.eta),
        Method::Asha => run_asha(benchmark, budget_cap, seed, options.eta),
    }
}

pub fn trace_file_name(method: Method, seed: u64) -> String {
    format!("{method}_seed{seed}.jsonl")
}

/// Parses `0..10`, `0..=9`, `3` and comma-separated mixes of them.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| format!("bad seed `{t}` in `{s}`"))
        };
        if let Some((a, b)) = part.split_once("..=") {
            out.extend(num(a)?..=num(b)?);
        } else if let Some((a, b)) = part.split_once("..") {
            out.extend(num(a)?..num(b)?);
        } else {
            out.push(num(part)?);
        }
    }
    if out.is_empty() {
        return Err(format!("no seeds in `{s}`"));
    }
    Ok(out)
}

/// Runs every seed of `spec` on `jobs` threads and writes the traces.
/// Seeds share only the immutable benchmark. Returns the written paths in
/// seed order; the first failure (in seed order) is returned as the error
/// after all runs finish.
pub fn execute(spec: &RunSpec, benchmark: &Benchmark, jobs: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&spec.output_dir).map_err(io_err(&spec.output_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<PathBuf>> = pool.install(|| {
        spec.seeds
            .par_iter()
            .map(|&seed| run_and_write(spec, benchmark, seed))
            .collect()
    });
    results.into_iter().collect()
}

fn run_and_write(spec: &RunSpec, benchmark: &Benchmark, seed: u64) -> Result<PathBuf> {
    log::info!("{} seed {seed}: start", spec.method);
    let trace = run_method(benchmark, spec.method, seed, spec.budget_cap, &spec.options)?;
    for e in &trace.events {
        log::warn!(
            "{} seed {seed} step {}: {}",
            spec.method,
            e.step_index,
            e.message
        );
    }
    let path = spec.output_dir.join(trace_file_name(spec.method, seed));
    write_trace(&trace, &path)?;
    log::info!(
        "{} seed {seed}: {} steps -> {}",
        spec.method,
        trace.steps.len(),
        path.display()
    );
    Ok(path)
}

/// Reads the benchmark named in `spec` from disk.
pub fn load_spec_benchmark(spec: &RunSpec) -> Result<Benchmark> {
    crate::bench_io::load_benchmark(&spec.benchmark_path)
}

/// Convenience for callers that keep results in memory.
pub fn run_seeds(
    benchmark: &Benchmark,
    method: Method,
    seeds: &[u64],
    budget_cap: usize,
    options: &MethodOptions,
) -> Result<Vec<RunTrace>> {
    seeds
        .par_iter()
        .map(|&s| run_method(benchmark, method, s, budget_cap, options).map_err(Error::from))
        .collect()
}

//! Tidy CSV reports computed from run traces.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use graybox_core::benchmark::Benchmark;
use graybox_core::metrics::{
    average_rank, avg_selected_regret, precision_at_budget, promotion_fraction, regret_curve, Axis,
    LabeledCurve,
};
use graybox_core::trace::RunTrace;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Regret,
    Rank,
    Precision,
    AvgSelectedRegret,
    Promotion,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Regret,
        Metric::Rank,
        Metric::Precision,
        Metric::AvgSelectedRegret,
        Metric::Promotion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Regret => "regret",
            Metric::Rank => "rank",
            Metric::Precision => "precision",
            Metric::AvgSelectedRegret => "avg-selected-regret",
            Metric::Promotion => "promotion",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
                format!("unknown metric `{s}`, supported: {}", names.join(", "))
            })
    }
}

/// One CSV row. `seed` is empty for rows aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TidyRow {
    pub method: String,
    pub dataset: String,
    pub seed: Option<u64>,
    pub x: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub axis: Axis,
    /// Top fraction for the precision metric.
    pub top_fraction: f64,
    /// Grid spacing for rank reports, in units of the axis.
    pub rank_every: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            axis: Axis::Epochs,
            top_fraction: 0.01,
            rank_every: 10.0,
        }
    }
}

fn benchmark_for<'a>(
    benchmarks: &'a BTreeMap<String, Benchmark>,
    trace: &RunTrace,
) -> Result<&'a Benchmark> {
    benchmarks.get(&trace.benchmark_name).ok_or_else(|| {
        Error::Core(graybox_core::Error::TraceMismatch(format!(
            "no benchmark named `{}` was given for the {} seed {} trace",
            trace.benchmark_name, trace.method, trace.seed
        )))
    })
}

fn per_budget_rows(
    trace: &RunTrace,
    metric: Metric,
    points: Vec<(usize, f64)>,
) -> impl Iterator<Item = TidyRow> + '_ {
    points.into_iter().map(move |(b, v)| TidyRow {
        method: trace.method.clone(),
        dataset: trace.benchmark_name.clone(),
        seed: Some(trace.seed),
        x: b as f64,
        metric: metric.name().into(),
        value: v,
    })
}

/// Computes `metric` for every trace. Benchmarks are looked up by the
/// name recorded in each trace.
pub fn report(
    metric: Metric,
    traces: &[RunTrace],
    benchmarks: &BTreeMap<String, Benchmark>,
    opts: &ReportOptions,
) -> Result<Vec<TidyRow>> {
    let mut rows = Vec::new();
    if metric == Metric::Rank {
        return rank_rows(traces, benchmarks, opts);
    }
    for t in traces {
        let b = benchmark_for(benchmarks, t)?;
        match metric {
            Metric::Regret => {
                let curve = regret_curve(t, b, opts.axis)?;
                rows.extend(curve.points.iter().map(|&(x, v)| TidyRow {
                    method: t.method.clone(),
                    dataset: t.benchmark_name.clone(),
                    seed: Some(t.seed),
                    x,
                    metric: metric.name().into(),
                    value: v,
                }));
            }
            Metric::Precision => rows.extend(per_budget_rows(
                t,
                metric,
                precision_at_budget(t, b, opts.top_fraction)?,
            )),
            Metric::AvgSelectedRegret => {
                rows.extend(per_budget_rows(t, metric, avg_selected_regret(t, b)?))
            }
            Metric::Promotion => rows.extend(per_budget_rows(t, metric, promotion_fraction(t, b)?)),
            Metric::Rank => unreachable!("handled above"),
        }
    }
    Ok(rows)
}

/// Per-dataset ranks on a grid shared by all curves of that dataset, so
/// the ranks of `m` methods sum to `m (m + 1) / 2` at every grid point.
fn rank_rows(
    traces: &[RunTrace],
    benchmarks: &BTreeMap<String, Benchmark>,
    opts: &ReportOptions,
) -> Result<Vec<TidyRow>> {
    if opts.rank_every.is_nan() || opts.rank_every <= 0.0 {
        return Err(Error::Core(graybox_core::Error::InvalidArgument(
            "rank grid spacing must be positive".into(),
        )));
    }
    let mut by_dataset: BTreeMap<&str, Vec<LabeledCurve>> = BTreeMap::new();
    for t in traces {
        let b = benchmark_for(benchmarks, t)?;
        by_dataset
            .entry(&t.benchmark_name)
            .or_default()
            .push(LabeledCurve {
                method: t.method.clone(),
                dataset: t.benchmark_name.clone(),
                curve: regret_curve(t, b, opts.axis)?,
            });
    }
    let mut rows = Vec::new();
    for (dataset, curves) in by_dataset {
        // the grid starts once every curve has a value and stops at the shortest
        let start = curves
            .iter()
            .filter_map(|c| c.curve.points.first().map(|p| p.0))
            .fold(0.0, f64::max);
        let end = curves
            .iter()
            .filter_map(|c| c.curve.points.last().map(|p| p.0))
            .fold(f64::INFINITY, f64::min);
        let mut grid = Vec::new();
        let mut x = opts.rank_every;
        while x < end {
            if x >= start {
                grid.push(x);
            }
            x += opts.rank_every;
        }
        if end.is_finite() && end >= start {
            grid.push(end);
        }
        for x in grid {
            for (method, r) in average_rank(&curves, x)? {
                rows.push(TidyRow {
                    method,
                    dataset: dataset.to_string(),
                    seed: None,
                    x,
                    metric: Metric::Rank.name().into(),
                    value: r,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with the header `method,dataset,seed,x,metric,value`.
pub fn write_csv<W: Write>(rows: &[TidyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["method", "dataset", "seed", "x", "metric", "value"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

//! Evaluation quantities computed from run traces: regret curves, average
//! ranks, precision and regret of the selected configurations, and the
//! promotion fraction that measures rank crossings between budgets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::benchmark::{best_score, Benchmark};
use crate::error::{Error, Result};
use crate::trace::RunTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Epochs,
    Seconds,
}

/// `(x, regret)` after every step of a trace; regret never increases.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub points: Vec<(f64, f64)>,
}

impl RegretCurve {
    /// Regret of the last point at or before `x` (step interpolation).
    pub fn at(&self, x: f64) -> Option<f64> {
        let k = self.points.partition_point(|p| p.0 <= x);
        k.checked_sub(1).map(|k| self.points[k].1)
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.1)
    }
}

/// Best final-budget score minus the best score observed so far, after
/// every step. Scores above the best final score (possible on
/// non-monotone curves) count as zero regret.
pub fn regret_curve(trace: &RunTrace, benchmark: &Benchmark, axis: Axis) -> Result<RegretCurve> {
    trace.validate(benchmark)?;
    let best = best_score(benchmark);
    let mut found = f64::NEG_INFINITY;
    let points = trace
        .steps
        .iter()
        .map(|s| {
            found = found.max(s.score);
            let x = match axis {
                Axis::Epochs => s.cumulative_epochs as f64,
                Axis::Seconds => s.cumulative_seconds,
            };
            (x, (best - found).max(0.0))
        })
        .collect();
    Ok(RegretCurve { points })
}

/// Mean regret over several curves (e.g. datasets) at each grid point;
/// grid points where some curve has no value yet are skipped.
pub fn mean_regret(curves: &[&RegretCurve], grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter()
        .filter_map(|&x| {
            let vals: Option<Vec<f64>> = curves.iter().map(|c| c.at(x)).collect();
            let vals = vals?;
            if vals.is_empty() {
                return None;
            }
            Some((x, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

/// One regret curve tagged with the method and dataset it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCurve {
    pub method: String,
    pub dataset: String,
    pub curve: RegretCurve,
}

/// 1-based ranks of `values` (lower is better), ties sharing their mean rank.
pub fn mean_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut k = i;
        while k + 1 < idx.len() && values[idx[k + 1]] == values[idx[i]] {
            k += 1;
        }
        let r = (i + k) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=k] {
            out[t] = r;
        }
        i = k + 1;
    }
    out
}

/// Per-method rank by regret at `x`, averaged over datasets. Several curves
/// for one (method, dataset) pair (seeds) are averaged before ranking.
pub fn average_rank(curves: &[LabeledCurve], x: f64) -> Result<BTreeMap<String, f64>> {
    let methods: BTreeSet<&str> = curves.iter().map(|c| c.method.as_str()).collect();
    let datasets: BTreeSet<&str> = curves.iter().map(|c| c.dataset.as_str()).collect();
    let mut values: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for c in curves {
        if let Some(v) = c.curve.at(x) {
            let e = values
                .entry((c.method.as_str(), c.dataset.as_str()))
                .or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let missing: Vec<String> = datasets
        .iter()
        .flat_map(|d| methods.iter().map(move |m| (*m, *d)))
        .filter(|k| !values.contains_key(k))
        .map(|(m, d)| format!("({m}, {d})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPairs(missing.join(", ")));
    }
    let mut sums: BTreeMap<String, f64> = methods.iter().map(|m| (String::from(*m), 0.0)).collect();
    for d in &datasets {
        let row: Vec<f64> = methods
            .iter()
            .map(|m| {
                let (s, k) = values[&(*m, *d)];
                s / k as f64
            })
            .collect();
        for (m, r) in methods.iter().zip(mean_ranks(&row)) {
            *sums.get_mut(*m).expect("method present") += r;
        }
    }
    let n = datasets.len().max(1) as f64;
    Ok(sums.into_iter().map(|(m, s)| (m, s / n)).collect())
}

/// Configurations ordered by score at `budget`, best first, ties to the
/// lower index.
fn ranked_at(benchmark: &Benchmark, configs: &[usize], budget: usize) -> Vec<usize> {
    let curves = benchmark.curves();
    let mut out = configs.to_vec();
    out.sort_by(|&a, &b| {
        curves[b][budget - 1]
            .total_cmp(&curves[a][budget - 1])
            .then(a.cmp(&b))
    });
    out
}

/// Size of the "top" group among `n` configurations.
fn top_size(n: usize, fraction: f64) -> usize {
    (libm::ceil(fraction * n as f64) as usize).clamp(1, n.max(1))
}

fn reached(trace: &RunTrace, benchmark: &Benchmark) -> Result<BTreeMap<usize, usize>> {
    trace.validate(benchmark)?;
    Ok(trace.budgets_reached())
}

/// Share of the configurations trained for at least `i` epochs that belong
/// to the top `top_fraction` of the table by final score, for every `i`
/// with a non-empty denominator.
pub fn precision_at_budget(
    trace: &RunTrace,
    benchmark: &Benchmark,
    top_fraction: f64,
) -> Result<Vec<(usize, f64)>> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "top_fraction must lie in (0, 1], got {top_fraction}"
        )));
    }
    let reached = reached(trace, benchmark)?;
    let all: Vec<usize> = (0..benchmark.n_configs()).collect();
    let k = top_size(all.len(), top_fraction);
    let top: BTreeSet<usize> = ranked_at(benchmark, &all, benchmark.max_budget())[..k]
        .iter()
        .copied()
        .collect();
    Ok((1..=benchmark.max_budget())
        .filter_map(|i| {
            let sel: Vec<usize> = reached
                .iter()
                .filter(|(_, &b)| b >= i)
                .map(|(&c, _)| c)
                .collect();
            if sel.is_empty() {
                return None;
            }
            let hits = sel.iter().filter(|c| top.contains(c)).count();
            Some((i, hits as f64 / sel.len() as f64))
        })
        .collect())
}

/// Mean final-budget regret of the configurations trained for at least `i`
/// epochs, for every `i` with at least one such configuration.
pub fn avg_selected_regret(trace: &RunTrace, benchmark: &Benchmark) -> Result<Vec<(usize, f64)>> {
    let reached = reached(trace, benchmark)?;
    let best = best_score(benchmark);
    Ok((1..=benchmark.max_budget())
        .filter_map(|i| {
            let regrets: Vec<f64> = reached
                .iter()
                .filter(|(_, &b)| b >= i)
                .map(|(&c, _)| best - benchmark.final_score(c))
                .collect();
            if regrets.is_empty() {
                return None;
            }
            Some((i, regrets.iter().sum::<f64>() / regrets.len() as f64))
        })
        .collect())
}

/// Promotion fraction over populations `pop(b)` = configurations run to at
/// least `b`. At budget `b` (with `|pop(b)| >= 3`) it is the share of the
/// top third of `pop(b)` that sat in the bottom two thirds of `pop(b')`
/// for some smaller `b'`.
fn promotion_over(benchmark: &Benchmark, reached: &BTreeMap<usize, usize>) -> Vec<(usize, f64)> {
    let pop = |b: usize| -> Vec<usize> {
        reached
            .iter()
            .filter(|(_, &r)| r >= b)
            .map(|(&c, _)| c)
            .collect()
    };
    let top_third = |b: usize| -> BTreeSet<usize> {
        let p = pop(b);
        let k = p.len().div_ceil(3);
        ranked_at(benchmark, &p, b)[..k].iter().copied().collect()
    };
    let tops: Vec<BTreeSet<usize>> = (0..=benchmark.max_budget())
        .map(|b| {
            if b == 0 {
                BTreeSet::new()
            } else {
                top_third(b)
            }
        })
        .collect();
    (2..=benchmark.max_budget())
        .filter_map(|b| {
            if pop(b).len() < 3 {
                return None;
            }
            let top = &tops[b];
            let crossed = top
                .iter()
                .filter(|&&c| (1..b).any(|e| !tops[e].contains(&c)))
                .count();
            Some((b, crossed as f64 / top.len() as f64))
        })
        .collect()
}

/// Promotion fraction among the configurations a method actually ran.
pub fn promotion_fraction(trace: &RunTrace, benchmark: &Benchmark) -> Result<Vec<(usize, f64)>> {
    Ok(promotion_over(benchmark, &reached(trace, benchmark)?))
}

/// Promotion fraction of the whole table, every configuration at every budget.
pub fn promotion_fraction_table(benchmark: &Benchmark) -> Vec<(usize, f64)> {
    let all = (0..benchmark.n_configs())
        .map(|c| (c, benchmark.max_budget()))
        .collect();
    promotion_over(benchmark, &all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{synth_benchmark, ParamSpec, ParamValue, SearchSpace, SynthOptions};
    use crate::trace::Session;
    use alloc::string::ToString;
    use alloc::vec;

    fn table(curves: Vec<Vec<f64>>) -> Benchmark {
        let space = SearchSpace::new(vec![ParamSpec::numeric("x", 0.0, 1.0, false)]).unwrap();
        let n = curves.len();
        let b = curves[0].len();
        let configs = (0..n)
            .map(|i| vec![ParamValue::Numeric(i as f64 / n as f64)])
            .collect();
        Benchmark::new("fixture", space, b, configs, curves, None).unwrap()
    }

    /// Trains each `(config, budget)` in order.
    fn trace_of(b: &Benchmark, plan: &[(usize, usize)]) -> RunTrace {
        let mut s = Session::new(b, usize::MAX, "m", 0);
        for &(c, j) in plan {
            s.train_to(c, j).unwrap();
        }
        s.finish()
    }

    // six configs, two budgets; config 4 is bottom at budget 1 and second at 2
    fn crossing_fixture() -> Benchmark {
        table(vec![
            vec![0.90, 0.95],
            vec![0.80, 0.82],
            vec![0.70, 0.72],
            vec![0.60, 0.62],
            vec![0.10, 0.90],
            vec![0.50, 0.52],
        ])
    }

    #[test]
    fn regret_arithmetic() {
        let b = table(vec![vec![0.5, 0.5], vec![0.7, 0.7], vec![0.9, 0.9]]);
        let t = trace_of(&b, &[(0, 1), (1, 1)]);
        let c = regret_curve(&t, &b, Axis::Epochs).unwrap();
        let want = [(1.0, 0.4), (2.0, 0.2)];
        for (p, w) in c.points.iter().zip(want) {
            assert_eq!(p.0, w.0);
            assert!((p.1 - w.1).abs() < 1e-12);
        }
        let t = trace_of(&b, &[(0, 1), (2, 2)]);
        assert_eq!(
            regret_curve(&t, &b, Axis::Epochs).unwrap().last(),
            Some(0.0)
        );
        let secs = regret_curve(&t, &b, Axis::Seconds).unwrap();
        assert_eq!(
            secs.points.iter().map(|p| p.0).collect::<Vec<_>>(),
            vec![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn regret_is_clamped_and_nonincreasing() {
        // config 0 peaks above the best final score
        let b = table(vec![vec![0.95, 0.6], vec![0.5, 0.8]]);
        let t = trace_of(&b, &[(1, 2), (0, 1)]);
        let c = regret_curve(&t, &b, Axis::Epochs).unwrap();
        assert_eq!(c.last(), Some(0.0));
        assert!(c.points.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn regret_rejects_other_benchmark() {
        let b = crossing_fixture();
        let t = trace_of(&b, &[(0, 1)]);
        let other = table(vec![vec![0.1], vec![0.2]]);
        assert!(regret_curve(&t, &other, Axis::Epochs).is_err());
    }

    #[test]
    fn step_interpolation_and_mean() {
        let a = RegretCurve {
            points: vec![(1.0, 0.5), (3.0, 0.2)],
        };
        let b = RegretCurve {
            points: vec![(2.0, 0.4), (4.0, 0.0)],
        };
        assert_eq!(a.at(0.5), None);
        assert_eq!(a.at(2.9), Some(0.5));
        assert_eq!(a.at(3.0), Some(0.2));
        let m = mean_regret(&[&a, &b], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            m.iter().map(|p| p.0).collect::<Vec<_>>(),
            vec![2.0, 3.0, 4.0]
        );
        assert!((m[0].1 - 0.45).abs() < 1e-12);
        assert!((m[1].1 - 0.3).abs() < 1e-12);
        assert!((m[2].1 - 0.1).abs() < 1e-12);
    }

    fn labeled(method: &str, dataset: &str, regret: f64) -> LabeledCurve {
        LabeledCurve {
            method: method.to_string(),
            dataset: dataset.to_string(),
            curve: RegretCurve {
                points: vec![(10.0, regret)],
            },
        }
    }

    #[test]
    fn ranks_strict_and_tied() {
        let curves = vec![
            labeled("a", "d1", 0.1),
            labeled("b", "d1", 0.2),
            labeled("a", "d2", 0.0),
            labeled("b", "d2", 0.3),
        ];
        let r = average_rank(&curves, 10.0).unwrap();
        assert_eq!(r["a"], 1.0);
        assert_eq!(r["b"], 2.0);
        let tied = vec![labeled("a", "d", 0.2), labeled("b", "d", 0.2)];
        let r = average_rank(&tied, 10.0).unwrap();
        assert_eq!((r["a"], r["b"]), (1.5, 1.5));
    }

    #[test]
    fn ranks_on_three_by_three_table() {
        // rows are datasets, columns methods a, b, c
        let regrets = [[0.3, 0.1, 0.2], [0.0, 0.5, 0.5], [0.4, 0.2, 0.1]];
        let mut curves = Vec::new();
        for (d, row) in regrets.iter().enumerate() {
            for (m, &v) in ["a", "b", "c"].iter().zip(row) {
                curves.push(labeled(m, &format!("d{d}"), v));
            }
        }
        let r = average_rank(&curves, 10.0).unwrap();
        // hand ranks: a = 3, 1, 3; b = 1, 2.5, 2; c = 2, 2.5, 1
        assert!((r["a"] - 7.0 / 3.0).abs() < 1e-12);
        assert!((r["b"] - 5.5 / 3.0).abs() < 1e-12);
        assert!((r["c"] - 5.5 / 3.0).abs() < 1e-12);
        assert!((r.values().sum::<f64>() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn ranks_report_missing_pairs() {
        let curves = vec![
            labeled("a", "d1", 0.1),
            labeled("b", "d1", 0.2),
            labeled("a", "d2", 0.0),
        ];
        match average_rank(&curves, 10.0) {
            Err(Error::MissingPairs(s)) => assert_eq!(s, "(b, d2)"),
            other => panic!("{other:?}"),
        }
        // present but with no value yet at x
        let late = vec![labeled("a", "d", 0.1), labeled("b", "d", 0.2)];
        assert!(average_rank(&late, 5.0).is_err());
    }

    #[test]
    fn precision_on_fixture() {
        let b = crossing_fixture();
        // only the best final config (0)
        let t = trace_of(&b, &[(0, 2)]);
        assert_eq!(
            precision_at_budget(&t, &b, 0.01).unwrap(),
            vec![(1, 1.0), (2, 1.0)]
        );
        // four configs to the end, one of them top
        let t = trace_of(&b, &[(1, 2), (0, 2), (2, 2), (3, 2)]);
        assert_eq!(
            precision_at_budget(&t, &b, 0.01).unwrap(),
            vec![(1, 0.25), (2, 0.25)]
        );
        // top third = {0, 4}; configs 0,1,2,4 at i=1 and 4,1 at i=2
        let t = trace_of(&b, &[(0, 1), (1, 2), (2, 1), (4, 2)]);
        assert_eq!(
            precision_at_budget(&t, &b, 1.0 / 3.0).unwrap(),
            vec![(1, 0.5), (2, 0.5)]
        );
        assert!(precision_at_budget(&t, &b, 0.0).is_err());
    }

    #[test]
    fn avg_selected_regret_on_fixture() {
        let b = crossing_fixture();
        let t = trace_of(&b, &[(0, 2)]);
        assert_eq!(
            avg_selected_regret(&t, &b).unwrap(),
            vec![(1, 0.0), (2, 0.0)]
        );
        // finals 0.95 and 0.82 at i = 1; only 0.95 at i = 2
        let t = trace_of(&b, &[(0, 2), (1, 1)]);
        let r = avg_selected_regret(&t, &b).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0].1 - 0.065).abs() < 1e-12);
        assert_eq!(r[1], (2, 0.0));
        let two = table(vec![vec![0.9], vec![0.7]]);
        let t = trace_of(&two, &[(0, 1), (1, 1)]);
        assert!((avg_selected_regret(&t, &two).unwrap()[0].1 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn promotion_on_fixture() {
        let b = crossing_fixture();
        // top third at budget 2 is {0, 4}; 4 was last at budget 1
        assert_eq!(promotion_fraction_table(&b), vec![(2, 0.5)]);
        let t = trace_of(&b, &[(0, 2), (1, 2), (2, 2), (3, 2), (4, 2), (5, 2)]);
        assert_eq!(promotion_fraction(&t, &b).unwrap(), vec![(2, 0.5)]);
        // the method never ran the crosser: no promotion among what it saw
        let t = trace_of(&b, &[(0, 2), (1, 2), (2, 2), (3, 2), (5, 2), (4, 1)]);
        assert_eq!(promotion_fraction(&t, &b).unwrap(), vec![(2, 0.0)]);
        // fewer than three configs at budget 2: point omitted
        let t = trace_of(&b, &[(0, 2), (4, 2), (1, 1)]);
        assert!(promotion_fraction(&t, &b).unwrap().is_empty());
    }

    #[test]
    fn promotion_on_synthetic_tables() {
        let stable = synth_benchmark(&SynthOptions {
            n_configs: 90,
            max_budget: 10,
            crossing_fraction: 0.0,
            noise_sd: 0.0,
            seed: 4,
        })
        .unwrap();
        assert!(promotion_fraction_table(&stable).iter().all(|p| p.1 == 0.0));
        let crossing = synth_benchmark(&SynthOptions {
            n_configs: 90,
            max_budget: 10,
            crossing_fraction: 0.5,
            noise_sd: 0.0,
            seed: 4,
        })
        .unwrap();
        let p = promotion_fraction_table(&crossing);
        assert!(p.iter().all(|q| (0.0..=1.0).contains(&q.1)));
        assert!(p.last().unwrap().1 > 0.0);
    }

    #[test]
    fn mean_ranks_average_ties() {
        assert_eq!(mean_ranks(&[0.3, 0.1, 0.3, 0.0]), vec![3.5, 2.0, 3.5, 1.0]);
    }
}

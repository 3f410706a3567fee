//! Expected improvement and its per-budget variant.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::surrogate::{History, Posterior, Predictor, Query, SurrogateState};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this predictive deviation EI is the deterministic hinge.
pub const MIN_SD: f64 = 1e-12;

fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * libm::exp(-0.5 * z * z)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// `E[max(f - incumbent, 0)]` for `f ~ N(mean, variance)`, maximizing.
///
/// Negative variances (round-off) are treated as zero.
pub fn expected_improvement(mean: f64, variance: f64, incumbent: f64) -> f64 {
    let sd = libm::sqrt(variance.max(0.0));
    let gap = mean - incumbent;
    if sd < MIN_SD {
        return gap.max(0.0);
    }
    let z = gap / sd;
    (gap * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncumbentSource {
    AtBudget,
    GlobalFallback,
}

/// Best observed score `y_j^max` used as the EI threshold at budget `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incumbent {
    pub value: f64,
    pub source: IncumbentSource,
}

/// Largest score observed at exactly `budget`, or the largest score at any
/// budget when nothing has been observed there yet.
pub fn incumbent_for_budget(history: &History, budget: usize) -> Result<Incumbent> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let at = history
        .observations()
        .iter()
        .filter(|o| o.budget == budget)
        .map(|o| o.y)
        .fold(None, |m: Option<f64>, y| Some(m.map_or(y, |m| m.max(y))));
    Ok(match at {
        Some(value) => Incumbent {
            value,
            source: IncumbentSource::AtBudget,
        },
        None => Incumbent {
            value: history.ys().fold(f64::NEG_INFINITY, f64::max),
            source: IncumbentSource::GlobalFallback,
        },
    })
}

/// Multi-fidelity EI of every query, each against the incumbent of its own
/// budget.
pub fn mf_ei_batch<P: Predictor + ?Sized>(
    predictor: &P,
    history: &History,
    queries: &[Query<'_>],
) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    // per-budget maxima once, then the same rule as `incumbent_for_budget`
    let mut at = alloc::vec![f64::NEG_INFINITY; history.max_budget() + 1];
    for o in history.observations() {
        at[o.budget] = at[o.budget].max(o.y);
    }
    let global = at.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let preds = predictor.predict(queries)?;
    Ok(queries
        .iter()
        .zip(preds)
        .map(|(q, p)| {
            let inc = match at.get(q.budget) {
                Some(&v) if v > f64::NEG_INFINITY => v,
                _ => global,
            };
            expected_improvement(p.mean, p.variance, inc)
        })
        .collect())
}

/// Multi-fidelity EI of one candidate `(x, curve prefix, budget)`.
pub fn mf_ei(state: &SurrogateState, history: &History, candidate: Query<'_>) -> Result<f64> {
    if candidate.budget == 0 || candidate.budget > history.max_budget() {
        return Err(Error::InvalidArgument(alloc::format!(
            "budget {} outside 1..={}",
            candidate.budget,
            history.max_budget()
        )));
    }
    let posterior = Posterior::new(state, history)?;
    Ok(mf_ei_batch(&posterior, history, &[candidate])?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use crate::surrogate::PosteriorPrediction;
    use alloc::vec;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn monte_carlo(mean: f64, sd: f64, incumbent: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut r = stream_rng(seed, Stream::Fallback);
        let d = Normal::new(mean, sd).unwrap();
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = (d.sample(&mut r) - incumbent).max(0.0);
            s += v;
            s2 += v * v;
        }
        let m = s / n as f64;
        let var = s2 / n as f64 - m * m;
        (m, libm::sqrt(var / n as f64))
    }

    #[test]
    fn standard_normal_case() {
        assert!((expected_improvement(0.3, 1.0, 0.3) - 0.398_942_3).abs() < 1e-7);
    }

    #[test]
    fn deterministic_limit_is_hinge() {
        assert_eq!(expected_improvement(0.4, 0.0, 0.5), 0.0);
        assert_eq!(expected_improvement(0.7, 0.0, 0.5), 0.7 - 0.5);
        assert_eq!(expected_improvement(0.7, -1e-30, 0.5), 0.7 - 0.5);
    }

    #[test]
    fn matches_monte_carlo() {
        let (m, se) = monte_carlo(0.6, 0.1, 0.5, 1_000_000, 1);
        let ei = expected_improvement(0.6, 0.01, 0.5);
        assert!((ei - m).abs() < 3.0 * se, "ei {ei}, mc {m} +- {se}");
    }

    #[test]
    fn monotone_and_translation_invariant() {
        let mut r = stream_rng(2, Stream::Fallback);
        for _ in 0..500 {
            let mean = r.random_range(-2.0..2.0);
            let var = r.random_range(1e-4..2.0);
            let inc = r.random_range(-2.0..2.0);
            let c = r.random_range(-5.0..5.0);
            let ei = expected_improvement(mean, var, inc);
            assert!(ei >= 0.0);
            assert!(expected_improvement(mean + 0.05, var, inc) > ei);
            assert!((expected_improvement(mean + c, var, inc + c) - ei).abs() < 1e-12);
            if mean <= inc {
                assert!(expected_improvement(mean, var * 1.5, inc) > ei);
            }
        }
    }

    fn history(points: &[(usize, f64)], max_budget: usize) -> History {
        // points are (config, y) and budgets follow recording order
        let mut h = History::new(max_budget);
        for &(c, y) in points {
            h.record(c, vec![c as f64], y).unwrap();
        }
        h
    }

    #[test]
    fn incumbent_at_budget() {
        let h = history(&[(0, 0.2), (1, 0.3), (0, 0.4), (1, 0.7)], 4);
        let inc = incumbent_for_budget(&h, 2).unwrap();
        assert_eq!(inc.value, 0.7);
        assert_eq!(inc.source, IncumbentSource::AtBudget);
        assert_eq!(incumbent_for_budget(&h, 1).unwrap().value, 0.3);
    }

    #[test]
    fn incumbent_falls_back_to_global() {
        let h = history(&[(0, 0.6), (1, 0.1)], 4);
        let inc = incumbent_for_budget(&h, 3).unwrap();
        assert_eq!(inc.value, 0.6);
        assert_eq!(inc.source, IncumbentSource::GlobalFallback);
    }

    #[test]
    fn fallback_uses_higher_budgets_too() {
        let h = history(&[(0, 0.1), (0, 0.9), (1, 0.2)], 4);
        let inc = incumbent_for_budget(&h, 3).unwrap();
        assert_eq!(inc.value, 0.9);
        assert_eq!(incumbent_for_budget(&h, 1).unwrap().value, 0.2);
    }

    #[test]
    fn single_budget_incumbent_is_global_max() {
        let h = history(&[(0, 0.3), (1, 0.8), (2, 0.5)], 1);
        let inc = incumbent_for_budget(&h, 1).unwrap();
        assert_eq!(inc.value, 0.8);
        assert_eq!(inc.value, h.ys().fold(f64::MIN, f64::max));
    }

    #[test]
    fn empty_history_rejected() {
        assert_eq!(
            incumbent_for_budget(&History::new(3), 1),
            Err(Error::EmptyHistory)
        );
    }

    struct Fixed(Vec<PosteriorPrediction>);

    impl Predictor for Fixed {
        fn predict(&self, queries: &[Query<'_>]) -> Result<Vec<PosteriorPrediction>> {
            Ok(self.0[..queries.len()].to_vec())
        }
    }

    #[test]
    fn deterministic_candidate_below_incumbent_scores_zero() {
        let h = history(&[(0, 0.6)], 3);
        let stub = Fixed(vec![PosteriorPrediction {
            mean: 0.5,
            variance: 0.0,
        }]);
        let q = Query {
            x: &[1.0],
            curve: &[],
            budget: 1,
        };
        assert_eq!(mf_ei_batch(&stub, &h, &[q]).unwrap(), vec![0.0]);
    }

    #[test]
    fn three_candidate_ranking_matches_monte_carlo() {
        let h = history(&[(0, 0.5), (1, 0.4)], 3);
        let posts = [(0.45, 0.04), (0.55, 0.0025), (0.3, 0.16)];
        let stub = Fixed(
            posts
                .iter()
                .map(|&(mean, variance)| PosteriorPrediction { mean, variance })
                .collect(),
        );
        let xs = [[2.0], [3.0], [4.0]];
        let qs: Vec<Query<'_>> = xs
            .iter()
            .map(|x| Query {
                x,
                curve: &[],
                budget: 1,
            })
            .collect();
        let ei = mf_ei_batch(&stub, &h, &qs).unwrap();
        let mc: Vec<f64> = posts
            .iter()
            .enumerate()
            .map(|(i, &(m, v))| monte_carlo(m, libm::sqrt(v), 0.5, 200_000, 10 + i as u64).0)
            .collect();
        let order = |v: &[f64]| {
            let mut idx = vec![0, 1, 2];
            idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
            idx
        };
        assert_eq!(order(&ei), order(&mc));
    }

    #[test]
    fn single_budget_reduces_to_plain_ei() {
        let mut r = stream_rng(3, Stream::Fallback);
        let mut h = History::new(1);
        for c in 0..6 {
            h.record(c, vec![r.random(), r.random()], r.random_range(0.2..0.9))
                .unwrap();
        }
        let mut state = SurrogateState::init(2, true, &mut stream_rng(3, Stream::ExtractorInit));
        state.standardize_on(&h);
        let global = h.ys().fold(f64::MIN, f64::max);
        let post = Posterior::new(&state, &h).unwrap();
        let xs: Vec<[f64; 2]> = (0..200).map(|_| [r.random(), r.random()]).collect();
        let qs: Vec<Query<'_>> = xs
            .iter()
            .map(|x| Query {
                x,
                curve: &[],
                budget: 1,
            })
            .collect();
        let ei = mf_ei_batch(&post, &h, &qs).unwrap();
        let preds = post.predict(&qs).unwrap();
        for (e, p) in ei.iter().zip(&preds) {
            assert_eq!(*e, expected_improvement(p.mean, p.variance, global));
        }
        // Batch and single predictions differ only in summation order.
        assert!((mf_ei(&state, &h, qs[0]).unwrap() - ei[0]).abs() <= 1e-12);
    }
}

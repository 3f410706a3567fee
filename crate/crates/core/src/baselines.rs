//! Reference optimizers: random search, successive halving, Hyperband and
//! single-worker ASHA.
//!
//! All of them train configurations one epoch at a time through a
//! [`Session`], so their traces obey the same invariants as the DyHPO
//! trace and pausing a configuration costs nothing.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::benchmark::Benchmark;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::trace::{RunTrace, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rung {
    pub n_configs: usize,
    pub budget: usize,
}

/// One successive-halving bracket of a Hyperband iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketSchedule {
    pub bracket: usize,
    pub eta: usize,
    pub rungs: Vec<Rung>,
}

/// Configurations actually evaluated at each rung of one executed bracket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketLog {
    pub bracket: usize,
    pub rungs: Vec<(usize, Vec<usize>)>,
}

/// Largest `s` with `eta^s <= r`.
fn floor_log(r: usize, eta: usize) -> usize {
    let mut s = 0;
    let mut p = eta;
    while p <= r {
        s += 1;
        p = p.saturating_mul(eta);
    }
    s
}

/// Hyperband brackets `s = s_max..=0` for max budget `r` and ratio `eta`.
///
/// Budgets are whole epochs: the first rung of bracket `s` trains for
/// `max(1, floor(r / eta^s))` epochs, and the last rung of every bracket
/// is set to `r` even when `floor(r / eta^s) * eta^s` falls short of it.
pub fn hyperband_schedule(r: usize, eta: usize) -> Result<Vec<BracketSchedule>> {
    if r == 0 {
        return Err(Error::InvalidArgument("max budget must be >= 1".into()));
    }
    if eta < 2 {
        return Err(Error::InvalidArgument(format!(
            "eta must be >= 2, got {eta}"
        )));
    }
    let s_max = floor_log(r, eta);
    let pow = |k: usize| eta.pow(k as u32);
    Ok((0..=s_max)
        .rev()
        .map(|s| {
            let n = ((s_max + 1) * pow(s)).div_ceil(s + 1);
            let base = (r / pow(s)).max(1);
            let rungs = (0..=s)
                .map(|k| Rung {
                    n_configs: n / pow(k),
                    budget: if k == s { r } else { (base * pow(k)).min(r) },
                })
                .collect();
            BracketSchedule {
                bracket: s,
                eta,
                rungs,
            }
        })
        .collect())
}

/// Fresh configurations in a seeded random order, each handed out once.
struct Pool {
    order: Vec<usize>,
    next: usize,
}

impl Pool {
    fn shuffled(n: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(seed, Stream::BaselineSampling));
        Self { order, next: 0 }
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let end = (self.next + k).min(self.order.len());
        let out = self.order[self.next..end].to_vec();
        self.next = end;
        out
    }
}

fn check_cap(benchmark: &Benchmark, cap: usize) -> Result<()> {
    if cap == 0 {
        return Err(Error::InvalidArgument("budget cap must be >= 1".into()));
    }
    if benchmark.n_configs() == 0 {
        return Err(Error::InvalidBenchmark("no configurations".into()));
    }
    Ok(())
}

/// Trains uniformly drawn unseen configurations to the max budget, one
/// after the other, until the cap is spent or the table is exhausted.
pub fn run_random_search(benchmark: &Benchmark, budget_cap: usize, seed: u64) -> Result<RunTrace> {
    check_cap(benchmark, budget_cap)?;
    let mut session = Session::new(benchmark, budget_cap, "rs", seed);
    let mut pool = Pool::shuffled(benchmark.n_configs(), seed);
    while !session.exhausted() {
        let Some(&c) = pool.take(1).first() else {
            break;
        };
        session.train_to(c, benchmark.max_budget())?;
    }
    Ok(session.finish())
}

/// Top `k` of `configs` by score, ties to the lower index.
fn top_k(mut scored: Vec<(usize, f64)>, k: usize) -> Vec<usize> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().take(k).map(|(c, _)| c).collect()
}

/// Executes one bracket on fresh configs from `pool`. Returns `None` when
/// the pool is empty.
fn run_bracket(
    session: &mut Session<'_>,
    schedule: &BracketSchedule,
    pool: &mut Pool,
) -> Result<Option<BracketLog>> {
    let mut alive = pool.take(schedule.rungs[0].n_configs);
    if alive.is_empty() {
        return Ok(None);
    }
    let mut log = BracketLog {
        bracket: schedule.bracket,
        rungs: Vec::new(),
    };
    for (k, rung) in schedule.rungs.iter().enumerate() {
        let mut scored = Vec::with_capacity(alive.len());
        for &c in &alive {
            match session.train_to(c, rung.budget)? {
                Some(y) => scored.push((c, y)),
                None => break,
            }
        }
        log.rungs
            .push((rung.budget, scored.iter().map(|&(c, _)| c).collect()));
        if session.exhausted() {
            break;
        }
        let Some(next) = schedule.rungs.get(k + 1) else {
            break;
        };
        alive = top_k(scored, next.n_configs.min(alive.len()));
    }
    Ok(Some(log))
}

fn run_brackets(
    benchmark: &Benchmark,
    budget_cap: usize,
    seed: u64,
    eta: usize,
    method: &str,
    brackets: Vec<BracketSchedule>,
) -> Result<(RunTrace, Vec<BracketLog>)> {
    check_cap(benchmark, budget_cap)?;
    let mut session = Session::new(benchmark, budget_cap, method, seed);
    let mut pool = Pool::shuffled(benchmark.n_configs(), seed);
    let mut logs = Vec::new();
    debug_assert!(brackets.iter().all(|b| b.eta == eta));
    'outer: while !session.exhausted() {
        for b in &brackets {
            match run_bracket(&mut session, b, &mut pool)? {
                Some(log) => logs.push(log),
                None => break 'outer,
            }
            if session.exhausted() {
                break 'outer;
            }
        }
    }
    Ok((session.finish(), logs))
}

/// Successive halving with the most aggressive Hyperband bracket, restarted
/// on fresh configurations until the cap is spent.
pub fn successive_halving_with_log(
    benchmark: &Benchmark,
    budget_cap: usize,
    seed: u64,
    eta: usize,
) -> Result<(RunTrace, Vec<BracketLog>)> {
    let first = hyperband_schedule(benchmark.max_budget(), eta)?.swap_remove(0);
    run_brackets(benchmark, budget_cap, seed, eta, "sh", alloc::vec![first])
}

pub fn run_successive_halving(
    benchmark: &Benchmark,
    budget_cap: usize,
    seed: u64,
    eta: usize,
) -> Result<RunTrace> {
    Ok(successive_halving_with_log(benchmark, budget_cap, seed, eta)?.0)
}

/// Hyperband cycling through brackets `s_max..=0` until the cap is spent.
pub fn hyperband_with_log(
    benchmark: &Benchmark,
    budget_cap: usize,
    seed: u64,
    eta: usize,
) -> Result<(RunTrace, Vec<BracketLog>)> {
    let brackets = hyperband_schedule(benchmark.max_budget(), eta)?;
    run_brackets(benchmark, budget_cap, seed, eta, "hyperband", brackets)
}

pub fn run_hyperband(
    benchmark: &Benchmark,
    budget_cap: usize,
    seed: u64,
    eta: usize,
) -> Result<RunTrace> {
    Ok(hyperband_with_log(benchmark, budget_cap, seed, eta)?.0)
}

/// ASHA rung budgets `1, eta, eta^2, ...` up to and including the max budget.
pub fn asha_rungs(max_budget: usize, eta: usize) -> Vec<usize> {
    let mut out = alloc::vec![1.min(max_budget)];
    while *out.last().expect("non-empty") < max_budget {
        let b = out
            .last()
            .expect("non-empty")
            .saturating_mul(eta)
            .min(max_budget);
        out.push(b);
    }
    out
}

/// Single-worker ASHA drawing fresh configurations in the given order.
///
/// Each job promotes the best not-yet-promoted member of the top
/// `floor(n / eta)` of the deepest rung that has one; otherwise it starts
/// the next fresh configuration at the first rung.
pub fn run_asha_with_order(
    benchmark: &Benchmark,
    budget_cap: usize,
    seed: u64,
    eta: usize,
    order: &[usize],
) -> Result<RunTrace> {
    check_cap(benchmark, budget_cap)?;
    if eta < 2 {
        return Err(Error::InvalidArgument(format!(
            "eta must be >= 2, got {eta}"
        )));
    }
    let budgets = asha_rungs(benchmark.max_budget(), eta);
    // per rung: (config, score) completed there, and whether it was promoted
    let mut rungs: Vec<Vec<(usize, f64, bool)>> = alloc::vec![Vec::new(); budgets.len()];
    let mut session = Session::new(benchmark, budget_cap, "asha", seed);
    let mut fresh = order.iter().copied();
    while !session.exhausted() {
        let promotion = (0..budgets.len() - 1).rev().find_map(|k| {
            let done = &rungs[k];
            let keep = done.len() / eta;
            let mut ranked: Vec<usize> = (0..done.len()).collect();
            ranked.sort_by(|&a, &b| {
                done[b]
                    .1
                    .total_cmp(&done[a].1)
                    .then(done[a].0.cmp(&done[b].0))
            });
            ranked
                .into_iter()
                .take(keep)
                .find(|&i| !done[i].2)
                .map(|i| (k, i))
        });
        let (config, rung) = match promotion {
            Some((k, i)) => {
                rungs[k][i].2 = true;
                (rungs[k][i].0, k + 1)
            }
            None => match fresh.next() {
                Some(c) => (c, 0),
                None => break,
            },
        };
        match session.train_to(config, budgets[rung])? {
            Some(y) => rungs[rung].push((config, y, false)),
            None => break,
        }
    }
    Ok(session.finish())
}

pub fn run_asha(
    benchmark: &Benchmark,
    budget_cap: usize,
    seed: u64,
    eta: usize,
) -> Result<RunTrace> {
    let pool = Pool::shuffled(benchmark.n_configs(), seed);
    run_asha_with_order(benchmark, budget_cap, seed, eta, &pool.order)
}

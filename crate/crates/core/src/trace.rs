//! Run traces shared by the optimizer and the baselines, and the epoch-level
//! session that produces them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::benchmark::{Benchmark, BudgetLedger};
use crate::error::{Error, Result};

/// One benchmark query: `config_index` trained up to `budget`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TraceStep {
    pub step_index: usize,
    pub config_index: usize,
    pub budget: usize,
    pub score: f64,
    pub incremental_epochs: usize,
    pub cumulative_epochs: usize,
    pub cumulative_seconds: f64,
}

/// Something noteworthy that happened before `step_index`, e.g. a surrogate
/// failure that forced a random choice.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TraceEvent {
    pub step_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunTrace {
    pub method: String,
    pub seed: u64,
    pub benchmark_name: String,
    pub steps: Vec<TraceStep>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub events: Vec<TraceEvent>,
}

impl RunTrace {
    pub fn new(method: impl Into<String>, seed: u64, benchmark_name: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            seed,
            benchmark_name: benchmark_name.into(),
            steps: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn cumulative_epochs(&self) -> usize {
        self.steps.last().map_or(0, |s| s.cumulative_epochs)
    }

    /// Configuration with the largest observed score (first one on ties).
    pub fn recommendation(&self) -> Option<(usize, f64)> {
        self.steps.iter().fold(None, |best, s| match best {
            Some((_, y)) if y >= s.score => best,
            _ => Some((s.config_index, s.score)),
        })
    }

    /// Highest budget reached by every configuration that appears.
    pub fn budgets_reached(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for s in &self.steps {
            let e = out.entry(s.config_index).or_insert(0);
            *e = (*e).max(s.budget);
        }
        out
    }

    /// Checks the structural invariants against `benchmark`: per-config
    /// budgets contiguous from 1, one budget unit per step, scores equal to
    /// the table, and epoch totals equal to the sum of budgets reached.
    pub fn validate(&self, benchmark: &Benchmark) -> Result<()> {
        if self.benchmark_name != benchmark.name() {
            return Err(Error::TraceMismatch(format!(
                "trace is for `{}`, benchmark is `{}`",
                self.benchmark_name,
                benchmark.name()
            )));
        }
        let mut reached: BTreeMap<usize, usize> = BTreeMap::new();
        let mut total = 0;
        for (k, s) in self.steps.iter().enumerate() {
            if s.step_index != k {
                return Err(Error::TraceMismatch(format!(
                    "step {k} has index {}",
                    s.step_index
                )));
            }
            let score = benchmark
                .score(s.config_index, s.budget)
                .map_err(|e| Error::TraceMismatch(format!("step {k}: {e}")))?;
            if score != s.score {
                return Err(Error::TraceMismatch(format!(
                    "step {k}: score differs from the table"
                )));
            }
            let prev = reached.entry(s.config_index).or_insert(0);
            if s.budget != *prev + 1 {
                return Err(Error::TraceMismatch(format!(
                    "step {k}: config {} jumps from budget {} to {}",
                    s.config_index, prev, s.budget
                )));
            }
            *prev = s.budget;
            if s.incremental_epochs != 1 {
                return Err(Error::TraceMismatch(format!(
                    "step {k}: charged {} epochs",
                    s.incremental_epochs
                )));
            }
            total += s.incremental_epochs;
            if s.cumulative_epochs != total {
                return Err(Error::TraceMismatch(format!(
                    "step {k}: cumulative epochs out of sync"
                )));
            }
        }
        if reached.values().sum::<usize>() != total {
            return Err(Error::TraceMismatch(
                "epochs differ from budgets reached".into(),
            ));
        }
        Ok(())
    }
}

/// Queries a benchmark one epoch at a time under an epoch cap and records
/// every query in a trace.
pub struct Session<'b> {
    benchmark: &'b Benchmark,
    ledger: BudgetLedger,
    cap: usize,
    trace: RunTrace,
}

impl<'b> Session<'b> {
    pub fn new(benchmark: &'b Benchmark, cap: usize, method: &str, seed: u64) -> Self {
        Self {
            benchmark,
            ledger: BudgetLedger::new(benchmark),
            cap,
            trace: RunTrace::new(method, seed, benchmark.name()),
        }
    }

    pub fn benchmark(&self) -> &'b Benchmark {
        self.benchmark
    }

    pub fn exhausted(&self) -> bool {
        self.ledger.cumulative_epochs() >= self.cap
    }

    pub fn highest(&self, config: usize) -> usize {
        self.ledger.highest(config)
    }

    pub fn steps(&self) -> usize {
        self.trace.steps.len()
    }

    pub fn note(&mut self, message: String) {
        let step_index = self.trace.steps.len();
        self.trace.events.push(TraceEvent {
            step_index,
            message,
        });
    }

    /// Trains `config` for one more epoch. Returns `None` once the cap is
    /// reached.
    pub fn advance(&mut self, config: usize) -> Result<Option<TraceStep>> {
        if self.exhausted() {
            return Ok(None);
        }
        let budget = self.ledger.highest(config) + 1;
        if budget > self.benchmark.max_budget() {
            return Err(Error::NotACandidate {
                config,
                max_budget: self.benchmark.max_budget(),
            });
        }
        let out = self.ledger.query(self.benchmark, config, budget)?;
        let step = TraceStep {
            step_index: self.trace.steps.len(),
            config_index: config,
            budget,
            score: out.score,
            incremental_epochs: out.epochs,
            cumulative_epochs: self.ledger.cumulative_epochs(),
            cumulative_seconds: self.ledger.cumulative_seconds(),
        };
        self.trace.steps.push(step);
        Ok(Some(step))
    }

    /// Trains `config` epoch by epoch up to `budget`. Returns the score at
    /// `budget`, or `None` if the cap interrupted training.
    pub fn train_to(&mut self, config: usize, budget: usize) -> Result<Option<f64>> {
        let mut last = None;
        while self.ledger.highest(config) < budget {
            match self.advance(config)? {
                Some(s) => last = Some(s.score),
                None => return Ok(None),
            }
        }
        match last {
            Some(y) => Ok(Some(y)),
            None => self.benchmark.score(config, budget).map(Some),
        }
    }

    pub fn finish(self) -> RunTrace {
        self.trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{synth_benchmark, SynthOptions};

    fn bench() -> Benchmark {
        synth_benchmark(&SynthOptions {
            n_configs: 5,
            max_budget: 4,
            crossing_fraction: 0.0,
            noise_sd: 0.0,
            seed: 0,
        })
        .unwrap()
    }

    #[test]
    fn session_charges_one_epoch_per_step_and_stops_at_cap() {
        let b = bench();
        let mut s = Session::new(&b, 6, "t", 0);
        assert_eq!(s.train_to(2, 4).unwrap(), Some(b.final_score(2)));
        assert_eq!(s.train_to(0, 4).unwrap(), None);
        assert!(s.exhausted());
        assert_eq!(s.advance(1).unwrap(), None);
        let t = s.finish();
        assert_eq!(t.steps.len(), 6);
        assert_eq!(t.cumulative_epochs(), 6);
        t.validate(&b).unwrap();
        assert_eq!(
            t.budgets_reached().into_iter().collect::<Vec<_>>(),
            alloc::vec![(0, 2), (2, 4)]
        );
    }

    #[test]
    fn advancing_past_max_budget_is_rejected() {
        let b = bench();
        let mut s = Session::new(&b, 100, "t", 0);
        s.train_to(1, 4).unwrap();
        assert!(matches!(
            s.advance(1),
            Err(Error::NotACandidate { config: 1, .. })
        ));
    }

    #[test]
    fn validate_catches_tampering() {
        let b = bench();
        let mut s = Session::new(&b, 100, "t", 0);
        s.train_to(0, 3).unwrap();
        let t = s.finish();
        let mut skip = t.clone();
        skip.steps.remove(1);
        for (k, st) in skip.steps.iter_mut().enumerate() {
            st.step_index = k;
        }
        assert!(skip.validate(&b).is_err());
        let mut wrong = t.clone();
        wrong.steps[0].score += 0.1;
        assert!(wrong.validate(&b).is_err());
        let mut other = t;
        other.benchmark_name = "x".into();
        assert!(other.validate(&b).is_err());
    }

    #[test]
    fn recommendation_is_best_observed() {
        let mut t = RunTrace::new("m", 0, "b");
        for (k, (c, y)) in [(0, 0.3), (1, 0.6), (0, 0.6), (2, 0.5)]
            .into_iter()
            .enumerate()
        {
            t.steps.push(TraceStep {
                step_index: k,
                config_index: c,
                budget: 1,
                score: y,
                incremental_epochs: 1,
                cumulative_epochs: k + 1,
                cumulative_seconds: 0.0,
            });
        }
        assert_eq!(t.recommendation(), Some((1, 0.6)));
    }
}

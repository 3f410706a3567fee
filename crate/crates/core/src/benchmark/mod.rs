//! Tabular learning-curve benchmarks and incremental budget accounting.
//!
//! A [`Benchmark`] is an immutable table: one validation curve of length
//! `max_budget` per configuration. Optimizers never read the table
//! directly; they go through a [`BudgetLedger`], which charges only the
//! epochs a configuration has not been trained for yet.

mod synth;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{synth_benchmark, SynthOptions};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum ParamKind {
    Numeric {
        low: f64,
        high: f64,
        log_scale: bool,
    },
    Categorical {
        choices: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn numeric(name: &str, low: f64, high: f64, log_scale: bool) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Numeric {
                low,
                high,
                log_scale,
            },
        }
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Categorical {
                choices: choices.iter().map(|c| c.to_string()).collect(),
            },
        }
    }
}

/// Ordered list of hyperparameters. Construction validates bounds,
/// choices and name uniqueness.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize))]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate parameter name `{}`",
                    p.name
                )));
            }
            match &p.kind {
                ParamKind::Numeric {
                    low,
                    high,
                    log_scale,
                } => {
                    if !(low.is_finite() && high.is_finite() && low < high) {
                        return Err(Error::InvalidSpace(format!(
                            "`{}`: bounds must satisfy low < high (got [{low}, {high}])",
                            p.name
                        )));
                    }
                    if *log_scale && *low <= 0.0 {
                        return Err(Error::InvalidSpace(format!(
                            "`{}`: log-scaled parameter needs low > 0",
                            p.name
                        )));
                    }
                }
                ParamKind::Categorical { choices } => {
                    if choices.is_empty() {
                        return Err(Error::InvalidSpace(format!("`{}`: no choices", p.name)));
                    }
                    for (k, c) in choices.iter().enumerate() {
                        if choices[..k].contains(c) {
                            return Err(Error::InvalidSpace(format!(
                                "`{}`: duplicate choice `{c}`",
                                p.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Checks that `config` has one admissible value per parameter, in order.
    pub fn check(&self, config: &[ParamValue]) -> core::result::Result<(), String> {
        if config.len() != self.params.len() {
            return Err(format!(
                "expected {} parameter values, got {}",
                self.params.len(),
                config.len()
            ));
        }
        for (p, v) in self.params.iter().zip(config) {
            match (&p.kind, v) {
                (ParamKind::Numeric { low, high, .. }, ParamValue::Numeric(x)) => {
                    if !x.is_finite() || x < low || x > high {
                        return Err(format!("`{}` = {x} outside [{low}, {high}]", p.name));
                    }
                }
                (ParamKind::Categorical { choices }, ParamValue::Categorical(c)) => {
                    if !choices.contains(c) {
                        return Err(format!("`{}` = `{c}` is not a declared choice", p.name));
                    }
                }
                _ => return Err(format!("`{}` has a value of the wrong kind", p.name)),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum ParamValue {
    Numeric(f64),
    Categorical(String),
}

/// One value per search-space parameter, in declaration order.
pub type RawConfig = Vec<ParamValue>;

/// Precomputed learning curves over a fixed set of configurations.
///
/// Scores are accuracies in `[0, 1]` and are maximized.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    name: String,
    space: SearchSpace,
    max_budget: usize,
    configs: Vec<RawConfig>,
    curves: Vec<Vec<f64>>,
    epoch_costs: Vec<Vec<f64>>,
}

impl Benchmark {
    /// Validates and assembles a benchmark. `epoch_costs` defaults to one
    /// second per epoch for every configuration.
    pub fn new(
        name: impl Into<String>,
        space: SearchSpace,
        max_budget: usize,
        configs: Vec<RawConfig>,
        curves: Vec<Vec<f64>>,
        epoch_costs: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if max_budget == 0 {
            return Err(Error::InvalidBenchmark(
                "max_budget must be positive".into(),
            ));
        }
        if configs.is_empty() {
            return Err(Error::InvalidBenchmark("no configurations".into()));
        }
        if configs.len() != curves.len() {
            return Err(Error::InvalidBenchmark(format!(
                "{} configs but {} curves",
                configs.len(),
                curves.len()
            )));
        }
        let epoch_costs = match epoch_costs {
            Some(c) => c,
            None => vec![vec![1.0; max_budget]; configs.len()],
        };
        if epoch_costs.len() != configs.len() {
            return Err(Error::InvalidBenchmark(format!(
                "{} configs but {} epoch-cost rows",
                configs.len(),
                epoch_costs.len()
            )));
        }
        for (index, ((config, curve), costs)) in
            configs.iter().zip(&curves).zip(&epoch_costs).enumerate()
        {
            let bad = |reason: String| Error::InvalidRecord { index, reason };
            space.check(config).map_err(bad)?;
            if curve.len() != max_budget {
                return Err(bad(format!(
                    "curve has length {}, expected max_budget {max_budget}",
                    curve.len()
                )));
            }
            if let Some((j, y)) = curve
                .iter()
                .enumerate()
                .find(|(_, y)| !(y.is_finite() && (0.0..=1.0).contains(*y)))
            {
                return Err(bad(format!("score {y} at budget {} outside [0, 1]", j + 1)));
            }
            if costs.len() != max_budget {
                return Err(bad(format!(
                    "epoch costs have length {}, expected {max_budget}",
                    costs.len()
                )));
            }
            if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(bad("epoch costs must be finite and non-negative".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            space,
            max_budget,
            configs,
            curves,
            epoch_costs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn max_budget(&self) -> usize {
        self.max_budget
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[RawConfig] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> &RawConfig {
        &self.configs[index]
    }

    pub fn curve(&self, index: usize) -> &[f64] {
        &self.curves[index]
    }

    pub fn curves(&self) -> &[Vec<f64>] {
        &self.curves
    }

    pub fn epoch_costs(&self, index: usize) -> &[f64] {
        &self.epoch_costs[index]
    }

    /// Score of `config` after `budget` epochs (1-based).
    pub fn score(&self, config: usize, budget: usize) -> Result<f64> {
        self.check_query(config, budget)?;
        Ok(self.curves[config][budget - 1])
    }

    /// Score at the maximum budget, the quantity regret is measured against.
    pub fn final_score(&self, config: usize) -> f64 {
        self.curves[config][self.max_budget - 1]
    }

    fn check_query(&self, config: usize, budget: usize) -> Result<()> {
        if config >= self.configs.len() {
            return Err(Error::InvalidArgument(format!(
                "config index {config} out of range (n = {})",
                self.configs.len()
            )));
        }
        if budget == 0 || budget > self.max_budget {
            return Err(Error::InvalidArgument(format!(
                "budget {budget} outside 1..={}",
                self.max_budget
            )));
        }
        Ok(())
    }
}

/// Best final-budget score over all configurations.
pub fn best_score(benchmark: &Benchmark) -> f64 {
    (0..benchmark.n_configs())
        .map(|i| benchmark.final_score(i))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOutcome {
    pub score: f64,
    pub epochs: usize,
    pub seconds: f64,
}

/// Per-run record of how far each configuration has been trained.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    highest: Vec<usize>,
    epochs: usize,
    seconds: f64,
}

impl BudgetLedger {
    pub fn new(benchmark: &Benchmark) -> Self {
        Self {
            highest: vec![0; benchmark.n_configs()],
            epochs: 0,
            seconds: 0.0,
        }
    }

    /// Highest budget queried so far for `config` (0 if never queried).
    pub fn highest(&self, config: usize) -> usize {
        self.highest[config]
    }

    pub fn cumulative_epochs(&self) -> usize {
        self.epochs
    }

    pub fn cumulative_seconds(&self) -> f64 {
        self.seconds
    }

    /// Looks up `f(config, budget)` and charges only the epochs beyond the
    /// highest budget this config was already trained to.
    pub fn query(
        &mut self,
        benchmark: &Benchmark,
        config: usize,
        budget: usize,
    ) -> Result<QueryOutcome> {
        let score = benchmark.score(config, budget)?;
        let prev = self.highest[config];
        let (epochs, seconds) = if budget > prev {
            let secs: f64 = benchmark.epoch_costs(config)[prev..budget].iter().sum();
            (budget - prev, secs)
        } else {
            (0, 0.0)
        };
        self.highest[config] = prev.max(budget);
        self.epochs += epochs;
        self.seconds += seconds;
        Ok(QueryOutcome {
            score,
            epochs,
            seconds,
        })
    }
}

/// Free-function form of [`BudgetLedger::query`].
pub fn query(
    benchmark: &Benchmark,
    ledger: &mut BudgetLedger,
    config: usize,
    budget: usize,
) -> Result<QueryOutcome> {
    ledger.query(benchmark, config, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_space() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::numeric("lr", 1e-4, 1e-1, true),
            ParamSpec::categorical("act", &["relu", "tanh"]),
        ])
        .unwrap()
    }

    fn cfg(lr: f64, act: &str) -> RawConfig {
        vec![ParamValue::Numeric(lr), ParamValue::Categorical(act.into())]
    }

    fn toy() -> Benchmark {
        Benchmark::new(
            "toy",
            toy_space(),
            5,
            vec![cfg(1e-3, "relu"), cfg(1e-2, "tanh"), cfg(1e-1, "relu")],
            vec![
                vec![0.1, 0.2, 0.3, 0.5, 0.7],
                vec![0.3, 0.5, 0.7, 0.8, 0.9],
                vec![0.4, 0.5, 0.6, 0.7, 0.8],
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn valid_table_builds() {
        let b = toy();
        assert_eq!(b.n_configs(), 3);
        assert_eq!(b.max_budget(), 5);
        assert_eq!(b.epoch_costs(0), &[1.0; 5]);
    }

    #[test]
    fn short_curve_names_config() {
        let err = Benchmark::new(
            "bad",
            toy_space(),
            5,
            vec![cfg(1e-3, "relu"), cfg(1e-2, "tanh")],
            vec![vec![0.1; 5], vec![0.1; 4]],
            None,
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::InvalidRecord { index: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn rejects_out_of_range_scores_and_values() {
        let e = Benchmark::new(
            "b",
            toy_space(),
            2,
            vec![cfg(1e-3, "relu")],
            vec![vec![0.1, 1.2]],
            None,
        );
        assert!(matches!(e, Err(Error::InvalidRecord { index: 0, .. })));
        let e = Benchmark::new(
            "b",
            toy_space(),
            2,
            vec![cfg(0.5, "relu")],
            vec![vec![0.1, 0.2]],
            None,
        );
        assert!(matches!(e, Err(Error::InvalidRecord { index: 0, .. })));
        let e = Benchmark::new(
            "b",
            toy_space(),
            2,
            vec![cfg(1e-3, "gelu")],
            vec![vec![0.1, 0.2]],
            None,
        );
        assert!(matches!(e, Err(Error::InvalidRecord { index: 0, .. })));
    }

    #[test]
    fn space_validation() {
        assert!(SearchSpace::new(vec![ParamSpec::numeric("a", 1.0, 1.0, false)]).is_err());
        assert!(SearchSpace::new(vec![ParamSpec::numeric("a", 0.0, 1.0, true)]).is_err());
        assert!(SearchSpace::new(vec![ParamSpec::categorical("a", &[])]).is_err());
        assert!(SearchSpace::new(vec![ParamSpec::categorical("a", &["x", "x"])]).is_err());
        assert!(SearchSpace::new(vec![
            ParamSpec::numeric("a", 0.0, 1.0, false),
            ParamSpec::categorical("a", &["x"]),
        ])
        .is_err());
    }

    #[test]
    fn incremental_cost() {
        let b = toy();
        let mut ledger = BudgetLedger::new(&b);
        let first = ledger.query(&b, 1, 1).unwrap();
        assert_eq!(first.epochs, 1);
        assert_eq!(ledger.query(&b, 1, 3).unwrap().epochs, 2);
        let step = ledger.query(&b, 1, 4).unwrap();
        assert_eq!(step.epochs, 1);
        assert_eq!(step.score, 0.8);
        let again = ledger.query(&b, 1, 4).unwrap();
        assert_eq!(again.epochs, 0);
        assert_eq!(again.score, step.score);
        assert_eq!(ledger.cumulative_epochs(), 4);
        assert!(matches!(
            ledger.query(&b, 1, 6),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            ledger.query(&b, 1, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            ledger.query(&b, 9, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn seconds_follow_epoch_costs() {
        let b = Benchmark::new(
            "s",
            toy_space(),
            3,
            vec![cfg(1e-3, "relu")],
            vec![vec![0.1, 0.2, 0.3]],
            Some(vec![vec![1.0, 2.0, 4.0]]),
        )
        .unwrap();
        let mut ledger = BudgetLedger::new(&b);
        assert_eq!(ledger.query(&b, 0, 2).unwrap().seconds, 3.0);
        assert_eq!(ledger.query(&b, 0, 3).unwrap().seconds, 4.0);
        assert_eq!(ledger.cumulative_seconds(), 7.0);
    }

    #[test]
    fn best_score_is_max_final() {
        assert_eq!(best_score(&toy()), 0.9);
        let single = Benchmark::new(
            "one",
            toy_space(),
            2,
            vec![cfg(1e-3, "relu")],
            vec![vec![0.2, 0.6]],
            None,
        )
        .unwrap();
        assert_eq!(best_score(&single), 0.6);
    }

    proptest! {
        #[test]
        fn ledger_conserves_epochs(queries in proptest::collection::vec((0usize..3, 1usize..=5), 0..40)) {
            let b = toy();
            let mut ledger = BudgetLedger::new(&b);
            let mut charged = 0;
            for (c, j) in queries {
                let out = ledger.query(&b, c, j).unwrap();
                prop_assert_eq!(out.score, b.curve(c)[j - 1]);
                charged += out.epochs;
            }
            let highest: usize = (0..3).map(|c| ledger.highest(c)).sum();
            prop_assert_eq!(ledger.cumulative_epochs(), highest);
            prop_assert_eq!(charged, highest);
        }
    }
}

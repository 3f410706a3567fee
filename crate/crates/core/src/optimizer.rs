//! The dynamic multi-fidelity loop: every step picks one configuration by
//! multi-fidelity EI and trains it for exactly one more epoch.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::{index, IndexedRandom};

use crate::acquisition::mf_ei_batch;
use crate::benchmark::Benchmark;
use crate::encoding::{build_encoder, EncodedConfig};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::surrogate::{fit, FitOptions, History, Posterior, Predictor, Query, SurrogateState};
use crate::trace::{RunTrace, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidatePool {
    /// Every configuration of the benchmark that has not reached the max budget.
    All,
    /// Every partially trained configuration plus this many fresh ones
    /// sampled per step.
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyhpoOptions {
    pub n_init_random: usize,
    pub candidate_pool: CandidatePool,
    pub budget_cap_epochs: usize,
    pub use_curve_input: bool,
    pub seed: u64,
    pub fit: FitOptions,
}

impl DyhpoOptions {
    pub fn new(budget_cap_epochs: usize, seed: u64) -> Self {
        Self {
            n_init_random: 10,
            candidate_pool: CandidatePool::All,
            budget_cap_epochs,
            use_curve_input: true,
            seed,
            fit: FitOptions::default(),
        }
    }

    pub fn method_name(&self) -> &'static str {
        if self.use_curve_input {
            "dyhpo"
        } else {
            "dyhpo-nocurve"
        }
    }
}

/// Budget at which `config` would be evaluated next: one above its highest
/// observed budget, 1 if unseen.
pub fn next_budget(history: &History, config: usize) -> Result<usize> {
    let j = history.highest(config) + 1;
    if j > history.max_budget() {
        return Err(Error::NotACandidate {
            config,
            max_budget: history.max_budget(),
        });
    }
    Ok(j)
}

/// Argmax of multi-fidelity EI over `candidates`, each at its next budget.
/// Ties go to the lower budget, then the lower config index.
pub fn select_with<P: Predictor + ?Sized>(
    predictor: &P,
    history: &History,
    candidates: &[usize],
    encoded: &[EncodedConfig],
) -> Result<(usize, usize)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates".into()));
    }
    let mut queries = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let x = encoded
            .get(c)
            .ok_or_else(|| Error::InvalidArgument(format!("candidate {c} has no encoding")))?;
        queries.push(Query {
            x,
            curve: history.curve(c),
            budget: next_budget(history, c)?,
        });
    }
    let scores = mf_ei_batch(predictor, history, &queries)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("acquisition"));
    }
    let mut best = 0;
    for k in 1..candidates.len() {
        let key = |i: usize| (queries[i].budget, candidates[i]);
        if scores[k] > scores[best] || (scores[k] == scores[best] && key(k) < key(best)) {
            best = k;
        }
    }
    Ok((candidates[best], queries[best].budget))
}

/// [`select_with`] using the posterior of `state` on `history`.
pub fn select_next(
    state: &SurrogateState,
    history: &History,
    candidates: &[usize],
    benchmark: &Benchmark,
) -> Result<(usize, usize)> {
    let encoded = encode_all(benchmark)?;
    select_with(
        &Posterior::new(state, history)?,
        history,
        candidates,
        &encoded,
    )
}

fn encode_all(benchmark: &Benchmark) -> Result<Vec<EncodedConfig>> {
    let encoder = build_encoder(benchmark.space());
    benchmark
        .configs()
        .iter()
        .map(|c| encoder.encode(c))
        .collect()
}

fn fit_seed(seed: u64, step: usize) -> u64 {
    seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the loop until the epoch cap is reached or every configuration is
/// fully trained.
///
/// Phase 1 trains `n_init_random` distinct random configurations for one
/// epoch. Afterwards each step refits the surrogate (warm-started from the
/// previous step), scores all candidates and advances the argmax by one
/// epoch. If fitting or prediction fails numerically, that step advances a
/// uniformly random candidate instead and the event is recorded.
pub fn run_dyhpo(benchmark: &Benchmark, opts: &DyhpoOptions) -> Result<RunTrace> {
    if opts.n_init_random == 0 {
        return Err(Error::InvalidArgument("n_init_random must be >= 1".into()));
    }
    if opts.budget_cap_epochs < opts.n_init_random {
        return Err(Error::InvalidArgument(format!(
            "budget cap {} is below n_init_random {}",
            opts.budget_cap_epochs, opts.n_init_random
        )));
    }
    let n = benchmark.n_configs();
    let max_budget = benchmark.max_budget();
    let encoded = encode_all(benchmark)?;
    let mut session = Session::new(
        benchmark,
        opts.budget_cap_epochs,
        opts.method_name(),
        opts.seed,
    );
    let mut history = History::new(max_budget);

    let mut init_rng = stream_rng(opts.seed, Stream::InitDesign);
    for c in index::sample(&mut init_rng, n, opts.n_init_random.min(n)) {
        match session.advance(c)? {
            Some(step) => {
                history.record(c, encoded[c].clone(), step.score)?;
            }
            None => break,
        }
    }

    let fit_opts = FitOptions {
        use_curve: opts.use_curve_input,
        ..opts.fit
    };
    let mut fallback_rng = stream_rng(opts.seed, Stream::Fallback);
    let mut pool_rng = stream_rng(opts.seed, Stream::CandidateSampling);
    let mut state: Option<SurrogateState> = None;
    while !session.exhausted() {
        let candidates = candidate_pool(&history, n, opts.candidate_pool, &mut pool_rng);
        if candidates.is_empty() {
            break;
        }
        let step = session.steps();
        let chosen = match fit(
            &history,
            state.as_ref(),
            fit_seed(opts.seed, step),
            &fit_opts,
        ) {
            Ok(outcome) => {
                if outcome.numerical_failure {
                    session.note(format!(
                        "fit stopped early on a numerical failure after {} epochs",
                        outcome.epochs
                    ));
                }
                let picked = Posterior::new(&outcome.state, &history)
                    .and_then(|p| select_with(&p, &history, &candidates, &encoded));
                state = Some(outcome.state);
                picked
            }
            Err(e) => Err(e),
        };
        let config = match chosen {
            Ok((c, _)) => c,
            Err(e) => {
                let c = *candidates.choose(&mut fallback_rng).expect("non-empty");
                log::warn!("step {step}: surrogate failed ({e}); random candidate {c}");
                session.note(format!("surrogate failed ({e}); random candidate {c}"));
                c
            }
        };
        match session.advance(config)? {
            Some(s) => {
                history.record(config, encoded[config].clone(), s.score)?;
            }
            None => break,
        }
    }
    Ok(session.finish())
}

fn candidate_pool<R: rand::Rng + ?Sized>(
    history: &History,
    n: usize,
    pool: CandidatePool,
    rng: &mut R,
) -> Vec<usize> {
    let max_budget = history.max_budget();
    match pool {
        CandidatePool::All => (0..n)
            .filter(|&c| history.highest(c) < max_budget)
            .collect(),
        CandidatePool::Sampled(m) => {
            let mut out: Vec<usize> = history
                .configs()
                .filter(|&c| history.highest(c) < max_budget)
                .collect();
            let unseen: Vec<usize> = (0..n).filter(|&c| history.highest(c) == 0).collect();
            let k = m.min(unseen.len());
            let mut fresh: Vec<usize> = index::sample(rng, unseen.len(), k)
                .into_iter()
                .map(|i| unseen[i])
                .collect();
            out.append(&mut fresh);
            out.sort_unstable();
            out
        }
    }
}

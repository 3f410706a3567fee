use alloc::vec::Vec;

use nalgebra::DVector;
use rand::seq::index;

use super::extractor::FeatureInput;
use super::{gp, history_inputs, standardization, standardized_targets, History, SurrogateState};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub learning_rate: f64,
    /// Histories larger than this are trained on random subsets of this size.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without significant improvement before stopping.
    pub patience: usize,
    /// An epoch counts as improving when the full-data objective drops by
    /// more than `min_rel_improvement * max(1, |best|)`.
    pub min_rel_improvement: f64,
    /// Curve branch on/off for cold starts; warm starts keep their own flag.
    pub use_curve: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 64,
            max_epochs: 1000,
            patience: 10,
            min_rel_improvement: 1e-4,
            use_curve: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    /// Parameters with the lowest full-data objective seen.
    pub state: SurrogateState,
    pub epochs: usize,
    pub initial_nll: f64,
    pub final_nll: f64,
    /// Set when a step hit a non-finite value or an unfactorable kernel;
    /// `state` is then the best finite state reached before the failure.
    pub numerical_failure: bool,
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: alloc::vec![0.0; n],
            v: alloc::vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / (libm::sqrt(*v / c2) + self.eps);
        }
    }
}

/// Maximizes the marginal likelihood (minimizes [`super::nll`]) with Adam.
///
/// Starts from `warm_start` when given, otherwise from a seeded random
/// initialization. Up to `batch_size` observations are used as a single
/// full batch per epoch; beyond that each epoch takes `ceil(n / batch_size)`
/// steps on random subsets and evaluates the full objective once for early
/// stopping.
pub fn fit(
    history: &History,
    warm_start: Option<&SurrogateState>,
    seed: u64,
    opts: &FitOptions,
) -> Result<FitOutcome> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let x_dim = history.observations()[0].x.len();
    let mut state = match warm_start {
        Some(s) if s.weights.x_dim() == x_dim => s.clone(),
        Some(_) => {
            return Err(Error::InvalidArgument(
                "warm start has a different input dimension".into(),
            ));
        }
        None => SurrogateState::init(
            x_dim,
            opts.use_curve,
            &mut stream_rng(seed, Stream::ExtractorInit),
        ),
    };
    super::check_dims(&state, history)?;
    state.standardize_on(history);
    let (mean, sd) = standardization(history);
    let y = standardized_targets(history, mean, sd);
    let inputs = history_inputs(history);
    let n = inputs.len();
    let full_batch = n <= opts.batch_size;
    let mut rng = stream_rng(seed, Stream::Minibatch);

    let mut params = state.flat_params();
    let mut adam = Adam::new(params.len(), opts.learning_rate);
    let mut best_value = f64::INFINITY;
    let mut best_params = params.clone();
    let mut initial = f64::INFINITY;
    let mut reference = f64::INFINITY;
    let mut stale = 0;
    let mut failed = false;
    let mut epochs = 0;

    let mut sub_inputs: Vec<FeatureInput<'_>> = Vec::with_capacity(opts.batch_size);
    for epoch in 0..opts.max_epochs {
        state.set_flat_params(&params);
        let evaluated = if full_batch {
            gp::objective_with_gradient(&state.weights, &state.kernel, &inputs, &y)
                .map(|(v, g)| (v, Some(g)))
        } else {
            gp::objective_value(&state.weights, &state.kernel, &inputs, &y).map(|v| (v, None))
        };
        let (value, grad) = match evaluated {
            Ok(r) => r,
            Err(_) => {
                failed = true;
                break;
            }
        };
        epochs = epoch + 1;
        if epoch == 0 {
            initial = value;
        }
        if value < best_value {
            best_value = value;
            best_params.copy_from_slice(&params);
        }
        if value < reference - opts.min_rel_improvement * reference.abs().max(1.0) || epoch == 0 {
            reference = value;
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                break;
            }
        }
        if epoch + 1 == opts.max_epochs {
            break;
        }

        if let Some(g) = grad {
            adam.step(&mut params, &g.flat());
            continue;
        }
        for _ in 0..n.div_ceil(opts.batch_size) {
            let picked = index::sample(&mut rng, n, opts.batch_size).into_vec();
            sub_inputs.clear();
            sub_inputs.extend(picked.iter().map(|&i| inputs[i]));
            let sub_y = DVector::from_iterator(picked.len(), picked.iter().map(|&i| y[i]));
            state.set_flat_params(&params);
            match gp::objective_with_gradient(&state.weights, &state.kernel, &sub_inputs, &sub_y) {
                Ok((_, g)) => adam.step(&mut params, &g.flat()),
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        if failed || params.iter().any(|p| !p.is_finite()) {
            failed = true;
            break;
        }
    }

    state.set_flat_params(&best_params);
    Ok(FitOutcome {
        state,
        epochs,
        initial_nll: initial,
        final_nll: best_value,
        numerical_failure: failed,
    })
}

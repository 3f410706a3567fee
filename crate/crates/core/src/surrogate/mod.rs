//! Deep-kernel Gaussian process over `(x, learning curve, budget)`.
//!
//! The kernel is `k(phi(x, Y, j), phi(x', Y', j'))` with `phi` a small
//! dense/conv network and `k` squared-exponential. Targets are
//! standardized before fitting; predictions are returned on the original
//! scale.

mod extractor;
mod gp;
mod history;
mod train;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::encoding::normalize_budget;
use crate::error::{Error, Result};

pub use extractor::{
    extract_features, Conv1d, Dense, ExtractorWeights, FeatureInput, CONV_CHANNELS, CONV_WIDTH,
    HIDDEN_UNITS, LATENT_DIM,
};
pub use gp::{Gradients, KernelParams, JITTER_MAX, JITTER_START, NOISE_FLOOR};
pub use history::{History, Observation, Query};
pub use train::{fit, FitOptions, FitOutcome};

/// Fitted surrogate: network weights, kernel hyperparameters and the
/// target standardization used during fitting.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SurrogateState {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub weights: ExtractorWeights,
    pub kernel: KernelParams,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl SurrogateState {
    /// Fresh state with seeded weights and default kernel parameters.
    pub fn init<R: Rng + ?Sized>(x_dim: usize, use_curve: bool, rng: &mut R) -> Self {
        Self {
            weights: ExtractorWeights::init(x_dim, use_curve, rng),
            kernel: KernelParams::default(),
            y_mean: 0.0,
            y_sd: 1.0,
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.n_params() + 3
    }

    /// All trainable parameters in a fixed order (extractor, then kernel).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for s in self.weights.slices() {
            out.extend_from_slice(s);
        }
        out.extend_from_slice(&[
            self.kernel.log_lengthscale,
            self.kernel.log_outputscale,
            self.kernel.raw_noise,
        ]);
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter vector length");
        let mut at = 0;
        for s in self.weights.slices_mut() {
            s.copy_from_slice(&flat[at..at + s.len()]);
            at += s.len();
        }
        self.kernel.log_lengthscale = flat[at];
        self.kernel.log_outputscale = flat[at + 1];
        self.kernel.raw_noise = flat[at + 2];
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite()
            && self.kernel.is_finite()
            && self.y_mean.is_finite()
            && self.y_sd.is_finite()
    }

    /// Copies the standardization constants of `history` into the state.
    pub fn standardize_on(&mut self, history: &History) {
        let (m, s) = standardization(history);
        self.y_mean = m;
        self.y_sd = s;
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.extractor.n_params() + 3);
        for s in self.extractor.slices() {
            out.extend_from_slice(s);
        }
        out.extend_from_slice(&[
            self.kernel.log_lengthscale,
            self.kernel.log_outputscale,
            self.kernel.raw_noise,
        ]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPrediction {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and standard deviation of the observed targets; the deviation
/// falls back to 1 when fewer than two distinct values exist.
pub fn standardization(history: &History) -> (f64, f64) {
    let n = history.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mean = history.ys().sum::<f64>() / n as f64;
    let first = history.observations()[0].y;
    if history.ys().all(|y| y == first) {
        return (mean, 1.0);
    }
    let var = history.ys().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
    let sd = libm::sqrt(var);
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

pub(crate) fn feature_inputs<'a>(
    queries: &[Query<'a>],
    max_budget: usize,
) -> Vec<FeatureInput<'a>> {
    queries
        .iter()
        .map(|q| FeatureInput {
            x: q.x,
            curve: q.curve,
            budget_fraction: normalize_budget(q.budget, max_budget),
        })
        .collect()
}

fn history_inputs(history: &History) -> Vec<FeatureInput<'_>> {
    let queries: Vec<Query<'_>> = history.observations().iter().map(|o| o.query()).collect();
    feature_inputs(&queries, history.max_budget())
}

fn standardized_targets(history: &History, mean: f64, sd: f64) -> DVector<f64> {
    DVector::from_iterator(history.len(), history.ys().map(|y| (y - mean) / sd))
}

fn check_dims(state: &SurrogateState, history: &History) -> Result<()> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let d = state.weights.x_dim();
    if history.observations().iter().any(|o| o.x.len() != d) {
        return Err(Error::InvalidArgument(alloc::format!(
            "feature dimension differs from extractor input ({d})"
        )));
    }
    Ok(())
}

/// Kernel matrix `K[a][b] = s exp(-|phi_a - phi_b|^2 / (2 l^2))`, no noise.
pub fn kernel_matrix(
    state: &SurrogateState,
    inputs: &[Query<'_>],
    max_budget: usize,
) -> DMatrix<f64> {
    let fi = feature_inputs(inputs, max_budget);
    let feats = gp::Features::new(state.weights.features(&fi));
    gp::rbf(&gp::self_sq_distances(&feats), &state.kernel)
}

/// `y^T (K + noise I)^-1 y + log|K + noise I|` on targets standardized with
/// the history's own mean and deviation.
pub fn nll(state: &SurrogateState, history: &History) -> Result<f64> {
    check_dims(state, history)?;
    let (m, s) = standardization(history);
    let y = standardized_targets(history, m, s);
    gp::objective_value(&state.weights, &state.kernel, &history_inputs(history), &y)
}

/// [`nll`] together with its gradient w.r.t. all weights and kernel parameters.
pub fn nll_gradients(state: &SurrogateState, history: &History) -> Result<(f64, Gradients)> {
    check_dims(state, history)?;
    let (m, s) = standardization(history);
    let y = standardized_targets(history, m, s);
    gp::objective_with_gradient(&state.weights, &state.kernel, &history_inputs(history), &y)
}

/// Anything that can produce posterior predictions for candidate queries.
pub trait Predictor {
    fn predict(&self, queries: &[Query<'_>]) -> Result<Vec<PosteriorPrediction>>;
}

/// A surrogate conditioned on a history. Uses the standardization stored
/// in the state.
pub struct Posterior<'s> {
    state: &'s SurrogateState,
    max_budget: usize,
    factored: gp::Factored,
}

impl<'s> Posterior<'s> {
    pub fn new(state: &'s SurrogateState, history: &History) -> Result<Self> {
        check_dims(state, history)?;
        let y = standardized_targets(history, state.y_mean, state.y_sd);
        let factored =
            gp::Factored::new(&state.weights, &state.kernel, &history_inputs(history), &y)?;
        Ok(Self {
            state,
            max_budget: history.max_budget(),
            factored,
        })
    }
}

impl Predictor for Posterior<'_> {
    fn predict(&self, queries: &[Query<'_>]) -> Result<Vec<PosteriorPrediction>> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let fi = feature_inputs(queries, self.max_budget);
        let sd = self.state.y_sd;
        Ok(self
            .factored
            .predict(&self.state.weights, &self.state.kernel, &fi)?
            .into_iter()
            .map(|(m, v)| PosteriorPrediction {
                mean: m * sd + self.state.y_mean,
                variance: v * sd * sd,
            })
            .collect())
    }
}

/// Posterior mean and latent variance at each query, on the original scale.
pub fn predict(
    state: &SurrogateState,
    history: &History,
    queries: &[Query<'_>],
) -> Result<Vec<PosteriorPrediction>> {
    Posterior::new(state, history)?.predict(queries)
}

/// [`predict`] with the learning-curve branch switched off.
pub fn predict_without_curve(
    state: &SurrogateState,
    history: &History,
    queries: &[Query<'_>],
) -> Result<Vec<PosteriorPrediction>> {
    let mut ablated = state.clone();
    ablated.weights.use_curve = false;
    predict(&ablated, history, queries)
}

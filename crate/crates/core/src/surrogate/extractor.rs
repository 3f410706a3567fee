//! Feature extractor for the deep kernel.
//!
//! `[x, j/B] -> dense(128) -> leaky` on one branch, the learning curve
//! `-> conv1d(width 3, 4 channels) -> leaky -> global max pool` on the
//! other; both are concatenated and mapped by `dense(256)` to the latent
//! vector the RBF kernel is evaluated on.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const HIDDEN_UNITS: usize = 128;
pub const CONV_CHANNELS: usize = 4;
pub const CONV_WIDTH: usize = 3;
pub const LATENT_DIM: usize = 256;
const LEAKY_SLOPE: f64 = 0.01;

#[inline]
fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

#[inline]
fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Affine map `out = W in + b`; `weight` is row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / libm::sqrt(in_dim as f64);
        let mut d = Self::zeros(in_dim, out_dim);
        for w in d.weight.iter_mut().chain(d.bias.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        d
    }

    // W^T as an `in_dim x out_dim` column-major matrix shares W's row-major layout.
    fn transposed(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.in_dim, self.out_dim, &self.weight)
    }

    fn apply(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = input * self.transposed();
        for (o, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.bias[o]);
        }
        out
    }
}

/// Single-input-channel 1-D convolution, zero padded by one on each side.
/// `weight[c * CONV_WIDTH + k]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Conv1d {
    pub channels: usize,
    pub width: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    fn zeros() -> Self {
        Self {
            channels: CONV_CHANNELS,
            width: CONV_WIDTH,
            weight: vec![0.0; CONV_CHANNELS * CONV_WIDTH],
            bias: vec![0.0; CONV_CHANNELS],
        }
    }

    fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let bound = 1.0 / libm::sqrt(CONV_WIDTH as f64);
        let mut c = Self::zeros();
        for w in c.weight.iter_mut().chain(c.bias.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        c
    }

    /// Pre-activation at output position `p` of channel `c`.
    #[inline]
    fn response(&self, curve: &[f64], c: usize, p: usize) -> f64 {
        let w = &self.weight[c * CONV_WIDTH..(c + 1) * CONV_WIDTH];
        let mut acc = self.bias[c];
        for (k, wk) in w.iter().enumerate() {
            acc += wk * padded(curve, p + k);
        }
        acc
    }
}

// Padded sequence: index 0 and len+1 are zeros, 1..=len the curve. An
// empty curve is read as the single value 0.
#[inline]
fn padded(curve: &[f64], i: usize) -> f64 {
    if i == 0 || i > curve.len() {
        0.0
    } else {
        curve[i - 1]
    }
}

#[inline]
fn valid_positions(curve: &[f64]) -> usize {
    curve.len().max(1)
}

/// Trainable weights `w` of the feature extractor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ExtractorWeights {
    pub dense1: Dense,
    pub conv: Conv1d,
    pub dense2: Dense,
    /// When false the curve branch contributes a constant zero vector.
    pub use_curve: bool,
}

/// One input row for the extractor.
#[derive(Debug, Clone, Copy)]
pub struct FeatureInput<'a> {
    pub x: &'a [f64],
    pub curve: &'a [f64],
    pub budget_fraction: f64,
}

pub(crate) struct ForwardCache {
    input: DMatrix<f64>,
    z1: DMatrix<f64>,
    hidden: DMatrix<f64>,
    pool_at: Vec<[usize; CONV_CHANNELS]>,
}

impl ExtractorWeights {
    /// Fan-in scaled uniform initialization for a config dimension `x_dim`.
    pub fn init<R: Rng + ?Sized>(x_dim: usize, use_curve: bool, rng: &mut R) -> Self {
        Self {
            dense1: Dense::init(x_dim + 1, HIDDEN_UNITS, rng),
            conv: Conv1d::init(rng),
            dense2: Dense::init(HIDDEN_UNITS + CONV_CHANNELS, LATENT_DIM, rng),
            use_curve,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            dense1: Dense::zeros(self.dense1.in_dim, self.dense1.out_dim),
            conv: Conv1d::zeros(),
            dense2: Dense::zeros(self.dense2.in_dim, self.dense2.out_dim),
            use_curve: self.use_curve,
        }
    }

    pub fn x_dim(&self) -> usize {
        self.dense1.in_dim - 1
    }

    pub fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn slices(&self) -> [&[f64]; 6] {
        [
            &self.dense1.weight,
            &self.dense1.bias,
            &self.conv.weight,
            &self.conv.bias,
            &self.dense2.weight,
            &self.dense2.bias,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.dense1.weight,
            &mut self.dense1.bias,
            &mut self.conv.weight,
            &mut self.conv.bias,
            &mut self.dense2.weight,
            &mut self.dense2.bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Latent features for a batch, one row per input (`n x LATENT_DIM`).
    pub fn features(&self, inputs: &[FeatureInput<'_>]) -> DMatrix<f64> {
        self.forward(inputs).0
    }

    pub(crate) fn forward(&self, inputs: &[FeatureInput<'_>]) -> (DMatrix<f64>, ForwardCache) {
        let n = inputs.len();
        let d = self.x_dim();
        let input = DMatrix::from_fn(n, d + 1, |r, c| {
            if c < d {
                inputs[r].x[c]
            } else {
                inputs[r].budget_fraction
            }
        });
        let z1 = self.dense1.apply(&input);
        let mut hidden = DMatrix::zeros(n, HIDDEN_UNITS + CONV_CHANNELS);
        hidden
            .columns_mut(0, HIDDEN_UNITS)
            .zip_apply(&z1, |h, z| *h = leaky(z));

        let mut pool_at = vec![[0usize; CONV_CHANNELS]; n];
        if self.use_curve {
            for (r, inp) in inputs.iter().enumerate() {
                for c in 0..CONV_CHANNELS {
                    let mut best = f64::NEG_INFINITY;
                    let mut at = 0;
                    for p in 0..valid_positions(inp.curve) {
                        let v = self.conv.response(inp.curve, c, p);
                        if v > best {
                            best = v;
                            at = p;
                        }
                    }
                    pool_at[r][c] = at;
                    hidden[(r, HIDDEN_UNITS + c)] = leaky(best);
                }
            }
        }
        let phi = self.dense2.apply(&hidden);
        (
            phi,
            ForwardCache {
                input,
                z1,
                hidden,
                pool_at,
            },
        )
    }

    /// Pulls `d_phi` (gradient w.r.t. the latent batch) back to the weights.
    pub(crate) fn backward(
        &self,
        inputs: &[FeatureInput<'_>],
        cache: &ForwardCache,
        d_phi: &DMatrix<f64>,
    ) -> ExtractorWeights {
        let mut grad = self.zeros_like();

        let dw2 = cache.hidden.transpose() * d_phi;
        grad.dense2.weight.copy_from_slice(dw2.as_slice());
        for (o, col) in d_phi.column_iter().enumerate() {
            grad.dense2.bias[o] = col.sum();
        }

        let d_hidden = d_phi * self.dense2.transposed().transpose();
        let mut dz1 = d_hidden.columns(0, HIDDEN_UNITS).into_owned();
        dz1.zip_apply(&cache.z1, |g, z| *g *= leaky_grad(z));
        let dw1 = cache.input.transpose() * &dz1;
        grad.dense1.weight.copy_from_slice(dw1.as_slice());
        for (o, col) in dz1.column_iter().enumerate() {
            grad.dense1.bias[o] = col.sum();
        }

        if self.use_curve {
            for (r, inp) in inputs.iter().enumerate() {
                for c in 0..CONV_CHANNELS {
                    let p = cache.pool_at[r][c];
                    let pre = self.conv.response(inp.curve, c, p);
                    let g = d_hidden[(r, HIDDEN_UNITS + c)] * leaky_grad(pre);
                    if g == 0.0 {
                        continue;
                    }
                    grad.conv.bias[c] += g;
                    for k in 0..CONV_WIDTH {
                        grad.conv.weight[c * CONV_WIDTH + k] += g * padded(inp.curve, p + k);
                    }
                }
            }
        }
        grad
    }
}

/// Latent vector for a single `(x, curve, j/B)` triple.
pub fn extract_features(
    weights: &ExtractorWeights,
    x: &[f64],
    curve: &[f64],
    budget_fraction: f64,
) -> Vec<f64> {
    let phi = weights.features(&[FeatureInput {
        x,
        curve,
        budget_fraction,
    }]);
    phi.row(0).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn weights(use_curve: bool) -> ExtractorWeights {
        ExtractorWeights::init(5, use_curve, &mut stream_rng(1, Stream::ExtractorInit))
    }

    #[test]
    fn latent_dimension_is_fixed() {
        let w = weights(true);
        let x = [0.1, 0.9, 0.3, 0.0, 1.0];
        let curve: Vec<f64> = (0..20).map(|i| 0.04 * i as f64).collect();
        for len in 0..20 {
            let phi = extract_features(&w, &x, &curve[..len], (len + 1) as f64 / 20.0);
            assert_eq!(phi.len(), LATENT_DIM);
            assert!(phi.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn constant_curve_order_does_not_matter() {
        let w = weights(true);
        let x = [0.5; 5];
        let a = extract_features(&w, &x, &[0.3, 0.3, 0.3, 0.3], 0.25);
        let b = extract_features(&w, &x, &[0.3, 0.3, 0.3, 0.3], 0.25);
        assert_eq!(a, b);
        // a length-1 curve only sees its own entry inside the valid window
        let c = extract_features(&w, &x, &[0.7], 0.1);
        let d = extract_features(&w, &x, &[0.2], 0.1);
        assert_ne!(c, d);
    }

    #[test]
    fn ablated_branch_ignores_curve() {
        let w = weights(false);
        let x = [0.2; 5];
        let a = extract_features(&w, &x, &[0.1, 0.5, 0.9], 0.2);
        let b = extract_features(&w, &x, &[0.9, 0.1], 0.2);
        assert_eq!(a, b);
        let w = weights(true);
        let a = extract_features(&w, &x, &[0.1, 0.5, 0.9], 0.2);
        let b = extract_features(&w, &x, &[0.9, 0.1], 0.2);
        assert_ne!(a, b);
    }

    #[test]
    fn parameter_count() {
        let w = weights(true);
        let expected = 6 * 128 + 128 + 12 + 4 + 132 * 256 + 256;
        assert_eq!(w.n_params(), expected);
    }
}

//! Exact GP algebra on extracted features: RBF kernel, jittered Cholesky,
//! the negative log marginal likelihood with its reverse-mode gradient,
//! and the posterior predictive.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::extractor::{ExtractorWeights, FeatureInput};
use crate::error::{Error, Result};

pub const NOISE_FLOOR: f64 = 1e-4;
pub const JITTER_START: f64 = 1e-6;
pub const JITTER_MAX: f64 = 1e-2;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Kernel hyperparameters `theta` in unconstrained coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KernelParams {
    pub log_lengthscale: f64,
    pub log_outputscale: f64,
    /// Noise variance is `NOISE_FLOOR + softplus(raw_noise)`.
    pub raw_noise: f64,
}

impl KernelParams {
    pub fn new(lengthscale: f64, outputscale: f64, noise: f64) -> Self {
        let excess = (noise - NOISE_FLOOR).max(1e-12);
        Self {
            log_lengthscale: libm::log(lengthscale),
            log_outputscale: libm::log(outputscale),
            // inverse softplus
            raw_noise: excess + libm::log(-libm::expm1(-excess)),
        }
    }

    pub fn lengthscale(&self) -> f64 {
        libm::exp(self.log_lengthscale)
    }

    pub fn outputscale(&self) -> f64 {
        libm::exp(self.log_outputscale)
    }

    pub fn noise(&self) -> f64 {
        NOISE_FLOOR + softplus(self.raw_noise)
    }

    pub fn is_finite(&self) -> bool {
        self.log_lengthscale.is_finite()
            && self.log_outputscale.is_finite()
            && self.raw_noise.is_finite()
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1e-2)
    }
}

/// Feature batch (`n x LATENT_DIM`), its transpose and squared row norms.
pub(crate) struct Features {
    pub phi: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub norms: Vec<f64>,
}

impl Features {
    pub fn new(phi: DMatrix<f64>) -> Self {
        let t = phi.transpose();
        let norms = t.column_iter().map(|c| c.norm_squared()).collect();
        Self { phi, t, norms }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }
}

/// Squared distances between two feature sets (`a.len() x b.len()`).
pub(crate) fn sq_distances(a: &Features, b: &Features) -> DMatrix<f64> {
    // plain products hit the blocked GEMM kernel, `tr_mul` does not
    let mut d2 = &a.phi * &b.t;
    for j in 0..b.len() {
        for i in 0..a.len() {
            let v = a.norms[i] + b.norms[j] - 2.0 * d2[(i, j)];
            d2[(i, j)] = v.max(0.0);
        }
    }
    d2
}

/// Symmetric squared distances of a set with itself, exact zeros on the diagonal.
pub(crate) fn self_sq_distances(a: &Features) -> DMatrix<f64> {
    let mut d2 = sq_distances(a, a);
    let n = a.len();
    for i in 0..n {
        d2[(i, i)] = 0.0;
        for j in 0..i {
            let v = 0.5 * (d2[(i, j)] + d2[(j, i)]);
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    d2
}

pub(crate) fn rbf(d2: &DMatrix<f64>, kernel: &KernelParams) -> DMatrix<f64> {
    let s = kernel.outputscale();
    let inv = 1.0 / (2.0 * kernel.lengthscale() * kernel.lengthscale());
    d2.map(|v| s * libm::exp(-v * inv))
}

/// Lower triangle of the RBF kernel matrix, zeros above the diagonal.
/// Enough for [`factor`], which reads only the lower triangle.
fn lower_kernel(a: &Features, kernel: &KernelParams) -> DMatrix<f64> {
    let n = a.len();
    let s = kernel.outputscale();
    let inv = 1.0 / (2.0 * kernel.lengthscale() * kernel.lengthscale());
    let mut k = DMatrix::zeros(n, n);
    let mut r = 0;
    while r < n {
        let h = CHOL_BLOCK.min(n - r);
        let g = a.phi.rows(r, h) * a.t.columns(0, r + h);
        for j in 0..r + h {
            for i in r.max(j)..r + h {
                let d2 = if i == j {
                    0.0
                } else {
                    (a.norms[i] + a.norms[j] - 2.0 * g[(i - r, j)]).max(0.0)
                };
                k[(i, j)] = s * libm::exp(-d2 * inv);
            }
        }
        r += h;
    }
    k
}

/// Cholesky of `k + (noise + jitter) I`, escalating jitter tenfold from
/// `JITTER_START` up to `JITTER_MAX`.
pub(crate) fn factor(k: &DMatrix<f64>, noise: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if k.iter().any(|v| !v.is_finite()) || !noise.is_finite() {
        return Err(Error::NonFinite("kernel matrix"));
    }
    let mut jitter = JITTER_START;
    loop {
        let mut a = k.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += noise + jitter;
        }
        if blocked_cholesky(&mut a) {
            return Ok((Cholesky::pack_dirty(a), jitter));
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX * 1.000001 {
            return Err(Error::NotPositiveDefinite {
                jitter: jitter / 10.0,
            });
        }
    }
}

const CHOL_BLOCK: usize = 48;

/// Unblocked lower Cholesky of the square block at `(o, o)` of size `b`.
fn cholesky_block(a: &mut DMatrix<f64>, o: usize, b: usize) -> bool {
    for j in o..o + b {
        let mut d = a[(j, j)];
        for k in o..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if !(d > 0.0 && d.is_finite()) {
            return false;
        }
        let d = libm::sqrt(d);
        a[(j, j)] = d;
        for i in j + 1..o + b {
            let mut v = a[(i, j)];
            for k in o..j {
                v -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = v / d;
        }
    }
    true
}

/// In-place lower Cholesky; the strict upper triangle is left dirty.
/// Right-looking by blocks so the trailing updates run through GEMM.
fn blocked_cholesky(a: &mut DMatrix<f64>) -> bool {
    let n = a.nrows();
    let mut o = 0;
    while o < n {
        let b = CHOL_BLOCK.min(n - o);
        if !cholesky_block(a, o, b) {
            return false;
        }
        let rest = n - o - b;
        if rest == 0 {
            break;
        }
        // panel <- panel * L11^-T, row by row forward substitution
        let mut panel = a.view((o + b, o), (rest, b)).into_owned();
        for r in 0..rest {
            for j in 0..b {
                let mut v = panel[(r, j)];
                for k in 0..j {
                    v -= panel[(r, k)] * a[(o + j, o + k)];
                }
                panel[(r, j)] = v / a[(o + j, o + j)];
            }
        }
        a.view_mut((o + b, o), (rest, b)).copy_from(&panel);
        // trailing update, lower block columns only
        let panel_t = panel.transpose();
        let mut c = 0;
        while c < rest {
            let w = CHOL_BLOCK.min(rest - c);
            let lhs = panel.rows(c, rest - c);
            let rhs = panel_t.columns(c, w);
            a.view_mut((o + b + c, o + b + c), (rest - c, w))
                .gemm(-1.0, &lhs, &rhs, 1.0);
            c += w;
        }
        o += b;
    }
    true
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| libm::log(l[(i, i)])).sum::<f64>()
}

/// Derivatives of the objective w.r.t. every trainable parameter; fields
/// mirror the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub extractor: ExtractorWeights,
    pub kernel: KernelParams,
}

/// `y^T A^-1 y + log|A|` with `A = K + noise I`, value only.
pub(crate) fn objective_value(
    weights: &ExtractorWeights,
    kernel: &KernelParams,
    inputs: &[FeatureInput<'_>],
    y: &DVector<f64>,
) -> Result<f64> {
    let feats = Features::new(weights.features(inputs));
    let (chol, _) = factor(&lower_kernel(&feats, kernel), kernel.noise())?;
    let alpha = chol.solve(y);
    let value = y.dot(&alpha) + log_det(&chol);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("negative log likelihood"))
    }
}

/// Objective value plus exact gradient.
///
/// With `M = A^-1 - alpha alpha^T` and `W = M o K`: d/dlog s = sum W,
/// d/dlog l = sum W o D2 / l^2, d/dnoise = tr M, and the latent gradient is
/// `-(2 / l^2) (diag(W 1) Phi - W Phi)`, which is pulled back through the
/// extractor.
pub(crate) fn objective_with_gradient(
    weights: &ExtractorWeights,
    kernel: &KernelParams,
    inputs: &[FeatureInput<'_>],
    y: &DVector<f64>,
) -> Result<(f64, Gradients)> {
    let (phi, cache) = weights.forward(inputs);
    let feats = Features::new(phi);
    let d2 = self_sq_distances(&feats);
    let phi = &feats.phi;
    let k = rbf(&d2, kernel);
    let (chol, _) = factor(&k, kernel.noise())?;
    let alpha = chol.solve(y);
    let value = y.dot(&alpha) + log_det(&chol);
    if !value.is_finite() {
        return Err(Error::NonFinite("negative log likelihood"));
    }

    let mut m = chol.inverse();
    m.ger(-1.0, &alpha, &alpha, 1.0);
    let w = m.component_mul(&k);
    let ls2 = kernel.lengthscale() * kernel.lengthscale();

    let d_log_outputscale = w.sum();
    let d_log_lengthscale = w.component_mul(&d2).sum() / ls2;
    let d_noise = m.trace();
    let d_raw_noise = d_noise * sigmoid(kernel.raw_noise);

    let row_sums = w.column_sum();
    let mut d_phi = &w * phi;
    for (c, mut col) in d_phi.column_iter_mut().enumerate() {
        for (i, v) in col.iter_mut().enumerate() {
            *v -= row_sums[i] * phi[(i, c)];
        }
    }
    d_phi *= 2.0 / ls2;

    let extractor = weights.backward(inputs, &cache, &d_phi);
    if !extractor.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    Ok((
        value,
        Gradients {
            extractor,
            kernel: KernelParams {
                log_lengthscale: d_log_lengthscale,
                log_outputscale: d_log_outputscale,
                raw_noise: d_raw_noise,
            },
        },
    ))
}

/// Factored training set ready to answer posterior queries.
pub(crate) struct Factored {
    pub feats: Features,
    pub chol: Cholesky<f64, Dyn>,
    pub alpha: DVector<f64>,
}

impl Factored {
    pub fn new(
        weights: &ExtractorWeights,
        kernel: &KernelParams,
        inputs: &[FeatureInput<'_>],
        y: &DVector<f64>,
    ) -> Result<Self> {
        let feats = Features::new(weights.features(inputs));
        let k = rbf(&self_sq_distances(&feats), kernel);
        let (chol, _) = factor(&k, kernel.noise())?;
        let alpha = chol.solve(y);
        Ok(Self { feats, chol, alpha })
    }

    /// Latent mean and variance on the standardized scale.
    pub fn predict(
        &self,
        weights: &ExtractorWeights,
        kernel: &KernelParams,
        inputs: &[FeatureInput<'_>],
    ) -> Result<Vec<(f64, f64)>> {
        let q = Features::new(weights.features(inputs));
        let k_star = rbf(&sq_distances(&self.feats, &q), kernel);
        let mean = k_star.transpose() * &self.alpha;
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_star)
            .ok_or(Error::NonFinite("triangular solve"))?;
        let s = kernel.outputscale();
        let out: Vec<(f64, f64)> = v
            .column_iter()
            .zip(mean.iter())
            .map(|(col, &mu)| (mu, (s - col.norm_squared()).max(0.0)))
            .collect();
        if out.iter().any(|(m, v)| !m.is_finite() || !v.is_finite()) {
            return Err(Error::NonFinite("posterior"));
        }
        Ok(out)
    }
}

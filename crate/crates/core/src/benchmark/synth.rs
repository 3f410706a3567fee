use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Benchmark, ParamSpec, ParamValue, SearchSpace};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub n_configs: usize,
    pub max_budget: usize,
    pub crossing_fraction: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Shared by all non-crossing configs so their ranks agree at every budget.
const NORMAL_RATE: f64 = 9.0;

/// Crossing configs saturate this much higher than a normal config of the
/// same quality, at a rate drawn from `CROSS_RATE`.
const CROSS_BOOST: f64 = 0.12;
const CROSS_RATE: (f64, f64) = (3.5, 5.0);

const ACTIVATIONS: [&str; 3] = ["relu", "tanh", "gelu"];

fn synth_space() -> SearchSpace {
    SearchSpace::new(alloc::vec![
        ParamSpec::numeric("learning_rate", 1e-4, 1e-1, true),
        ParamSpec::numeric("batch_size", 16.0, 512.0, true),
        ParamSpec::numeric("dropout", 0.0, 0.8, false),
        ParamSpec::numeric("weight_decay", 1e-5, 1e-1, true),
        ParamSpec::categorical("activation", &ACTIVATIONS),
    ])
    .expect("static space is valid")
}

/// Generates saturating learning curves `a(x) * (1 - exp(-b(x) * j / B)) + noise`.
///
/// Configurations with the smallest learning rates form the crossing group:
/// they start slowly but saturate higher than normal configs of the same
/// quality, so the good ones rank poorly at small budgets and well at `B`.
pub fn synth_benchmark(opts: &SynthOptions) -> Result<Benchmark> {
    let SynthOptions {
        n_configs: n,
        max_budget,
        crossing_fraction,
        noise_sd,
        seed,
    } = *opts;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_configs must be >= 2, got {n}"
        )));
    }
    if max_budget < 2 {
        return Err(Error::InvalidArgument(format!(
            "max_budget must be >= 2, got {max_budget}"
        )));
    }
    if !(0.0..=1.0).contains(&crossing_fraction) {
        return Err(Error::InvalidArgument(format!(
            "crossing_fraction must lie in [0, 1], got {crossing_fraction}"
        )));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }

    let space = synth_space();
    let mut rng = stream_rng(seed, Stream::Synth);

    // Landscape: per-parameter optimum location and weight, plus a bonus per
    // activation choice.
    let centers: [f64; 4] = core::array::from_fn(|_| rng.random_range(0.2..0.8));
    let weights: [f64; 4] = core::array::from_fn(|_| rng.random_range(0.5..1.5));
    let bonus: [f64; 3] = core::array::from_fn(|_| rng.random::<f64>());

    let mut units = Vec::with_capacity(n);
    let mut configs = Vec::with_capacity(n);
    for _ in 0..n {
        let u: [f64; 4] = core::array::from_fn(|_| rng.random::<f64>());
        let act = rng.random_range(0..ACTIVATIONS.len());
        let mut config = Vec::with_capacity(5);
        for (p, &uk) in space.params().iter().zip(&u) {
            if let super::ParamKind::Numeric {
                low,
                high,
                log_scale,
            } = p.kind
            {
                let v = if log_scale {
                    libm::exp(libm::log(low) + uk * (libm::log(high) - libm::log(low)))
                } else {
                    low + uk * (high - low)
                };
                config.push(ParamValue::Numeric(v.clamp(low, high)));
            }
        }
        config.push(ParamValue::Categorical(ACTIVATIONS[act].into()));
        configs.push(config);
        units.push((u, act));
    }

    let n_cross = libm::round(crossing_fraction * n as f64) as usize;
    let mut by_lr: Vec<usize> = (0..n).collect();
    by_lr.sort_by(|&a, &b| units[a].0[0].total_cmp(&units[b].0[0]).then(a.cmp(&b)));
    let mut crossing = alloc::vec![false; n];
    for &i in &by_lr[..n_cross] {
        crossing[i] = true;
    }

    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("finite sd");
    let mut curves = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    for (i, (u, act)) in units.iter().enumerate() {
        let mut num = 0.6 * bonus[*act];
        let mut den = 0.6;
        for k in 0..4 {
            let d = u[k] - centers[k];
            num += weights[k] * libm::exp(-d * d / (2.0 * 0.3 * 0.3));
            den += weights[k];
        }
        let quality = num / den;
        let base = 0.25 + 0.6 * quality;
        let (asymptote, rate) = if crossing[i] {
            (
                base + CROSS_BOOST,
                CROSS_RATE.0 + (CROSS_RATE.1 - CROSS_RATE.0) * u[1],
            )
        } else {
            (base, NORMAL_RATE)
        };
        let curve = (1..=max_budget)
            .map(|j| {
                let clean = asymptote * (1.0 - libm::exp(-rate * j as f64 / max_budget as f64));
                let eps = if noise_sd > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                (clean + eps).clamp(0.0, 1.0)
            })
            .collect();
        curves.push(curve);
        costs.push(alloc::vec![0.5 + 1.5 * (1.0 - u[1]); max_budget]);
    }

    Benchmark::new(
        format!("synth-n{n}-b{max_budget}-c{crossing_fraction}-s{seed}"),
        space,
        max_budget,
        configs,
        curves,
        Some(costs),
    )
}

//! Configuration preprocessing: min-max scaling (optionally in log space)
//! for numeric parameters, one-hot blocks for categoricals.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::benchmark::{ParamKind, ParamValue, SearchSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Transform {
    MinMax { low: f64, high: f64 },
    LogMinMax { log_low: f64, log_high: f64 },
    OneHot { choices: Vec<String> },
}

/// Stateless feature map built from the declared search-space bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    names: Vec<String>,
    transforms: Vec<Transform>,
    dim: usize,
}

/// Encoded configuration vector `x`.
pub type EncodedConfig = Vec<f64>;

pub fn build_encoder(space: &SearchSpace) -> Encoder {
    let mut dim = 0;
    let mut names = Vec::with_capacity(space.len());
    let transforms = space
        .params()
        .iter()
        .map(|p| {
            names.push(p.name.clone());
            match &p.kind {
                ParamKind::Numeric {
                    low,
                    high,
                    log_scale: true,
                } => {
                    dim += 1;
                    Transform::LogMinMax {
                        log_low: libm::log(*low),
                        log_high: libm::log(*high),
                    }
                }
                ParamKind::Numeric {
                    low,
                    high,
                    log_scale: false,
                } => {
                    dim += 1;
                    Transform::MinMax {
                        low: *low,
                        high: *high,
                    }
                }
                ParamKind::Categorical { choices } => {
                    dim += choices.len();
                    Transform::OneHot {
                        choices: choices.clone(),
                    }
                }
            }
        })
        .collect();
    Encoder {
        names,
        transforms,
        dim,
    }
}

impl Encoder {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode(&self, config: &[ParamValue]) -> Result<EncodedConfig> {
        if config.len() != self.transforms.len() {
            return Err(Error::Encoding {
                param: "<config>".to_string(),
                reason: format!(
                    "expected {} values, got {}",
                    self.transforms.len(),
                    config.len()
                ),
            });
        }
        let mut out = Vec::with_capacity(self.dim);
        for ((name, t), v) in self.names.iter().zip(&self.transforms).zip(config) {
            let err = |reason: String| Error::Encoding {
                param: name.clone(),
                reason,
            };
            match (t, v) {
                (Transform::MinMax { low, high }, ParamValue::Numeric(x)) => {
                    if !(x.is_finite() && x >= low && x <= high) {
                        return Err(err(format!("{x} outside [{low}, {high}]")));
                    }
                    out.push((x - low) / (high - low));
                }
                (Transform::LogMinMax { log_low, log_high }, ParamValue::Numeric(x)) => {
                    let lx = if *x > 0.0 { libm::log(*x) } else { f64::NAN };
                    // tolerate round-off at the bounds from exp/log round trips
                    let slack = 1e-12 * (log_high - log_low);
                    if !(lx.is_finite() && lx >= log_low - slack && lx <= log_high + slack) {
                        return Err(err(format!("{x} outside log bounds")));
                    }
                    out.push(((lx - log_low) / (log_high - log_low)).clamp(0.0, 1.0));
                }
                (Transform::OneHot { choices }, ParamValue::Categorical(c)) => {
                    let hot = choices
                        .iter()
                        .position(|k| k == c)
                        .ok_or_else(|| err(format!("unknown category `{c}`")))?;
                    out.extend((0..choices.len()).map(|k| if k == hot { 1.0 } else { 0.0 }));
                }
                _ => return Err(err("value kind does not match parameter kind".into())),
            }
        }
        Ok(out)
    }
}

pub fn encode(encoder: &Encoder, config: &[ParamValue]) -> Result<EncodedConfig> {
    encoder.encode(config)
}

/// Budget `j` scaled into `(0, 1]` by the maximum budget.
pub fn normalize_budget(budget: usize, max_budget: usize) -> f64 {
    budget as f64 / max_budget as f64
}

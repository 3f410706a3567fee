//! JSON checkpoints of a fitted surrogate.

use std::fs;
use std::path::Path;

use graybox_core::surrogate::{
    Dense, SurrogateState, CONV_CHANNELS, CONV_WIDTH, HIDDEN_UNITS, LATENT_DIM,
};

use crate::error::{io_err, Error, Result};

fn check_dense(d: &Dense, name: &str, in_dim: Option<usize>, out_dim: usize) -> Result<(), String> {
    if in_dim.is_some_and(|i| i != d.in_dim) || d.out_dim != out_dim {
        return Err(format!(
            "{name}: shape {}x{} is not supported",
            d.out_dim, d.in_dim
        ));
    }
    if d.weight.len() != d.in_dim * d.out_dim || d.bias.len() != d.out_dim {
        return Err(format!("{name}: array lengths do not match its shape"));
    }
    Ok(())
}

fn check_state(s: &SurrogateState) -> Result<(), String> {
    check_dense(&s.weights.dense1, "dense1", None, HIDDEN_UNITS)?;
    check_dense(
        &s.weights.dense2,
        "dense2",
        Some(HIDDEN_UNITS + CONV_CHANNELS),
        LATENT_DIM,
    )?;
    let c = &s.weights.conv;
    if c.channels != CONV_CHANNELS
        || c.width != CONV_WIDTH
        || c.weight.len() != CONV_CHANNELS * CONV_WIDTH
        || c.bias.len() != CONV_CHANNELS
    {
        return Err("conv: unsupported shape".into());
    }
    if s.weights.dense1.in_dim == 0 {
        return Err("dense1: input dimension must be >= 1".into());
    }
    if !s.is_finite() || s.y_sd <= 0.0 {
        return Err("non-finite parameters or non-positive y_sd".into());
    }
    Ok(())
}

pub fn save_checkpoint(state: &SurrogateState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(state).expect("state serializes");
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SurrogateState> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let state: SurrogateState = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        line: 1,
        source,
    })?;
    check_state(&state).map_err(|reason| Error::Format {
        path: path.into(),
        reason,
    })?;
    Ok(state)
}

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::encoding::EncodedConfig;
use crate::error::{Error, Result};

/// A surrogate input: configuration features, the learning curve observed
/// before `budget`, and the budget itself.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub x: &'a [f64],
    pub curve: &'a [f64],
    pub budget: usize,
}

/// One training record `((x, Y_{j-1}, j), y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub config_index: usize,
    pub x: EncodedConfig,
    pub curve_prefix: Vec<f64>,
    pub budget: usize,
    pub y: f64,
}

impl Observation {
    pub fn query(&self) -> Query<'_> {
        Query {
            x: &self.x,
            curve: &self.curve_prefix,
            budget: self.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConfigTrack {
    x: EncodedConfig,
    curve: Vec<f64>,
}

/// Observations collected during a run. For every configuration the
/// observed budgets are exactly `1..=highest`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    max_budget: usize,
    observations: Vec<Observation>,
    tracks: BTreeMap<usize, ConfigTrack>,
}

impl History {
    pub fn new(max_budget: usize) -> Self {
        Self {
            max_budget,
            observations: Vec::new(),
            tracks: BTreeMap::new(),
        }
    }

    /// Rebuilds a history from observations in any order, checking that
    /// each configuration's budgets are contiguous from 1 and that every
    /// curve prefix matches the recorded scores.
    pub fn from_observations(max_budget: usize, observations: Vec<Observation>) -> Result<Self> {
        let mut by_config: BTreeMap<usize, Vec<&Observation>> = BTreeMap::new();
        for o in &observations {
            by_config.entry(o.config_index).or_default().push(o);
        }
        let mut tracks = BTreeMap::new();
        for (config, mut obs) in by_config {
            obs.sort_by_key(|o| o.budget);
            let mut curve = Vec::with_capacity(obs.len());
            for (k, o) in obs.iter().enumerate() {
                check_observation(o, max_budget, k + 1, &curve, &obs[0].x)?;
                curve.push(o.y);
            }
            tracks.insert(
                config,
                ConfigTrack {
                    x: obs[0].x.clone(),
                    curve,
                },
            );
        }
        Ok(Self {
            max_budget,
            observations,
            tracks,
        })
    }

    pub fn max_budget(&self) -> usize {
        self.max_budget
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Highest budget observed for `config`, 0 if unseen.
    pub fn highest(&self, config: usize) -> usize {
        self.tracks.get(&config).map_or(0, |t| t.curve.len())
    }

    /// Scores observed for `config` at budgets `1..=highest`.
    pub fn curve(&self, config: usize) -> &[f64] {
        self.tracks.get(&config).map_or(&[], |t| &t.curve)
    }

    pub fn features(&self, config: usize) -> Option<&[f64]> {
        self.tracks.get(&config).map(|t| t.x.as_slice())
    }

    /// Configurations with at least one observation, ascending.
    pub fn configs(&self) -> impl Iterator<Item = usize> + '_ {
        self.tracks.keys().copied()
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.y)
    }

    /// Appends the next-budget observation of `config`; the budget and
    /// curve prefix are derived from what has been recorded so far.
    pub fn record(&mut self, config: usize, x: EncodedConfig, y: f64) -> Result<&Observation> {
        let obs = Observation {
            config_index: config,
            curve_prefix: self.curve(config).to_vec(),
            budget: self.highest(config) + 1,
            x,
            y,
        };
        self.push(obs)?;
        Ok(self.observations.last().expect("just pushed"))
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        let expected = self.highest(obs.config_index) + 1;
        match self.tracks.get(&obs.config_index) {
            Some(t) => check_observation(&obs, self.max_budget, expected, &t.curve, &t.x)?,
            None => check_observation(&obs, self.max_budget, expected, &[], &obs.x)?,
        }
        let track = self
            .tracks
            .entry(obs.config_index)
            .or_insert_with(|| ConfigTrack {
                x: obs.x.clone(),
                curve: Vec::new(),
            });
        track.curve.push(obs.y);
        self.observations.push(obs);
        Ok(())
    }
}

fn check_observation(
    o: &Observation,
    max_budget: usize,
    expected: usize,
    curve: &[f64],
    x: &[f64],
) -> Result<()> {
    if o.budget != expected {
        return Err(Error::History(format!(
            "config {}: budget {} observed, expected {expected}",
            o.config_index, o.budget
        )));
    }
    if o.budget == 0 || o.budget > max_budget {
        return Err(Error::History(format!(
            "config {}: budget {} outside 1..={max_budget}",
            o.config_index, o.budget
        )));
    }
    if o.curve_prefix.as_slice() != curve {
        return Err(Error::History(format!(
            "config {}: curve prefix does not match earlier observations",
            o.config_index
        )));
    }
    if o.x.as_slice() != x {
        return Err(Error::History(format!(
            "config {}: features changed between budgets",
            o.config_index
        )));
    }
    if !o.y.is_finite() || o.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation"));
    }
    Ok(())
}

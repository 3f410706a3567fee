//! Benchmark directories: `meta.json` plus one `curves.jsonl` record per
//! configuration.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use graybox_core::benchmark::{Benchmark, ParamKind, ParamSpec, ParamValue, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const META_FILE: &str = "meta.json";
pub const CURVES_FILE: &str = "curves.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    name: String,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_scale: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    name: String,
    max_budget: usize,
    #[serde(default = "default_metric")]
    metric: String,
    #[serde(default = "default_direction")]
    direction: String,
    space: Vec<ParamEntry>,
}

fn default_metric() -> String {
    "val_accuracy".into()
}

fn default_direction() -> String {
    "max".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveRecord {
    id: usize,
    config: BTreeMap<String, ParamValue>,
    curve: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epoch_seconds: Option<Vec<f64>>,
}

fn spec_from_entry(e: &ParamEntry) -> std::result::Result<ParamSpec, String> {
    let kind = match e.kind {
        Kind::Numeric => {
            if e.choices.is_some() {
                return Err(format!("numeric parameter `{}` declares choices", e.name));
            }
            let (Some(low), Some(high)) = (e.low, e.high) else {
                return Err(format!("numeric parameter `{}` needs low and high", e.name));
            };
            ParamKind::Numeric {
                low,
                high,
                log_scale: e.log_scale.unwrap_or(false),
            }
        }
        Kind::Categorical => {
            if e.low.is_some() || e.high.is_some() || e.log_scale.is_some() {
                return Err(format!(
                    "categorical parameter `{}` declares numeric bounds",
                    e.name
                ));
            }
            ParamKind::Categorical {
                choices: e.choices.clone().unwrap_or_default(),
            }
        }
    };
    Ok(ParamSpec {
        name: e.name.clone(),
        kind,
    })
}

fn entry_from_spec(p: &ParamSpec) -> ParamEntry {
    match &p.kind {
        ParamKind::Numeric {
            low,
            high,
            log_scale,
        } => ParamEntry {
            name: p.name.clone(),
            kind: Kind::Numeric,
            low: Some(*low),
            high: Some(*high),
            log_scale: Some(*log_scale),
            choices: None,
        },
        ParamKind::Categorical { choices } => ParamEntry {
            name: p.name.clone(),
            kind: Kind::Categorical,
            low: None,
            high: None,
            log_scale: None,
            choices: Some(choices.clone()),
        },
    }
}

fn read_meta(path: &Path) -> Result<(Meta, SearchSpace)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let meta: Meta = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        line: 1,
        source,
    })?;
    let format_err = |reason: String| Error::Format {
        path: path.into(),
        reason,
    };
    if meta.direction != "max" {
        return Err(format_err(format!(
            "direction `{}` unsupported, scores are maximized",
            meta.direction
        )));
    }
    let params = meta
        .space
        .iter()
        .map(spec_from_entry)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(format_err)?;
    let space = SearchSpace::new(params).map_err(|e| format_err(e.to_string()))?;
    Ok((meta, space))
}

/// Loads and validates a benchmark directory. Errors name the file and,
/// for curve records, the record index.
pub fn load_benchmark(dir: impl AsRef<Path>) -> Result<Benchmark> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let (meta, space) = read_meta(&meta_path)?;
    let curves_path = dir.join(CURVES_FILE);
    let file = fs::File::open(&curves_path).map_err(io_err(&curves_path))?;

    let mut configs = Vec::new();
    let mut curves = Vec::new();
    let mut costs = Vec::new();
    let mut any_costs = false;
    let mut record = 0;
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&curves_path))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Record {
            path: curves_path.clone(),
            record,
            reason,
        };
        let r: CurveRecord = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: curves_path.clone(),
            line: k + 1,
            source,
        })?;
        if r.id != record {
            return Err(bad(format!("id {} out of order, expected {record}", r.id)));
        }
        if let Some(unknown) = r.config.keys().find(|n| space.position(n).is_none()) {
            return Err(bad(format!("unknown parameter `{unknown}`")));
        }
        let mut config = Vec::with_capacity(space.len());
        for p in space.params() {
            let v = r
                .config
                .get(&p.name)
                .ok_or_else(|| bad(format!("missing parameter `{}`", p.name)))?;
            config.push(v.clone());
        }
        space.check(&config).map_err(bad)?;
        if r.curve.len() != meta.max_budget {
            return Err(bad(format!(
                "curve has length {}, expected max_budget {}",
                r.curve.len(),
                meta.max_budget
            )));
        }
        if let Some((j, y)) = r
            .curve
            .iter()
            .enumerate()
            .find(|(_, y)| !(0.0..=1.0).contains(*y))
        {
            return Err(bad(format!("score {y} at budget {} outside [0, 1]", j + 1)));
        }
        any_costs |= r.epoch_seconds.is_some();
        costs.push(r.epoch_seconds);
        configs.push(config);
        curves.push(r.curve);
        record += 1;
    }
    let costs = if any_costs {
        let filled = costs
            .into_iter()
            .map(|c| c.unwrap_or_else(|| vec![1.0; meta.max_budget]))
            .collect();
        Some(filled)
    } else {
        None
    };
    Benchmark::new(meta.name, space, meta.max_budget, configs, curves, costs).map_err(|e| match e {
        graybox_core::Error::InvalidRecord { index, reason } => Error::Record {
            path: curves_path.clone(),
            record: index,
            reason,
        },
        other => Error::Format {
            path: curves_path.clone(),
            reason: other.to_string(),
        },
    })
}

/// Writes `benchmark` as a directory readable by [`load_benchmark`].
pub fn save_benchmark(benchmark: &Benchmark, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let meta = Meta {
        name: benchmark.name().to_string(),
        max_budget: benchmark.max_budget(),
        metric: default_metric(),
        direction: default_direction(),
        space: benchmark
            .space()
            .params()
            .iter()
            .map(entry_from_spec)
            .collect(),
    };
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))?;

    let curves_path = dir.join(CURVES_FILE);
    let file = fs::File::create(&curves_path).map_err(io_err(&curves_path))?;
    let mut out = BufWriter::new(file);
    for id in 0..benchmark.n_configs() {
        let config = benchmark
            .space()
            .params()
            .iter()
            .zip(benchmark.config(id))
            .map(|(p, v)| (p.name.clone(), v.clone()))
            .collect();
        let rec = CurveRecord {
            id,
            config,
            curve: benchmark.curve(id).to_vec(),
            epoch_seconds: Some(benchmark.epoch_costs(id).to_vec()),
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        writeln!(out, "{line}").map_err(io_err(&curves_path))?;
    }
    out.flush().map_err(io_err(&curves_path))
}

//! Run traces as JSON lines: a header object, then one object per step.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use graybox_core::trace::{RunTrace, TraceEvent, TraceStep};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    method: String,
    seed: u64,
    benchmark_name: String,
    #[serde(default)]
    events: Vec<TraceEvent>,
}

/// Serializes a trace to its JSON-lines text.
pub fn trace_to_string(trace: &RunTrace) -> String {
    let header = Header {
        method: trace.method.clone(),
        seed: trace.seed,
        benchmark_name: trace.benchmark_name.clone(),
        events: trace.events.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for s in &trace.steps {
        out.push_str(&serde_json::to_string(s).expect("step serializes"));
        out.push('\n');
    }
    out
}

pub fn write_trace(trace: &RunTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(trace_to_string(trace).as_bytes())
        .map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<RunTrace> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let json_err = |line: usize| {
        move |source| Error::Json {
            path: path.into(),
            line,
            source,
        }
    };
    let header: Header = match lines.next() {
        Some((_, l)) => serde_json::from_str(&l.map_err(io_err(path))?).map_err(json_err(1))?,
        None => {
            return Err(Error::Format {
                path: path.into(),
                reason: "empty trace file".into(),
            })
        }
    };
    let mut steps = Vec::new();
    for (k, line) in lines {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let step: TraceStep = serde_json::from_str(&line).map_err(json_err(k + 1))?;
        steps.push(step);
    }
    Ok(RunTrace {
        method: header.method,
        seed: header.seed,
        benchmark_name: header.benchmark_name,
        steps,
        events: header.events,
    })
}

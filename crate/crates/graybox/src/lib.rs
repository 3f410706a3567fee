//! Files, reports and the command line around `graybox-core`.
//!
//! Benchmarks live in directories holding `meta.json` and `curves.jsonl`;
//! runs produce one JSON-lines trace per (method, seed); reports are tidy
//! CSV with columns `method,dataset,seed,x,metric,value`.

pub mod bench_io;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod report;
pub mod runner;
pub mod trace_io;

pub use error::{Error, Result};

#![allow(dead_code)]

use std::fs;
use std::path::Path;

use graybox_core::benchmark::{Benchmark, ParamSpec, ParamValue, SearchSpace};
use graybox_core::trace::{RunTrace, Session};

/// One numeric parameter, curves given row by row.
pub fn table(name: &str, curves: Vec<Vec<f64>>) -> Benchmark {
    let space = SearchSpace::new(vec![ParamSpec::numeric("x", 0.0, 1.0, false)]).unwrap();
    let n = curves.len();
    let b = curves[0].len();
    let configs = (0..n)
        .map(|i| vec![ParamValue::Numeric(i as f64 / n as f64)])
        .collect();
    Benchmark::new(name, space, b, configs, curves, None).unwrap()
}

/// Six configs over two budgets. Config 4 is last at budget 1 and second
/// at budget 2, so the top third at budget 2 is {0, 4}.
pub fn crossing_fixture() -> Benchmark {
    table(
        "fixture",
        vec![
            vec![0.90, 0.95],
            vec![0.80, 0.82],
            vec![0.70, 0.72],
            vec![0.60, 0.62],
            vec![0.10, 0.90],
            vec![0.50, 0.52],
        ],
    )
}

/// Trains each `(config, budget)` in order.
pub fn trace_of(b: &Benchmark, method: &str, seed: u64, plan: &[(usize, usize)]) -> RunTrace {
    let mut s = Session::new(b, usize::MAX, method, seed);
    for &(c, j) in plan {
        s.train_to(c, j).unwrap();
    }
    s.finish()
}

pub fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

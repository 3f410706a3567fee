mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use graybox::bench_io::{load_benchmark, save_benchmark};
use graybox::report::{report, write_csv, Metric, ReportOptions};
use graybox::runner::{run_method, trace_file_name, Method, MethodOptions};
use graybox::trace_io::{trace_to_string, write_trace};
use graybox_core::benchmark::{synth_benchmark, SynthOptions};
use tempfile::tempdir;

use common::{crossing_fixture, table, trace_of};

fn graybox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graybox"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = graybox(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_synth(dir: &Path, crossing: &str, seed: &str) {
    ok(&[
        "synth",
        "--configs",
        "30",
        "--budgets",
        "8",
        "--crossing",
        crossing,
        "--seed",
        seed,
        "--out",
        p(dir),
    ]);
}

#[test]
fn synth_writes_a_loadable_benchmark_equal_to_the_library_one() {
    let d = tempdir().unwrap();
    ok(&[
        "synth",
        "--configs",
        "200",
        "--budgets",
        "20",
        "--crossing",
        "0.5",
        "--seed",
        "1",
        "--out",
        p(d.path()),
    ]);
    let loaded = load_benchmark(d.path()).unwrap();
    let direct = synth_benchmark(&SynthOptions {
        n_configs: 200,
        max_budget: 20,
        crossing_fraction: 0.5,
        noise_sd: 0.01,
        seed: 1,
    })
    .unwrap();
    assert_eq!(loaded, direct);
}

#[test]
fn invalid_crossing_is_a_usage_error() {
    let d = tempdir().unwrap();
    let out = graybox(&["synth", "--crossing", "1.5", "--out", p(d.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside [0, 1]"));
}

#[test]
fn unknown_method_lists_supported_ones() {
    let d = tempdir().unwrap();
    small_synth(d.path(), "0.3", "0");
    let out = graybox(&[
        "run",
        p(d.path()),
        "--method",
        "bohb",
        "--budget-cap",
        "10",
        "--out",
        p(d.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for m in ["dyhpo", "dyhpo-nocurve", "rs", "sh", "hyperband", "asha"] {
        assert!(err.contains(m), "{err}");
    }
}

#[test]
fn missing_benchmark_is_a_runtime_error() {
    let d = tempdir().unwrap();
    let out = graybox(&[
        "run",
        p(&d.path().join("nope")),
        "--method",
        "rs",
        "--budget-cap",
        "10",
        "--out",
        p(d.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("meta.json"));
}

#[test]
fn run_writes_one_trace_per_seed_identical_to_library_calls() {
    let d = tempdir().unwrap();
    let bench = d.path().join("bench");
    small_synth(&bench, "0.3", "2");
    let b = load_benchmark(&bench).unwrap();
    let opts = MethodOptions::default();
    for (method, cap) in [
        ("rs", "60"),
        ("hyperband", "60"),
        ("asha", "60"),
        ("sh", "60"),
        ("dyhpo", "14"),
    ] {
        let out = d.path().join(method);
        ok(&[
            "run",
            p(&bench),
            "--method",
            method,
            "--seeds",
            "0..10",
            "--budget-cap",
            cap,
            "--out",
            p(&out),
        ]);
        let m: Method = method.parse().unwrap();
        let files: Vec<_> = fs::read_dir(&out).unwrap().collect();
        assert_eq!(files.len(), 10);
        for seed in [0u64, 9] {
            let text = fs::read_to_string(out.join(trace_file_name(m, seed))).unwrap();
            let direct = run_method(&b, m, seed, cap.parse().unwrap(), &opts).unwrap();
            assert_eq!(text, trace_to_string(&direct), "{method} seed {seed}");
        }
    }
}

#[test]
fn reruns_and_parallel_runs_are_byte_identical() {
    let d = tempdir().unwrap();
    let bench = d.path().join("bench");
    small_synth(&bench, "0.5", "3");
    let run = |dir: &str, jobs: &str| {
        let out = d.path().join(dir);
        ok(&[
            "run",
            p(&bench),
            "--method",
            "dyhpo-nocurve",
            "--seeds",
            "0,1,2",
            "--budget-cap",
            "16",
            "--n-init",
            "4",
            "--candidates",
            "12",
            "--jobs",
            jobs,
            "--out",
            p(&out),
        ]);
        (0..3u64)
            .map(|s| fs::read(out.join(trace_file_name(Method::DyhpoNoCurve, s))).unwrap())
            .collect::<Vec<_>>()
    };
    let first = run("a", "1");
    assert_eq!(first, run("b", "1"));
    assert_eq!(first, run("c", "3"));
}

#[test]
fn regret_report_matches_library_and_schema() {
    let d = tempdir().unwrap();
    let bench = d.path().join("bench");
    small_synth(&bench, "0.3", "4");
    let traces = d.path().join("traces");
    ok(&[
        "run",
        p(&bench),
        "--method",
        "rs",
        "--seeds",
        "0..3",
        "--budget-cap",
        "40",
        "--out",
        p(&traces),
    ]);
    ok(&[
        "run",
        p(&bench),
        "--method",
        "hyperband",
        "--seeds",
        "0..3",
        "--budget-cap",
        "40",
        "--out",
        p(&traces),
    ]);
    let glob = format!("{}/*.jsonl", p(&traces));
    let csv = ok(&[
        "report",
        "--metric",
        "regret",
        "--traces",
        &glob,
        "--benchmark",
        p(&bench),
    ]);
    assert!(csv.starts_with("method,dataset,seed,x,metric,value\n"));

    // same rows from the library, traces in sorted file order
    let b = load_benchmark(&bench).unwrap();
    let mut paths: Vec<_> = fs::read_dir(&traces)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    let ts: Vec<_> = paths
        .iter()
        .map(|q| graybox::trace_io::read_trace(q).unwrap())
        .collect();
    let benches = BTreeMap::from([(b.name().to_string(), b)]);
    let rows = report(Metric::Regret, &ts, &benches, &ReportOptions::default()).unwrap();
    let mut direct = Vec::new();
    write_csv(&rows, &mut direct).unwrap();
    assert_eq!(csv, String::from_utf8(direct).unwrap());
    assert_eq!(csv.lines().count(), 1 + 6 * 40);
}

#[test]
fn rank_report_over_two_methods_sums_to_three() {
    let d = tempdir().unwrap();
    let traces = d.path().join("traces");
    let mut args = vec!["report".to_string(), "--metric".into(), "rank".into()];
    for (k, seed) in ["5", "6"].into_iter().enumerate() {
        let bench = d.path().join(format!("bench{k}"));
        small_synth(&bench, "0.3", seed);
        let out = traces.join(seed);
        for m in ["rs", "asha"] {
            ok(&[
                "run",
                p(&bench),
                "--method",
                m,
                "--seeds",
                "0..4",
                "--budget-cap",
                "50",
                "--out",
                p(&out),
            ]);
        }
        args.extend(["--benchmark".into(), p(&bench).to_string()]);
    }
    let glob = format!("{}/*/*.jsonl", p(&traces));
    args.extend(["--traces".into(), glob, "--rank-every".into(), "5".into()]);
    let csv = ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[4], "rank");
        assert_eq!(&rec[2], "");
        *sums.entry(format!("{}@{}", &rec[1], &rec[3])).or_default() +=
            rec[5].parse::<f64>().unwrap();
    }
    // two datasets, grid 5, 10, ..., 50
    assert_eq!(sums.len(), 20);
    for (k, s) in sums {
        assert_eq!(s, 3.0, "{k}");
    }
}

#[test]
fn promotion_report_reproduces_the_fixture() {
    let d = tempdir().unwrap();
    let bench = d.path().join("bench");
    let b = crossing_fixture();
    save_benchmark(&b, &bench).unwrap();
    let t = trace_of(
        &b,
        "manual",
        0,
        &[(0, 2), (1, 2), (2, 2), (3, 2), (4, 2), (5, 2)],
    );
    write_trace(&t, d.path().join("t.jsonl")).unwrap();
    let glob = format!("{}/*.jsonl", p(d.path()));
    let csv = ok(&[
        "report",
        "--metric",
        "promotion",
        "--traces",
        &glob,
        "--benchmark",
        p(&bench),
    ]);
    assert_eq!(
        csv,
        "method,dataset,seed,x,metric,value\nmanual,fixture,0,2.0,promotion,0.5\n"
    );
    let csv = ok(&[
        "report",
        "--metric",
        "precision",
        "--traces",
        &glob,
        "--benchmark",
        p(&bench),
        "--top-fraction",
        "0.01",
    ]);
    assert!(csv.ends_with("manual,fixture,0,1.0,precision,0.16666666666666666\nmanual,fixture,0,2.0,precision,0.16666666666666666\n"), "{csv}");
}

#[test]
fn empty_glob_is_an_error() {
    let d = tempdir().unwrap();
    let bench = d.path().join("bench");
    save_benchmark(&table("t", vec![vec![0.5]]), &bench).unwrap();
    let glob = format!("{}/*.jsonl", p(d.path()));
    let out = graybox(&[
        "report",
        "--metric",
        "regret",
        "--traces",
        &glob,
        "--benchmark",
        p(&bench),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no trace files match"));
}

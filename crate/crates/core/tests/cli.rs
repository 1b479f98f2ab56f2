use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gp_precision::experiment::{parse_rows, relative_spectral_error};
use gp_precision::io::read_matrix;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gp-precision")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run(&["simulate", "--p", "8", "--n", "100", "--seeds", "1,2", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = dir_contents(&a);
    assert_eq!(files, dir_contents(&b));
    let samples: Vec<_> = files.iter().filter(|(n, _)| n.ends_with("samples.txt")).collect();
    assert_eq!(samples.len(), 2);
    assert_ne!(samples[0].1, samples[1].1);
    assert!(files.iter().any(|(n, _)| n.ends_with("omega.txt")));
}

#[test]
fn invalid_field_is_named() {
    let o = run(&["estimate", "--s", "0"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("s:"));
}

#[test]
fn estimate_is_deterministic_and_recomputable() {
    let tmp = tempfile::tempdir().unwrap();
    let mats = tmp.path().join("m");
    let args = ["estimate", "--p", "12,20", "--n", "500", "--seeds", "3,4", "--matrices", mats.to_str().unwrap()];
    let first = run(&args);
    assert!(first.status.success());
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    let rows = parse_rows(&stdout(&first)).unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let id = &row["experiment_id"];
        let (est, _) = read_matrix(&mats.join(format!("{id}-estimate.txt"))).unwrap();
        let (reference, _) = read_matrix(&mats.join(format!("{id}-reference.txt"))).unwrap();
        let emitted: f64 = row["rel_spectral_error"].parse().unwrap();
        assert!((relative_spectral_error(&est, &reference) - emitted).abs() <= 1e-12);
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "p=2\nn=50\nseeds=9\n").unwrap();
    let o = run(&["estimate", "--config", cfg.to_str().unwrap(), "--n", "80"]);
    assert!(o.status.success());
    let rows = parse_rows(&stdout(&o)).unwrap();
    assert_eq!((rows[0]["p_or_m"].as_str(), rows[0]["n"].as_str()), ("2", "80"));
    assert_eq!(rows[0]["path"], "fallback_full_inverse");
}

#[test]
fn scaling_study_single_point_has_no_aggregate() {
    let o = run(&["scaling-study", "--p", "10", "--n", "300"]);
    assert!(o.status.success());
    assert!(!stdout(&o).contains("# aggregate"));
    let o = run(&["scaling-study", "--p", "10", "--n", "300,1200", "--seeds", "1,2"]);
    assert!(stdout(&o).contains("slope_vs_n"));
}

#[test]
fn verify_filters_and_fails_on_negative_control() {
    let o = run(&["verify", "--suite", "screening"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let reports: Vec<_> = text.lines().filter(|l| l.contains(" PASS") || l.contains(" FAIL")).collect();
    assert_eq!(reports.len(), 1);
    assert!(reports[0].starts_with("screening PASS"));

    let o = run(&["verify", "--suite", "symmetry", "--inject-asymmetric"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetry FAIL"));
}

#[test]
fn row_errors_give_nonzero_exit() {
    let o = run(&["estimate", "--p", "10", "--n", "1", "--b", "3"]);
    assert!(!o.status.success());
    let rows = parse_rows(&stdout(&o)).unwrap();
    assert!(!rows[0]["error"].is_empty());
}

#[test]
fn bench_records_times() {
    let o = run(&["bench", "--p", "16", "--n", "400"]);
    assert!(o.status.success());
    let rows = parse_rows(&stdout(&o)).unwrap();
    assert!(rows[0]["wall_ms"].parse::<f64>().unwrap() >= 0.0);
}

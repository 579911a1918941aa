//! Black-box tests of the `hmde` binary: validation messages, dump/validate
//! round trips, and byte-level determinism of the outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hmde(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmde"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) {
    fs::write(dir.join(name), contents).unwrap();
}

#[test]
fn catalog_lists_builtin_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hmde(&["catalog"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["example_3x", "impulsive_linear", "example_4x_sap"] {
        assert!(text.contains(id), "catalog output missing {id}");
    }
}

#[test]
fn validate_reports_unknown_kind_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "kind = \"foo\"\ncatalog = \"example_3x\"\n");
    let out = hmde(&["validate", "bad.toml"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("kind"), "stderr: {err}");
    assert!(err.contains("foo"), "stderr: {err}");
}

#[test]
fn validate_rejects_impulse_time_outside_span() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "bad.toml",
        "kind = \"impulsive\"\ncatalog = \"impulsive_linear\"\n[params]\nimpulse_times = [0.5, 2.0]\n",
    );
    let out = hmde(&["validate", "bad.toml"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("impulse_times"), "stderr: {err}");
}

#[test]
fn run_exits_nonzero_on_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "kind = \"solve\"\n");
    let out = hmde(&["run", "bad.toml"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn dump_config_round_trips_through_validate() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.toml",
        "kind = \"sap\"\ncatalog = \"example_4x_sap\"\nseed = 3\n[params]\nhorizon = 16.0\n",
    );
    let out = hmde(
        &["run", "s.toml", "--dump-config", "--seed", "11", "--grid-step", "0.25", "--tol", "1e-7"],
        tmp.path(),
    );
    assert!(out.status.success());
    let dumped = String::from_utf8(out.stdout).unwrap();
    // The dump reflects the applied overrides and fills every default.
    assert!(dumped.contains("seed = 11"), "{dumped}");
    assert!(dumped.contains("windows = 8"), "{dumped}");
    let normalized = hmde_cli::validate_config(&dumped).unwrap();
    assert_eq!(normalized.grid.step, Some(0.25));
    assert_eq!(normalized.tolerances.sweep, Some(1e-7));
    write(tmp.path(), "dumped.toml", &dumped);
    let out2 = hmde(&["run", "dumped.toml", "--dump-config"], tmp.path());
    assert!(out2.status.success());
    let dumped2 = String::from_utf8(out2.stdout).unwrap();
    assert_eq!(dumped, dumped2, "dump of a dump must be identical");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.toml",
        "kind = \"dependence\"\ncatalog = \"dependence_initial\"\nseed = 42\n\
         [params]\nk_max = 6\n",
    );
    for dir in ["a", "b"] {
        let out = hmde(&["run", "s.toml", "--out-dir", dir], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["dependence.csv", "report.txt"] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // CSV basics: header row, LF endings, UTF-8.
    let csv = fs::read_to_string(tmp.path().join("a/dependence.csv")).unwrap();
    assert!(csv.starts_with("k,gap,solved_flag\n"));
    assert!(!csv.contains('\r'));
}

fn column(csv: &str, index: usize) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .map(|line| line.split(',').nth(index).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn impulsive_run_matches_its_oracle_column() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.toml",
        "kind = \"impulsive\"\ncatalog = \"impulsive_linear\"\n[grid]\nstep = 0.005\n",
    );
    let out = hmde(&["run", "s.toml", "--out-dir", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let solution = fs::read_to_string(tmp.path().join("o/solution.csv")).unwrap();
    let oracle = fs::read_to_string(tmp.path().join("o/oracle.csv")).unwrap();
    let xs = column(&solution, 1);
    let refs = column(&oracle, 1);
    assert_eq!(xs.len(), refs.len());
    let sup = xs
        .iter()
        .zip(&refs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(sup <= 1e-3, "sup gap to the oracle column {sup}");
}

#[test]
fn sap_run_reports_a_vanishing_tail() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.toml",
        "kind = \"sap\"\ncatalog = \"example_4x_sap\"\n[params]\ntol = 0.1\n",
    );
    let out = hmde(&["run", "s.toml", "--out-dir", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let profile = fs::read_to_string(tmp.path().join("o/profile.csv")).unwrap();
    assert!(profile.starts_with("t,gap\n"));
    let gaps = column(&profile, 1);
    // Tail column vanishes: the last entries sit far below the first.
    assert!(gaps.last().unwrap() < &(0.01 * gaps[0]));
    let report = fs::read_to_string(tmp.path().join("o/report.txt")).unwrap();
    assert!(report.contains("classification: S-asymptotically periodic"), "{report}");
}

#[test]
fn failed_runs_record_the_error_in_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    // An enormous rate makes the per-node corrector diverge at this step.
    write(
        tmp.path(),
        "s.toml",
        "kind = \"impulsive\"\ncatalog = \"impulsive_linear\"\n[params]\nlambda = 1e6\n",
    );
    let out = hmde(&["run", "s.toml", "--out-dir", "o"], tmp.path());
    assert!(!out.status.success());
    let report = fs::read_to_string(tmp.path().join("o/report.txt")).unwrap();
    assert!(report.contains("error:"), "{report}");
}

#[test]
fn solve_run_writes_solution_schema() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.toml",
        "kind = \"solve\"\ncatalog = \"example_3x\"\n[grid]\nstep = 0.01\n",
    );
    let out = hmde(&["run", "s.toml", "--out-dir", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("solution.csv"));
    assert!(stdout.contains("report.txt"));
    let csv = fs::read_to_string(tmp.path().join("o/solution.csv")).unwrap();
    assert!(csv.starts_with("t,x_1,left_1,right_1\n"));
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 101);
}

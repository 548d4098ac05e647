mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{gaussian, orthonormal};
use sarrs::cli::matrix_to_csv;
use sarrs::DenseMatrix;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/noiseless");

fn sarrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sarrs")).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(name: &str) -> String {
    Path::new(FIXTURE).join(name).display().to_string()
}

fn read_csv(path: &Path) -> DenseMatrix {
    let rows: Vec<Vec<f64>> = fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    DenseMatrix::from_rows(&rows).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn fit_recovers_noiseless_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let res = sarrs(&["fit", "--x", &fixture("x.csv"), "--y", &fixture("y.csv"), "--out", &path_str(&out), "--lambda", "1e-8", "--rank", "2"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let a_hat = read_csv(&out);
    let truth = read_csv(Path::new(&fixture("a_true.csv")));
    assert!(a_hat.max_abs_diff(&truth) < 1e-5);

    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(side["gpls_invocations"], 2);
    assert_eq!(side["rank_used"], 2);
    assert_eq!(side["lambda"], 1e-8);
    assert_eq!(side["lambda_source"], "flag");
    assert!(side.get("timings").is_none());
}

#[test]
fn unpenalized_full_rank_fit_on_orthonormal_design_is_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let x = orthonormal(6, 6, 1);
    let y = gaussian(6, 3, 2);
    let xs = write(dir.path(), "x.csv", &matrix_to_csv(&x));
    let ys = write(dir.path(), "y.csv", &matrix_to_csv(&y));
    let out = dir.path().join("a.csv");
    let res = sarrs(&["fit", "--x", &xs, "--y", &ys, "--out", &path_str(&out), "--lambda", "0", "--rank", "full", "--sigma", "1"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let ols = x.transpose().matmul(&y).unwrap();
    assert!(read_csv(&out).max_abs_diff(&ols) < 1e-6);
}

#[test]
fn json_format_embeds_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let res = sarrs(&[
        "fit", "--x", &fixture("x.csv"), "--y", &fixture("y.csv"), "--out", &path_str(&out),
        "--lambda", "1e-8", "--rank", "2", "--format", "json", "--record-timings",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["a_hat"].as_array().unwrap().len(), 10);
    assert!(v["timings"].is_object());
}

#[test]
fn missing_response_file_is_a_user_error() {
    let res = sarrs(&["fit", "--x", &fixture("x.csv"), "--y", "/nonexistent/y.csv", "--out", "/tmp/never.csv"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("/nonexistent/y.csv"));
}

#[test]
fn malformed_csv_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let ys = fixture("y.csv");
    let out = path_str(&dir.path().join("a.csv"));

    let ragged = write(dir.path(), "ragged.csv", "1,2,3\n4,5\n");
    let res = sarrs(&["fit", "--x", &ragged, "--y", &ys, "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("line 2"), "{}", stderr(&res));

    let bad = write(dir.path(), "bad.csv", "1,2\n3,oops\n");
    let res = sarrs(&["fit", "--x", &bad, "--y", &ys, "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
    let msg = stderr(&res);
    assert!(msg.contains("line 2") && msg.contains("column 2") && msg.contains("oops"), "{msg}");

    let nan = write(dir.path(), "nan.csv", "1,NaN\n");
    assert_eq!(sarrs(&["fit", "--x", &nan, "--y", &ys, "--out", &out]).status.code(), Some(2));
}

#[test]
fn header_row_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let x = orthonormal(4, 4, 5);
    let y = gaussian(4, 2, 6);
    let xs = write(dir.path(), "x.csv", &format!("a,b,c,d\n{}", matrix_to_csv(&x)));
    let ys = write(dir.path(), "y.csv", &format!("u,v\n{}", matrix_to_csv(&y)));
    let out = dir.path().join("a.csv");
    let res = sarrs(&["fit", "--x", &xs, "--y", &ys, "--out", &path_str(&out), "--lambda", "0", "--rank", "full", "--sigma", "1"]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(read_csv(&out).shape(), (4, 2));
}

#[test]
fn row_count_mismatch_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let ys = write(dir.path(), "y.csv", &matrix_to_csv(&gaussian(7, 6, 1)));
    let res = sarrs(&["fit", "--x", &fixture("x.csv"), "--y", &ys, "--out", &path_str(&dir.path().join("a.csv"))]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("row count mismatch"));
}

#[test]
fn penalizing_everything_away_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let res = sarrs(&[
        "fit", "--x", &fixture("x.csv"), "--y", &fixture("y.csv"), "--out", &path_str(&dir.path().join("a.csv")),
        "--lambda", "1e12", "--rank", "2",
    ]);
    assert_eq!(res.status.code(), Some(3), "{}", stderr(&res));
    assert!(stderr(&res).contains("lambda"));
}

#[test]
fn invalid_arguments_exit_with_user_code() {
    let res = sarrs(&["fit", "--x", &fixture("x.csv"), "--y", &fixture("y.csv"), "--out", "/tmp/x.csv", "--lambda", "-1"]);
    assert_eq!(res.status.code(), Some(2));
    let res = sarrs(&["fit", "--x", &fixture("x.csv"), "--y", &fixture("y.csv"), "--out", "/tmp/x.csv", "--rank", "0"]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(sarrs(&["frobnicate"]).status.code(), Some(2));
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--preset", "paper-high-dim", "--seed", "4", "--out"];
    let d = path_str(dir);
    args.push(&d);
    args.extend_from_slice(extra);
    sarrs(&args)
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(simulate(a.path(), &[]).status.success());
    assert!(simulate(b.path(), &[]).status.success());
    for f in ["x.csv", "y.csv", "a_true.csv", "meta.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(read_csv(&a.path().join("x.csv")).shape(), (30, 100));
}

#[test]
fn simulate_records_scenario_in_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let res = simulate(dir.path(), &["--rho", "0", "--b", "0.75"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["covariance"], "identity");
    assert_eq!(meta["rho"], 0.0);
    assert_eq!(meta["b"], 0.75);
    assert_eq!(meta["seed"], 4);
    assert_eq!((meta["n"].as_u64(), meta["p"].as_u64(), meta["m"].as_u64()), (Some(30), Some(100), Some(10)));
}

#[test]
fn simulate_rejects_invalid_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let res = simulate(dir.path(), &["--s", "200"]);
    assert_eq!(res.status.code(), Some(2));
    let res = simulate(dir.path(), &["--rho", "1.5"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn benchmark_rejects_empty_or_malformed_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(&dir.path().join("out"));
    let empty = write(dir.path(), "empty.json", r#"{"scenarios": []}"#);
    let res = sarrs(&["benchmark", "--config", &empty, "--out", &out]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
    let broken = write(dir.path(), "broken.json", "{ not json");
    let res = sarrs(&["benchmark", "--config", &broken, "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("broken.json"));
}

fn smoke(dir: &Path) -> PathBuf {
    let res = sarrs(&["benchmark", "--preset", "smoke", "--seed", "5", "--out", &path_str(dir)]);
    assert!(res.status.success(), "{}", stderr(&res));
    dir.join("benchmark.csv")
}

#[test]
fn smoke_benchmark_is_fast_and_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let start = std::time::Instant::now();
    let first = fs::read_to_string(smoke(a.path())).unwrap();
    assert!(start.elapsed().as_secs() < 60);
    let second = fs::read_to_string(smoke(b.path())).unwrap();
    assert_eq!(first, second);
    assert!(first.lines().count() > 1);
}

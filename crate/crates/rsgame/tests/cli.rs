use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

fn rsgame(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsgame")).args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn zero_cost_values_are_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("zero_cost");
    let o = rsgame(&["solve-discounted", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(tmp.path().join("solve-discounted/values_p1.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["theta", "x1", "value"]);
    let mut rows = 0;
    for rec in r.records() {
        let v: f64 = rec.unwrap()[2].parse().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 51 * 81);
}

#[test]
fn bundled_certificate_checks_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("stable_tanh");
    let o = rsgame(&["check", cfg.to_str().unwrap()], tmp.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert!(stdout.contains("drift_condition        PASS"), "{stdout}");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("check/report.json")).unwrap()).unwrap();
    let margin = report["results"]["certificate"]["drift_condition"]["margin"]["value"].as_f64().unwrap();
    assert!(margin >= 0.05);
}

#[test]
fn config_errors_exit_with_two_and_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("zero_cost")).unwrap().replace("n_theta = 50", "n_theta = \"many\"");
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, text).unwrap();
    let o = rsgame(&["nash", bad.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 25") && err.contains("n_theta"), "{err}");

    let missing = tmp.path().join("missing.toml");
    assert_eq!(code(&rsgame(&["check", missing.to_str().unwrap()], tmp.path())), 2);
    let cfg = config("zero_cost");
    assert_eq!(code(&rsgame(&["nash", cfg.to_str().unwrap(), "--theta", "5"], tmp.path())), 2);
}

#[test]
fn non_convergence_exits_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("stable_tanh");
    let o = rsgame(&["nash", cfg.to_str().unwrap(), "--max-iter", "2", "--n-theta", "100"], tmp.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("nash/report.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["converged"], false);
    assert_eq!(report["status"], "NotConverged");
}

#[test]
fn numerical_failures_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    // 81 nodes is too many for the exhaustive chain oracles.
    let cfg = config("zero_cost");
    let o = rsgame(&["oracle", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("chain extraction"));
}

#[test]
fn crosscheck_matrix_is_green_on_the_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("chain5");
    let o = rsgame(&["crosscheck", cfg.to_str().unwrap(), "--mc-paths", "20000"], tmp.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 5, "{stdout}");
}

#[test]
fn flags_override_config_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("zero_cost");
    let o = rsgame(&["solve-ergodic", cfg.to_str().unwrap(), "--theta", "0.25", "--player", "2", "--dx", "0.2"], tmp.path());
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("solve-ergodic/report.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["solution"]["theta"], 0.25);
    assert_eq!(report["results"]["solution"]["player"], 2);
    assert_eq!(report["grid"]["nodes"], 41);
    let psi = std::fs::read_to_string(tmp.path().join("solve-ergodic/ergodic_p2.csv")).unwrap();
    assert!(psi.starts_with("x1,psi\n"));
    assert_eq!(psi.lines().count(), 42);
}

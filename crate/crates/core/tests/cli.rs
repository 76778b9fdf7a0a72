use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-policy"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn simulated_csv(dir: &Path) -> String {
    let out = run(
        &["simulate", "--reps", "1", "--n", "120", "--test-n", "200", "--iters", "20", "--restarts", "1", "--gamma", "1,1.5", "--output-dir", "sim"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("sim/data_rep000.csv").to_string_lossy().into_owned()
}

#[test]
fn fit_at_unit_gamma_never_reports_positive_regret() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulated_csv(dir.path());
    let out = run(
        &["fit", "--input", &csv, "--propensity-col", "e_hat", "--gamma", "1", "--iters", "50", "--restarts", "2", "--output-dir", "fit"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("fit/fit.json")).unwrap()).unwrap();
    assert!(fit["objective"].as_f64().unwrap() <= 0.0);
    assert!(dir.path().join("fit/policy.json").exists());
}

#[test]
fn calibrate_writes_monotone_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulated_csv(dir.path());
    let out = run(
        &["calibrate", "--input", &csv, "--propensity-col", "e_hat", "--gamma", "1,1.2,1.5", "--iters", "50", "--restarts", "2", "--output-dir", "cal"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("cal/calibration.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().len(), 4);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row.windows(2).all(|w| w[0] <= w[1]), "{row:?}");
    }
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fit", "--input", "missing.csv", "--gamma", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:") && stderr.trim_end().lines().count() == 1, "{stderr}");

    let out = run(&["fit", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vinerisk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vinerisk"))
        .args(args)
        .current_dir(dir)
        .env_remove("VINERISK_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = vinerisk(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn config(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/run_config.json")).unwrap()).unwrap()
}

fn simulated() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--seed", "3", "--out", "out"]);
    dir
}

#[test]
fn fit_writes_model_sets_and_analytics() {
    let dir = simulated();
    let d = dir.path();
    ok(d, &["fit", "--input", "out/synthetic.csv", "--out", "out"]);
    for year in 2000..2005 {
        assert!(d.join(format!("out/models/modelset_{year}.json")).exists());
    }
    for f in ["orders", "ranks", "optimal_order", "family_counts", "tau_series"] {
        assert!(d.join(format!("out/analytics/{f}.csv")).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["years_fitted"].as_array().unwrap().len(), 5);
    assert_eq!(report["n_skipped"], 0);
    assert_eq!(report["copulas"]["yvine"], 21);
    let orders = fs::read_to_string(d.join("out/analytics/orders.csv")).unwrap();
    assert_eq!(orders.lines().count(), 1 + 5 * 3 * 5);
}

#[test]
fn fit_restricted_to_a_year_range() {
    let dir = simulated();
    let d = dir.path();
    ok(d, &["fit", "--input", "out/synthetic.csv", "--out", "out", "--years", "2001:2002", "--max-p", "2"]);
    let models: Vec<_> = fs::read_dir(d.join("out/models")).unwrap().collect();
    assert_eq!(models.len(), 2);
    let out = vinerisk(d, &["fit", "--input", "out/synthetic.csv", "--out", "out", "--years", "1990:1991"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn empty_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "year,cell_id,lat,lon,frost,drought,x1\n").unwrap();
    let out = vinerisk(dir.path(), &["fit", "--input", "empty.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no records"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        vec!["fit", "--bogus"],
        vec!["fit", "--years", "2020:1990", "--input", "x.csv"],
        vec!["fit", "--families", "gaussian,student"],
        vec!["fit"],
        vec!["risk", "--input", "x.csv", "--flag-quantile", "2"],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(&vinerisk(d, &args)), 1, "{args:?}");
    }
    assert_eq!(code(&vinerisk(d, &["--help"])), 0);
}

#[test]
fn missing_input_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&vinerisk(dir.path(), &["fit", "--input", "nope.csv"])), 2);
}

#[test]
fn risk_without_models_names_the_year() {
    let dir = simulated();
    let out = vinerisk(dir.path(), &["risk", "--input", "out/synthetic.csv", "--out", "out"]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("year 2000") && msg.contains("dvine_frost"), "{msg}");
}

#[test]
fn independence_pipeline_gives_constant_surfaces() {
    let dir = simulated();
    let d = dir.path();
    ok(d, &["fit", "--input", "out/synthetic.csv", "--out", "out", "--years", "2000", "--max-p", "0"]);
    ok(d, &["risk", "--input", "out/synthetic.csv", "--out", "out", "--years", "2000"]);
    let text = fs::read_to_string(d.join("out/surfaces/risk_2000.csv")).unwrap();
    for kind in ["frost", "drought", "joint"] {
        let probs: Vec<&str> = text
            .lines()
            .skip(1)
            .filter(|l| l.ends_with(&format!(",{kind}")))
            .map(|l| l.split(',').nth(4).unwrap())
            .collect();
        assert_eq!(probs.len(), 100);
        assert!(probs.iter().all(|p| *p == probs[0]), "{kind}");
    }
    let flags = fs::read_to_string(d.join("out/extreme_years.csv")).unwrap();
    assert_eq!(flags.lines().next(), Some("year,kind,flagged"));
    assert_eq!(flags.lines().count(), 4);
}

#[test]
fn survival_over_a_missing_year_fails() {
    let dir = simulated();
    let d = dir.path();
    ok(d, &["fit", "--input", "out/synthetic.csv", "--out", "out", "--years", "2000:2001", "--max-p", "1"]);
    ok(d, &["risk", "--input", "out/synthetic.csv", "--out", "out", "--years", "2000:2001"]);
    ok(d, &["survival", "--out", "out"]);
    let rows = fs::read_to_string(d.join("out/survival/survival_joint.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 100 * 2);
    let out = vinerisk(d, &["survival", "--out", "out", "--years", "2000:2003"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("2002"), "{}", stderr(&out));
}

#[test]
fn eda_writes_matrices_and_series() {
    let dir = simulated();
    let d = dir.path();
    ok(d, &["eda", "--input", "out/synthetic.csv", "--out", "out"]);
    let series = fs::read_to_string(d.join("out/eda/tau_series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 5);
    let m = fs::read_to_string(d.join("out/eda/tau_matrix_2003.csv")).unwrap();
    let header: Vec<&str> = m.lines().next().unwrap().split(',').collect();
    assert_eq!(header, ["", "frost", "drought", "lat", "lon", "x1", "x2", "x3", "x4"]);
}

#[test]
fn eda_duplicate_column_has_unit_tau() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("year,cell_id,lat,lon,frost,drought,copy\n");
    for i in 0..60u32 {
        let f = ((i * 37) % 61) as f64 / 7.0;
        let dr = ((i * 13) % 59) as f64;
        csv.push_str(&format!("2001,{i},{},{},{f},{dr},{f}\n", 47.0 + i as f64 * 0.01, 11.0 - i as f64 * 0.02));
    }
    fs::write(dir.path().join("d.csv"), csv).unwrap();
    ok(dir.path(), &["eda", "--input", "d.csv"]);
    let m = fs::read_to_string(dir.path().join("out/eda/tau_matrix_2001.csv")).unwrap();
    let frost_row: Vec<&str> = m.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(frost_row[0], "frost");
    assert_eq!(frost_row[5].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn config_file_and_flags_are_layered() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), "y_f = -1.0\ny_d = -1.0\nseed = 9\ngrid = \"6x9\"\n").unwrap();
    ok(d, &["simulate", "--config", "run.toml", "--yd", "-0.5"]);
    let cfg = config(d);
    assert_eq!(cfg["y_f"], -1.0);
    assert_eq!(cfg["y_d"], -0.5);
    assert_eq!(cfg["seed"], 9);
    assert_eq!(cfg["flag_quantile"], 0.95);
    let records = fs::read_to_string(d.join("out/synthetic.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 6 * 9 * 5);

    fs::write(d.join("bad.toml"), "yf = 1\n").unwrap();
    assert_eq!(code(&vinerisk(d, &["simulate", "--config", "bad.toml"])), 1);
}

#[test]
fn thread_count_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_vinerisk"))
        .args(["simulate"])
        .current_dir(d)
        .env("VINERISK_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(config(d)["threads"], 2);
    ok(d, &["simulate", "--threads", "1"]);
    assert_eq!(config(d)["threads"], 1);
}

#[test]
fn simulate_is_deterministic() {
    let a = simulated();
    let b = simulated();
    for f in ["out/synthetic.csv", "out/generating_model.json", "out/run_config.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

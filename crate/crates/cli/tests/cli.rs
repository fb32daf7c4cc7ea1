use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hyperu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperu")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = hyperu(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate(dir: &Path, name: &str, args: &[&str]) -> Value {
    let mut all = vec!["simulate", "-o", name];
    all.extend_from_slice(args);
    ok(dir, &all);
    json(&dir.join(name).with_extension("json"))
}

#[test]
fn poisson_simulation_count_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let meta = simulate(dir.path(), "p.csv", &["--variant", "poisson", "--half-width", "25", "--seed", "9"]);
    let n = meta["n_points"].as_u64().unwrap() as f64;
    // mean 2500, sd 50
    assert!((n - 2500.0).abs() < 250.0, "{n}");
    assert_eq!(meta["spec"]["variant"], "poisson");
    assert_eq!(meta["spec"]["seed"], 9);
    assert_eq!(meta["schema_version"], 1);
    let rows = fs::read_to_string(dir.path().join("p.csv")).unwrap().lines().count();
    assert_eq!(rows as f64, n + 1.0);
}

#[test]
fn simulation_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        simulate(dir.path(), name, &["--variant", "cloaked", "--alpha", "1", "--sigma", "0.25", "--half-width", "12", "--seed", "4"]);
    }
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn cloaked_lattice_has_expected_count() {
    let dir = tempfile::tempdir().unwrap();
    let meta = simulate(dir.path(), "c.csv", &["--variant", "cloaked", "--alpha", "1", "--sigma", "0.25", "--half-width", "40"]);
    let n = meta["n_points"].as_u64().unwrap() as f64;
    assert!((n - 6400.0).abs() < 200.0, "{n}");
}

#[test]
fn cloaked_lattice_needs_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = hyperu(dir.path(), &["simulate", "--variant", "cloaked", "--half-width", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_row_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "x,y\n# note\n1,2\n3,oops\n").unwrap();
    let out = hyperu(dir.path(), &["estimate", "-i", "bad.csv", "--half-width", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn wrong_arity_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "1,2,3\n").unwrap();
    let out = hyperu(dir.path(), &["estimate", "-i", "bad.csv", "--half-width", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_pattern_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e.csv"), "# nothing here\nx,y\n").unwrap();
    let out = hyperu(dir.path(), &["estimate", "-i", "e.csv", "--half-width", "10"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn points_outside_window_are_rejected_or_dropped() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "p.csv", &["--variant", "poisson", "--half-width", "20", "--seed", "2"]);
    let out = hyperu(dir.path(), &["estimate", "-i", "p.csv", "--half-width", "15"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ok(dir.path(), &["estimate", "-i", "p.csv", "--half-width", "15", "--drop-outside"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["n_points"].as_u64().unwrap() < 1000);
}

#[test]
fn rsa_estimate_is_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "r.csv", &["--variant", "rsa", "--half-width", "70", "--seed", "1"]);
    ok(dir.path(), &["estimate", "-i", "r.csv", "--half-width", "70", "-o", "r_est.json"]);
    let v = json(&dir.path().join("r_est.json"));
    let a = v["alpha_hat"].as_f64().unwrap();
    assert!((-0.2..=0.2).contains(&a), "{a}");
    for key in ["ci", "lambda_hat", "R", "j_min", "j_max", "n_points", "curve_path", "config_echo"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["schema_version"], 1);
    let curve = fs::read_to_string(dir.path().join(v["curve_path"].as_str().unwrap())).unwrap();
    assert!(curve.starts_with("j,C\n"));
}

#[test]
fn class_three_input_has_large_exponent() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "g.csv", &["--variant", "cloaked", "--alpha", "2", "--sigma", "0.25", "--half-width", "30", "--seed", "5"]);
    let out = ok(dir.path(), &["estimate", "-i", "g.csv", "--half-width", "30"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let a = v["alpha_hat"].as_f64().unwrap();
    assert!(a > 1.3, "{a}");
}

#[test]
fn estimate_is_unit_free_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "p.csv", &["--variant", "poisson", "--half-width", "15", "--seed", "3"]);
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let scaled: String = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| (v.parse::<f64>().unwrap() * 3.7).to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(dir.path().join("q.csv"), scaled).unwrap();
    let run = |file: &str, r: &str| {
        let out = ok(dir.path(), &["estimate", "-i", file, "--half-width", r]);
        (String::from_utf8(out.stdout).unwrap(), out.stderr)
    };
    let (a, _) = run("p.csv", "15");
    let (b, _) = run("q.csv", "55.5");
    let (a2, _) = run("p.csv", "15");
    assert_eq!(a, a2);
    let alpha = |s: &str| serde_json::from_str::<Value>(s).unwrap()["alpha_hat"].as_f64().unwrap();
    assert!((alpha(&a) - alpha(&b)).abs() < 1e-9);
}

#[test]
fn bounding_cube_fallback_warns() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "p.csv", &["--variant", "poisson", "--half-width", "12", "--seed", "8"]);
    let out = ok(dir.path(), &["estimate", "-i", "p.csv", "--jmin", "0.3", "--jmax", "0.7"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bounding cube"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = v["R"].as_f64().unwrap();
    assert!(r > 11.0 && r <= 12.0, "{r}");
}

#[test]
fn explicit_scale_range_and_interval() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "p.csv", &["--variant", "poisson", "--half-width", "15", "--seed", "6"]);
    let out = ok(
        dir.path(),
        &["estimate", "-i", "p.csv", "--half-width", "15", "--jmin", "0.3", "--jmax", "0.8", "--nscales", "20", "--ci-level", "0.9", "--ci-draws", "2000"],
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["j_min"], 0.3);
    assert_eq!(v["n_scales"], 20);
    let ci = &v["ci"];
    assert_eq!(ci["level"].as_f64().unwrap(), 0.9);
    assert!(ci["lo"].as_f64().unwrap() < ci["hi"].as_f64().unwrap());
    assert_eq!(ci["n_tapers"], 12);
}

#[test]
fn frames_report_pooled_mean() {
    let dir = tempfile::tempdir().unwrap();
    for (k, name) in ["f1.csv", "f2.csv"].iter().enumerate() {
        simulate(dir.path(), name, &["--variant", "poisson", "--half-width", "12", "--seed", &k.to_string()]);
    }
    ok(dir.path(), &["estimate", "-i", "f*.csv", "--half-width", "12", "-o", "frames.json"]);
    let v = json(&dir.path().join("frames.json"));
    assert_eq!(v["n_frames"], 2);
    let frames = v["frames"].as_array().unwrap();
    let mean = frames.iter().map(|f| f["alpha_hat"].as_f64().unwrap()).sum::<f64>() / 2.0;
    assert!((v["alpha_hat"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert!(dir.path().join("frames.curve.csv").exists());
}

#[test]
fn curve_rows_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "p.csv", &["--variant", "poisson", "--half-width", "20", "--seed", "1"]);
    let args = ["curve", "-i", "p.csv", "--half-width", "20", "--poisson-reference", "10", "--seed", "2"];
    let a = ok(dir.path(), &args).stdout;
    let b = ok(dir.path(), &args).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,C,C_poisson"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 120);
    // least-squares slope of the reference on mid scales is close to d = 2
    let mid: Vec<&Vec<f64>> = rows.iter().filter(|r| (0.5..=0.9).contains(&r[0])).collect();
    let n = mid.len() as f64;
    let (mj, mc) = (mid.iter().map(|r| r[0]).sum::<f64>() / n, mid.iter().map(|r| r[2]).sum::<f64>() / n);
    let slope = mid.iter().map(|r| (r[0] - mj) * (r[2] - mc)).sum::<f64>() / mid.iter().map(|r| (r[0] - mj).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() < 0.25, "{slope}");
}

#[test]
fn coverage_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "coverage", "--variant", "poisson", "--half-width", "12", "--true-alpha", "0", "--replicates", "4", "--ci-draws", "1000",
        "--nscales", "10", "--pilots", "2", "-o", "cov.json",
    ];
    ok(dir.path(), &args);
    let v = json(&dir.path().join("cov.json"));
    let c = v["coverage"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&c));
    assert_eq!(v["intervals"].as_array().unwrap().len(), 4);
    let out = hyperu(dir.path(), &["coverage", "--variant", "poisson", "--half-width", "12", "--true-alpha", "0", "--replicates", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

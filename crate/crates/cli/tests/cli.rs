use std::path::Path;
use std::process::{Command, Output};

use cnls_cli::io::{read_json, GroundStateRecord};

fn cnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnls")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SINGLE: &str = r#"
[grid]
n = 1024
length = 80.0

[coupling]
a = [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]
p = 2.0

[masses]
r = 4.0
s = 0.0
t = 0.0
"#;

const TRIPLE: &str = r#"
[grid]
n = 1024
length = 40.0

[coupling]
a = [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]
p = 2.0

[masses]
r = 1.3333333333333333
s = 1.3333333333333333
t = 1.3333333333333333
"#;

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn solve_single_component_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SINGLE);
    let out_dir = dir.path().join("a");
    let out = cnls(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rec: GroundStateRecord = read_json(&out_dir.join("groundstate.json")).unwrap();
    assert!((rec.lambda + 4.0 / 3.0).abs() < 1e-5 * 4.0 / 3.0);
    assert!((rec.omega[0] - 1.0).abs() < 1e-6);
    assert_eq!(rec.omega[1], 0.0);
    assert_eq!(rec.grid.n, 1024);
    assert_eq!(rec.coupling.p, 2.0);
    let profile = std::fs::read_to_string(out_dir.join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1025);
    assert!(profile.starts_with("x,re_u1,im_u1,re_u2,im_u2,re_u3,im_u3\n"));
    assert!(out_dir.join("metadata.json").exists());

    // Same config and seed give byte-identical results.
    let again = dir.path().join("b");
    assert_eq!(code(&cnls(&["solve", "--config", &cfg, "--out", again.to_str().unwrap(), "--quiet"])), 0);
    for file in ["groundstate.json", "profile.csv"] {
        assert_eq!(std::fs::read(out_dir.join(file)).unwrap(), std::fs::read(again.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn invalid_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SINGLE.replace("p = 2.0", "p = 3.5"));
    let out = cnls(&["solve", "--config", &cfg, "--quiet"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("coupling.p"));
}

#[test]
fn unknown_key_and_missing_init_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SINGLE}\n[solver]\nrefin = false\n"));
    let out = cnls(&["solve", "--config", &cfg, "--quiet"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("refin"));

    let cfg = write_config(dir.path(), &format!("{SINGLE}\n[solver]\ninit = \"file\"\ninit_file = \"nowhere.csv\"\n"));
    let out = cnls(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.csv"));
}

#[test]
fn non_convergence_exits_two_with_last_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{TRIPLE}\n[solver]\nmax_iters = 3\n"));
    let out = cnls(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 2);
    let rec: GroundStateRecord = read_json(&dir.path().join("groundstate.json")).unwrap();
    assert_eq!(rec.iterations, 3);
}

#[test]
fn solve_then_evolve_conserves() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{TRIPLE}\n[evolution]\nT = 1.0\ndt = 1e-3\nsnapshot_every = 500\n");
    let cfg = write_config(dir.path(), &body);
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&cnls(&["solve", "--config", &cfg, "--out", d, "--quiet"])), 0);
    let profile = dir.path().join("profile.csv");
    let evolved = dir.path().join("ev");
    let out = cnls(&["evolve", "--config", &cfg, "--input", profile.to_str().unwrap(), "--out", evolved.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(evolved.join("trace.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["t", "energy_drift", "mass_drift_u1", "mass_drift_u2", "mass_drift_u3"]);
    let rows: Vec<[f64; 5]> = r.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1001);
    let last = rows.last().unwrap();
    assert!((last[0] - 1.0).abs() < 1e-12);
    assert!(last[1] <= 1e-8);
    assert!(evolved.join("snapshot_0002.csv").exists());

    // Zero duration gives a single row of zero drifts.
    let cfg0 = write_config(dir.path(), &body.replace("T = 1.0", "T = 0.0"));
    let zero = dir.path().join("zero");
    assert_eq!(code(&cnls(&["evolve", "--config", &cfg0, "--input", profile.to_str().unwrap(), "--out", zero.to_str().unwrap(), "--quiet"])), 0);
    let text = std::fs::read_to_string(zero.join("trace.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0.0,0.0,0.0,0.0,0.0"));

    // A profile from another grid is rejected.
    let other = write_config(dir.path(), &body.replace("n = 1024", "n = 512"));
    assert_eq!(code(&cnls(&["evolve", "--config", &other, "--input", profile.to_str().unwrap(), "--quiet"])), 1);
}

#[test]
fn blow_up_exits_three_and_keeps_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
[grid]
n = 64
length = 20.0

[coupling]
a = [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]
p = 2.9

[evolution]
T = 0.1
dt = 0.01
"#;
    let cfg = write_config(dir.path(), body);
    let mut text = String::from("x,re_u1,im_u1,re_u2,im_u2,re_u3,im_u3\n");
    for m in 0..64 {
        let x = -10.0 + m as f64 * 20.0 / 64.0;
        let v = 1e200 * (-x * x as f64).exp();
        text.push_str(&format!("{x},{v},0,{v},0,{v},0\n"));
    }
    let input = dir.path().join("huge.csv");
    std::fs::write(&input, text).unwrap();
    let out = cnls(&["evolve", "--config", &cfg, "--input", input.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 3);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.lines().count() >= 2);
}

#[test]
fn subadd_two_plus_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SINGLE}\n[subadd]\nsplits = [[[2.0, 0.0, 0.0], [2.0, 0.0, 0.0]]]\n"));
    let out = cnls(&["subadd", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(dir.path().join("margins.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let margin_col = headers.iter().position(|h| h == "margin").unwrap();
    let verdict_col = headers.iter().position(|h| h == "verdict").unwrap();
    let row = r.records().next().unwrap().unwrap();
    let margin: f64 = row[margin_col].parse().unwrap();
    assert!((margin + 1.0).abs() < 2e-4, "{margin}");
    assert_eq!(&row[verdict_col], "strict");
}

#[test]
fn stability_preset_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{TRIPLE}\n[stability]\nkind = \"random_h1\"\ndelta = 1e-3\nseeds = [1, 2]\nT = 2.0\ndt = 1e-3\n");
    let cfg = write_config(dir.path(), &body);
    let out = cnls(&["stability", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = read_json(&dir.path().join("summary.json")).unwrap();
    assert_eq!(summary["all_bounded"], true);
    for seed in [1, 2] {
        let rep: serde_json::Value = read_json(&dir.path().join(format!("report_seed{seed}.json"))).unwrap();
        assert_eq!(rep["verdict"], "bounded");
        assert!(rep["sup_distance"].as_f64().unwrap() <= 1e-2);
        assert_eq!(rep["samples"].as_array().unwrap().len(), 21);
    }
}

#[test]
fn validate_passes_on_defaults() {
    let out = cnls(&["validate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn missing_config_is_reported() {
    assert_eq!(code(&cnls(&["solve", "--quiet"])), 1);
    assert_eq!(code(&cnls(&["solve", "--config", "/nonexistent/run.toml"])), 1);
}

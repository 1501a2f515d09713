//! End-to-end runs of the `twophoto` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use twophoto::cli::output::read_grid_csv;

fn twophoto(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_twophoto"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_samples_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scheme": {"scheme": "eight_port", "sample_count": 1000}, "seed": 3}"#,
    );
    let o = twophoto(&["simulate"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "i1,i2,i3,i4,z1,z2");
    assert_eq!(lines.len(), 1001);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    assert!(!csv.contains('\r'));

    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["n"], 1000);
    assert_eq!(s["seed"], 3);
    assert_eq!(s["scheme"], "eight_port");
    for k in 0..2 {
        let v = s["cov"][k][k].as_f64().unwrap();
        assert!((v - 0.5).abs() < 0.08, "variance {v}");
    }
}

#[test]
fn json_samples_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scheme": {"scheme": "six_port", "sample_count": 10}}"#,
    );
    let o = twophoto(&["simulate", "--format", "json"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = json(&dir.path().join("samples.json"));
    assert_eq!(v.as_array().unwrap().len(), 10);
    assert_eq!(v[0]["counts"].as_array().unwrap().len(), 3);
}

#[test]
fn propensity_grid_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run = |eta: f64, sub: &str| {
        let cfg = write_config(
            dir.path(),
            &format!("{sub}.json"),
            &format!(r#"{{"propensity": {{"eta": {eta}}}, "grid": {{"points": 64}}}}"#),
        );
        let out = dir.path().join(sub);
        let o = twophoto(&["propensity"], Some(&cfg), &out);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        read_grid_csv(&out.join("propensity.csv")).unwrap()
    };
    let (g1, eta1) = run(1.0, "a");
    assert_eq!(eta1, 1.0);
    assert_eq!(g1.spec.points, 64);
    assert_eq!(g1.spec.half_extent, 6.0);
    let origin = g1.real(32, 32);
    assert!((origin - 1.0 / std::f64::consts::PI).abs() < 1e-3, "{origin}");
    assert_eq!(g1.max_real(), origin);

    let (g2, _) = run(0.999, "b");
    let diff = g1.values.iter().zip(&g2.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-2, "{diff}");

    let text = std::fs::read_to_string(dir.path().join("a/propensity.csv")).unwrap();
    assert!(text.starts_with("# normalization"));
    let (back, _) = twophoto::cli::output::parse_grid_csv(&text).unwrap();
    assert_eq!(twophoto::cli::output::grid_csv(&back, 1.0), text);
}

#[test]
fn equivalence_eight_vs_six_port() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schemes": [{"scheme": "eight_port", "sample_count": 20000}, {"scheme": "six_port", "sample_count": 20000}], "seed": 8}"#,
    );
    let o = twophoto(&["equivalence"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&dir.path().join("equivalence.json"));
    assert_eq!(r["equivalent"], true);
    assert!(r["operator_delta"].as_f64().unwrap() <= 1e-12);
    assert!(r["chi_square_a"]["p_value"].as_f64().is_some());
}

#[test]
fn equivalence_heterodyne_vs_eight_port_coherent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schemes": [
            {"scheme": "heterodyne", "signal": {"kind": "coherent", "re": 0.6, "im": 0.8}, "sample_count": 50000},
            {"scheme": "eight_port", "signal": {"kind": "coherent", "re": 0.6, "im": 0.8}, "sample_count": 50000}
        ], "seed": 17}"#,
    );
    let o = twophoto(&["equivalence"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&dir.path().join("equivalence.json"));
    assert!(r["samples"]["z1"]["ks"]["p_value"].as_f64().unwrap() > 0.01);
    assert!(r["samples"]["z2"]["ks"]["p_value"].as_f64().unwrap() > 0.01);
}

#[test]
fn verdict_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schemes": [
            {"scheme": "eight_port", "sample_count": 20000},
            {"scheme": "six_port", "sample_count": 20000, "lo_amplitude": 3}
        ], "grid": {"points": 64}}"#,
    );
    let o = twophoto(&["equivalence"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn validation_errors_exit_one_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schemes": [{"scheme": "eight_port"}, {"scheme": "six_port", "eta": 0.5}]}"#,
    );
    let o = twophoto(&["equivalence"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["path"], "schemes[1].eta");

    let cfg = write_config(dir.path(), "d.json", r#"{"scheme": {"scheme": "ten_port"}}"#);
    let o = twophoto(&["simulate"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["path"], "scheme.scheme");

    let o = twophoto(&["simulate"], None, dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn resource_limit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scheme": {"scheme": "eight_port", "backend": "fock_truncated", "lo_amplitude": 3,
            "signal": {"kind": "fock", "n": 1}, "sample_count": 10}}"#,
    );
    let o = Command::new(env!("CARGO_BIN_EXE_twophoto"))
        .env("TWOPHOTO_DIM_LIMIT", "50")
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn decompose_and_loss_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = twophoto(&["decompose", "--format", "json"], None, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let d = json(&dir.path().join("decomposition.json"));
    let elements = d["elements"].as_array().unwrap();
    assert_eq!(elements.iter().filter(|e| e["element"] == "beam_splitter").count(), 4);
    assert_eq!(elements.iter().filter(|e| e["element"] == "phase_shifter").count(), 2);
    assert!(d["residual"].as_f64().unwrap() <= 1e-10);

    let o = twophoto(&["loss-check", "--format", "json"], None, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let l = json(&dir.path().join("loss_check.json"));
    assert_eq!(l["pass"], true);
    assert_eq!(l["rows"].as_array().unwrap().len(), 21);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scheme": {"scheme": "heterodyne", "sample_count": 500, "seed": 1}}"#,
    );
    let read = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = twophoto(&["simulate", "--seed", seed], Some(&cfg), &out);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("samples.csv")).unwrap()
    };
    assert_eq!(read("a", "5"), read("b", "5"));
    assert_ne!(read("c", "5"), read("d", "6"));
}

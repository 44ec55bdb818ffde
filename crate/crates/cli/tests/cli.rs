use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn surfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfield"))
        .args(args)
        .env("SURFIELD_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ply_values(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let n: usize = text
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let body = text.split("end_header\n").nth(1).unwrap();
    body.lines()
        .take(n)
        .map(|l| l.split_whitespace().nth(3).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn sphere_snapshot_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.ply"), dir.path().join("b.ply"));
    for out in [&a, &b] {
        let o = surfield(&[
            "snapshot", "--surface", "sphere", "--level", "3", "--density", "matern", "--kappa2", "10", "--alpha",
            "1.5", "--seed", "7", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let values = ply_values(&a);
    assert_eq!(values.len(), 10 * 64 + 2);
    assert!(values.iter().all(|v| v.is_finite()) && values.iter().any(|v| *v != 0.0));
}

#[test]
fn zero_density_circle_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.ply");
    let o = surfield(&[
        "snapshot", "--surface", "circle", "--level", "5", "--density", "constant", "--value", "0", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ply_values(&out).iter().all(|v| *v == 0.0));
    let csv = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(csv.starts_with("theta,value\n"));
    assert_eq!(csv.lines().count(), 64 + 1);
    assert!(dir.path().join("c_offset.ply").exists());
}

#[test]
fn oracle_default_passes() {
    let o = surfield(&["oracle"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("PASS") && !text.contains("FAIL"));
}

#[test]
fn oracle_reports_shrunken_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("o.json");
    fs::write(&cfg, r#"{"densities":[{"name":"matern","kappa2":10}],"interval_scale":0.5}"#).unwrap();
    let o = surfield(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("sampler_equivalence")), "{text}");
}

#[test]
fn oracle_skips_above_cap() {
    let o = surfield(&["oracle", "--cap", "8"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("SKIP") && !text.contains("FAIL"), "{text}");
}

#[test]
fn converge_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"surface":"circle","levels":[3,4],"fine_level":6,"alphas":[1.5],"n_samples":4,
            "density":{"name":"matern","kappa2":10},"coeffs":{"name":"matern","kappa2":10}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = surfield(&["converge", "--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("rates.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("alpha,h,n_vertices,rmse,cheb_degree,chopped_degree"));
    assert_eq!(lines.count(), 2);
    assert!(out.join("report.json").exists());

    let first = fs::read_to_string(out.join("report.json")).unwrap();
    let o = surfield(&["converge", "--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(first, fs::read_to_string(out.join("report.json")).unwrap());
}

#[test]
fn converge_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"levelz":[3]}"#).unwrap();
    assert_eq!(surfield(&["converge", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let strict = surfield(&[
        "converge", "--levels", "3,4", "--fine-level", "5", "--alphas", "1.5", "--n-samples", "2",
        "--slope-tolerance", "0",
    ]);
    assert_eq!(strict.status.code(), Some(1));
}

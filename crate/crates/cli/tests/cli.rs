use std::path::Path;
use std::process::{Command, Output};

fn polyfock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyfock")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn default_verify_passes_and_lists_residuals() {
    let out = polyfock(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema"], "polyfock-report/1");
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 20);
    assert!(checks.iter().all(|c| c["residual"].is_number() && c["passed"] == true));
    assert_eq!(v["config"]["spec"]["levels"], 6);
}

#[test]
fn tail_gate_inconsistency_exits_two() {
    let out = polyfock(&["verify", "--spec", "2,4", "--probe-radius", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail gate"));
    assert!(out.stdout.is_empty());
}

#[test]
fn zero_tolerance_exits_one_with_table() {
    let out = polyfock(&["verify", "--tol", "0", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,residual,tolerance,passed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().any(|r| r.ends_with(",false")));
}

#[test]
fn verify_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let out = polyfock(&["verify", "--out", d]);
        assert_eq!(out.status.code(), Some(0));
        let files: Vec<Vec<u8>> =
            ["verify.json", "verify.txt"].iter().map(|n| std::fs::read(dir.path().join(n)).unwrap()).collect();
        runs.push((out.stdout, files));
    }
    assert!(runs[0] == runs[1], "outputs differ between identical runs");
}

#[test]
fn malformed_arguments_exit_two() {
    for args in [
        vec!["verify", "--spec", "6"],
        vec!["verify", "--quad", "4,4"],
        vec!["verify", "--format", "xml"],
        vec!["verify", "--radii", "8,4"],
        vec!["spectrum"],
        vec!["spectrum", "--symbol", "nonsense"],
        vec!["spectrum", "--symbol", "gaussian:1", "--level", "9"],
        vec!["diagnose", "--symbol", "phase", "--probe", "bogus"],
        vec!["berezin", "--operator", "identity", "--radii", "10"],
        vec!["no-such-command"],
    ] {
        let out = polyfock(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn spectrum_csv_matches_moment_oracles() {
    let out = polyfock(&["spectrum", "--symbol", "gaussian:1", "--level", "1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("index,re,im,modulus,singular_value,radial_re,radial_im,difference\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 64);
    for (j, r) in rows.iter().enumerate().take(33) {
        assert!((r[1] - 0.5f64.powi(j as i32 + 1)).abs() < 1e-8, "j={j}");
    }
    // 17 significant digits in scientific notation
    let field = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert_eq!(field.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);

    let out = polyfock(&["spectrum", "--symbol", "phase", "--level", "1", "--format", "csv"]);
    for (j, r) in csv_rows(&String::from_utf8(out.stdout).unwrap()).iter().enumerate().take(33) {
        assert!((r[3] - 0.5f64.powf((j as f64 + 1.0) / 2.0)).abs() < 1e-6, "j={j}");
    }
}

#[test]
fn berezin_counterexample_and_grid_file() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    std::fs::write(&grid, "re,im\n0.5,0.5\n-1.0,2.0\n3.0,0.0\n").unwrap();
    let g = grid.to_str().unwrap();
    let out = polyfock(&["berezin", "--operator", "counterexample", "--mode", "standard:2", "--grid", g, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[4].hypot(r[5]) < 1e-8));

    let out = polyfock(&["berezin", "--operator", "counterexample", "--mode", "matrix:2", "--grid", g, "--format", "csv"]);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let expect = if r[2] != r[3] { 0.0 } else if r[2] == 1.0 { 1.0 } else { -1.0 };
        assert!((r[4] - expect).abs() < 1e-10 && r[5].abs() < 1e-10, "{r:?}");
    }

    let out = polyfock(&["berezin", "--operator", "identity", "--mode", "scalar:3", "--radii", "0,1,2", "--angles", "5"]);
    let v = json(&out);
    assert_eq!(v["config"]["angles"], 5);
    assert!(v["sample"].is_object());
}

#[test]
fn diagnose_writes_report_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = polyfock(&["diagnose", "--symbol", "constant:0.25", "--probe", "vo", "--out", d]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict_hint"], "consistent-with-compact");
    assert_eq!(v["config"]["radii"].as_array().unwrap().len(), 5);
    let profile = std::fs::read_to_string(dir.path().join("diagnose-vo-profile.csv")).unwrap();
    assert!(profile.starts_with("x,value\n"));
    assert_eq!(profile.lines().count(), 6);
    assert!(Path::new(d).join("diagnose-vo.json").exists());
}

#[test]
fn operator_export_container() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = polyfock(&["operator", "--operator", "projection:2", "--spec", "3,32", "--out", d]);
    assert_eq!(out.status.code(), Some(0));
    let bytes = std::fs::read(dir.path().join("operator.pfok")).unwrap();
    assert_eq!(&bytes[..4], b"PFOK");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    let file = format!("file:{}", dir.path().join("operator.pfok").display());
    let out = polyfock(&["berezin", "--operator", &file, "--spec", "3,32", "--mode", "scalar:2", "--radii", "0,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

//! End-to-end tests of the `taperconv` binary: exit codes, output dialects,
//! the reproducibility header, and the validate subcommand.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_taperconv")
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("taperconv-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &std::path::Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(exe()).args(args).output().unwrap()
}

#[test]
fn propagate_csv_has_header_and_12_digit_numbers() {
    let dir = scratch_dir("prop");
    let cfg = write_config(&dir, "c.json", r#"{"profile": {"type": "linear", "delta_w_nm": 4.0}}"#);
    let out = run_cli(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# taperconv "));
    let config_line = lines.next().unwrap();
    assert!(config_line.starts_with("# config {"));
    // the embedded echo is valid JSON with defaults materialized
    let echo: serde_json::Value =
        serde_json::from_str(config_line.trim_start_matches("# config ")).unwrap();
    assert_eq!(echo["simulation"]["length_um"], 1000.0);
    assert_eq!(lines.next().unwrap(), "quantity,value");
    let eta_line = text.lines().find(|l| l.starts_with("eta,")).unwrap();
    let mantissa = eta_line.split(',').nth(1).unwrap();
    // 12 significant digits in scientific notation
    assert!(
        mantissa.contains('e') && mantissa.split(['.', 'e']).nth(1).unwrap().len() == 11,
        "{mantissa}"
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_errors_exit_2_and_name_the_path() {
    let dir = scratch_dir("err");
    let cfg = write_config(&dir, "bad.json", r#"{"simulation": {"length_um": -5}}"#);
    let out = run_cli(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("simulation.length_um"), "{stderr}");

    let cfg = write_config(&dir, "unknown.json", r#"{"simulation": {"lenght": 5}}"#);
    let out = run_cli(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("lenght"), "{stderr}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn runtime_errors_exit_1() {
    let dir = scratch_dir("run-err");
    // taper shorter than the simulated length: a domain error, not config
    let cfg = write_config(
        &dir,
        "short.json",
        r#"{"profile": {"type": "linear", "delta_w_nm": 4.0, "length_um": 500.0},
            "simulation": {"length_um": 1000.0}}"#,
    );
    let out = run_cli(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_reads_from_stdin() {
    let mut child = Command::new(exe())
        .args(["phase-match", "--config", "-", "--format", "json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(br#"{"simulation": {"lambda3_nm": 602.0}}"#)
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["phase_match"]["w_um"].as_f64().unwrap() > 0.773);
}

#[test]
fn spectrum_csv_matches_configured_grid() {
    let dir = scratch_dir("spec");
    let cfg = write_config(
        &dir,
        "s.json",
        r#"{"spectrum": {"lambda_min_nm": 598.0, "lambda_max_nm": 602.0, "points": 41}}"#,
    );
    let out_path = dir.join("spectrum.csv");
    let out = run_cli(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("lambda_nm"))
        .collect();
    assert_eq!(data_rows.len(), 41);
    let first: f64 = data_rows[0].split(',').next().unwrap().parse().unwrap();
    assert!((first - 598.0).abs() < 1e-9);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn sweep_json_lines_carry_meta_then_records() {
    let dir = scratch_dir("sweepjson");
    let cfg = write_config(
        &dir,
        "sw.json",
        r#"{"profile": {"type": "linear", "delta_w_nm": 4.0},
            "sweep": {"parameter": "length", "values": [500.0, 1000.0]}}"#,
    );
    let out = run_cli(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let meta: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert!(meta["taperconv_version"].is_string());
    assert!(meta["config"]["sweep"]["observable"].is_string());
    for line in &lines[1..] {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["parameter"], "length_um");
        assert!(record["observable_value"].as_f64().unwrap() >= 0.0);
        assert_eq!(record["fixed"]["lambda3_nm"].as_f64().unwrap(), 600.395256916996);
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn sweep_csv_has_snapshot_columns() {
    let dir = scratch_dir("sweepcsv");
    let cfg = write_config(
        &dir,
        "sw.json",
        r#"{"sweep": {"parameter": "pump_power", "values": [0.5, 1.0]}}"#,
    );
    let out = run_cli(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().find(|l| l.starts_with("parameter,")).unwrap();
    for column in [
        "observable_value",
        "kappa_w",
        "g_ref",
        "lambda3_center_nm",
        "profile_type",
        "loss_alpha1_per_m",
    ] {
        assert!(header.contains(column), "missing column {column}");
    }
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("pump_power_w,"))
        .collect();
    assert_eq!(rows.len(), 2);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn area_law_table_reports_ratios() {
    let dir = scratch_dir("area");
    // short device keeps this test quick while still exercising the pipeline
    let cfg = write_config(
        &dir,
        "a.json",
        r#"{"simulation": {"length_um": 400.0},
            "sweep": {"parameter": "delta_w", "values": [0.0, 4.0]}}"#,
    );
    let out = run_cli(&[
        "area-law",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["area_law"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let ratio = row["ratio"].as_f64().unwrap();
        assert!(ratio > 0.9 && ratio < 1.1, "ratio {ratio}");
    }
    // the taper row carries the adiabaticity diagnostics
    assert!(rows[1]["lz_exponent"].as_f64().unwrap() > 0.0);
    assert!(rows[1]["adiabatic_pump_threshold_w"].as_f64().unwrap() > 0.0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn tabulated_dispersion_loads_from_csv_config() {
    let dir = scratch_dir("tab");
    // export an index table from the default synthetic calibration, then run
    // phase-match through the tabulated path
    let table = dir.join("indices.csv");
    {
        use taperconv::dispersion::{synthetic_index_samples, write_index_csv, SyntheticDispersion};
        let samples =
            synthetic_index_samples(&SyntheticDispersion::default_calibration(), 0.723, 0.823, 21)
                .unwrap();
        let mut file = std::fs::File::create(&table).unwrap();
        write_index_csv(&mut file, &samples).unwrap();
    }
    let cfg = write_config(
        &dir,
        "t.json",
        &format!(
            r#"{{"dispersion": {{"type": "tabulated", "path": {}}}}}"#,
            serde_json::to_string(table.to_str().unwrap()).unwrap()
        ),
    );
    let out = run_cli(&[
        "phase-match",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let w = doc["phase_match"]["w_um"].as_f64().unwrap();
    assert!((w - 0.773).abs() < 1e-9, "w = {w}");

    // a missing table is a config error
    let cfg = write_config(
        &dir,
        "missing.json",
        r#"{"dispersion": {"type": "tabulated", "path": "/nonexistent/t.csv"}}"#,
    );
    let out = run_cli(&["phase-match", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn validate_runs_green_and_emits_one_line_per_check() {
    let dir = scratch_dir("validate");
    let cfg = write_config(&dir, "v.json", "{}");
    let out = run_cli(&["validate", "--config", cfg.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        out.status.success(),
        "validate failed:\n{text}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("check,"))
        .collect();
    assert!(rows.len() >= 18, "only {} checks", rows.len());
    for row in &rows {
        assert!(row.contains(",pass,"), "check not green: {row}");
    }
    for name in [
        "dispersion/tabulated-roundtrip",
        "propagation/gauge-invariance",
        "propagation/convergence-order",
        "experiments/area-law",
    ] {
        assert!(text.contains(name), "missing check {name}");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vstirap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vstirap"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env_remove("VSTIRAP_CONFIG_DIR")
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn check_prints_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let out = vstirap(dir.path(), &["check"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("9.896e2")
            && text.contains("4.712e3")
            && text.contains("raman resonance      ok"),
        "{text}"
    );
    let m = manifest(dir.path());
    assert_eq!(m["subcommand"], "check");
    assert!((m["summary"]["adiabatic_cavity"].as_f64().unwrap() - 989.6).abs() < 0.1);
}

#[test]
fn single_transit_time_series_integrates_to_ninety_percent() {
    let dir = tempfile::tempdir().unwrap();
    let out = vstirap(dir.path(), &["single", "--delay-us", "45"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut rdr = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    rdr.truncate(rdr.trim_end().len());
    let mut lines = rdr.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (it, ir) = (0, header.iter().position(|h| *h == "rate_per_us").unwrap());
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[it].parse().unwrap(), f[ir].parse().unwrap())
        })
        .collect();
    let integral: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    assert!((integral - 0.90).abs() <= 0.03, "{integral}");
    let m = manifest(dir.path());
    assert_eq!(m["all_converged"], true);
    assert_eq!(m["resolved_config"]["system"]["delay_us"], 45.0);
}

#[test]
fn detuning_map_is_deterministic_and_manifest_reproduces_it() {
    let small = [
        "--set",
        "sweeps.delta_p_mhz=[-5,0,5]",
        "--set",
        "sweeps.delta_c_mhz=[-5,0,5]",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let mut args = small.to_vec();
    args.push("map-detuning");
    assert_eq!(vstirap(a.path(), &args).status.code(), Some(0));
    assert_eq!(vstirap(b.path(), &args).status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("detuning_map.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_eq!(
        String::from_utf8(read(a.path())).unwrap().lines().count(),
        10
    );

    let m = a.path().join("manifest.json");
    let out = vstirap(c.path(), &["--config", m.to_str().unwrap(), "map-detuning"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(read(a.path()), read(c.path()));
}

#[test]
fn invalid_config_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        "{\n  \"system\": {\n    \"kappa_mhz\": 1.25,\n    \"detla_c_mhz\": 3\n  }\n}\n",
    )
    .unwrap();
    let out = vstirap(dir.path(), &["--config", cfg.to_str().unwrap(), "check"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("system") && err.contains("detla_c_mhz") && err.contains("line 4"),
        "{err}"
    );
    assert!(!dir.path().join("manifest.json").exists());

    let out = vstirap(
        dir.path(),
        &["--set", "ensemble.detection_efficiency=1.5", "check"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_directory_from_environment() {
    let conf = tempfile::tempdir().unwrap();
    std::fs::write(
        conf.path().join("vstirap.json"),
        r#"{"seed": 5, "system": {"delta_c_mhz": -15}}"#,
    )
    .unwrap();
    std::fs::write(conf.path().join("named.json"), r#"{"seed": 6}"#).unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_vstirap"))
            .arg("--out")
            .arg(out_dir.path())
            .args(extra)
            .arg("check")
            .env("VSTIRAP_CONFIG_DIR", conf.path())
            .output()
            .unwrap()
    };
    assert_eq!(run(&[]).status.code(), Some(0));
    let m = manifest(out_dir.path());
    assert_eq!(m["seed"], 5);
    assert_eq!(m["summary"]["raman_ok"], false);
    assert_eq!(run(&["--config", "named.json"]).status.code(), Some(0));
    assert_eq!(manifest(out_dir.path())["seed"], 6);
}

#[test]
fn unconverged_points_flagged_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = vstirap(
        dir.path(),
        &[
            "--threads",
            "1",
            "--set",
            "integrator.max_steps=20",
            "--set",
            "sweeps.delays_us=[40,45]",
            "scan-delay",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(dir.path());
    assert_eq!(m["all_converged"], false);
    assert_eq!(m["failures"].as_array().unwrap().len(), 2);
    assert_eq!(m["threads"], 1);
    let csv = std::fs::read_to_string(dir.path().join("delay_scan.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")), "{csv}");
}

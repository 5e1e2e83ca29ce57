use std::f64::consts::PI;
use std::process::{Command, Output};

use halfline_spectral::montecarlo::read_dump;

fn halfline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfline"))
        .args(args)
        .env_remove("HALFLINE_SPECTRAL_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Value of `column` in the first data row of a CSV table.
fn first(csv: &str, column: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == column).unwrap();
    lines.next().unwrap().split(',').nth(i).unwrap().parse().unwrap()
}

#[test]
fn theta_for_stable_and_compound_poisson() {
    let o = halfline(&["theta", "--model", "stable:1", "--lambda", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((first(&stdout(&o), "theta") - PI / 8.0).abs() < 1e-10);
    let o = halfline(&["theta", "--model", "cp-exp", "--lambda", "1"]);
    assert!((first(&stdout(&o), "theta") - PI / 4.0).abs() < 1e-10);
}

#[test]
fn heat_kernel_refusal_names_the_time_threshold() {
    let o = halfline(&["heatkernel", "--model", "gamma", "--t", "0.25", "--x", "1", "--y", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("holds only for t > 0.5"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn atom_is_reported() {
    let o = halfline(&["eigenfunction", "--model", "rational:5/1,1/5", "--lambda", "1", "--x", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("atom at xi = 2.000000000000"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(halfline(&["theta", "--model", "warp:1"]).status.code(), Some(2));
    assert_eq!(halfline(&["theta", "--lambda", "1:2"]).status.code(), Some(2));
    assert_eq!(halfline(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "survival", "model": {"kind": "stable", "alpha": 2.0}, "t": [1.0], "x": {"min": 0.5, "max": 1.0, "count": 2}, "tol": 1e-8}"#,
    )
    .unwrap();
    let out = dir.path().join("out.json");
    let o = halfline(&[
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let cols: Vec<&str> = v["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(&cols[..3], &["t", "x", "survival"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1].as_f64(), Some(1.0));
    assert!((rows[1][2].as_f64().unwrap() - 0.520_499_877_813_046_5).abs() < 1e-6);

    // a flag replaces the file's model
    let o = halfline(&["survival", "--config", cfg.to_str().unwrap(), "--model", "stable:1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = first(&stdout(&o), "survival");
    assert!((s - 0.520_5).abs() > 1e-2, "{s}");
}

#[test]
fn thread_count_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_halfline"))
            .args(["survival", "--model", "stable:1.5", "--t", "1", "--x", "1,2"])
            .env("HALFLINE_SPECTRAL_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(run("0").status.code(), Some(1));
}

#[test]
fn validate_passes_for_catalog_models() {
    for model in ["stable:1.5", "relativistic:1", "gamma", "cp-exp", "rational:5/1,1/5"] {
        let o = halfline(&["validate", "--model", model, "--lambda", "1"]);
        assert!(o.status.success(), "{model}: {}", stdout(&o));
        assert!(!stdout(&o).contains(",fail,"), "{model}");
    }
}

#[test]
fn monte_carlo_comparison_with_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("paths.bin");
    let o = halfline(&[
        "mc-compare",
        "--model",
        "relativistic:1",
        "--x",
        "1",
        "--t",
        "0.5",
        "--n",
        "4000",
        "--dt",
        "0.01",
        "--seed",
        "11",
        "--dump",
        dump.to_str().unwrap(),
    ]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}{}", stderr(&o));
    assert!(first(&out, "z").abs() < 3.0);
    let paths = read_dump(std::fs::File::open(&dump).unwrap()).unwrap();
    assert_eq!(paths.len(), 4000);
    let alive = paths.iter().filter(|p| p.alive).count() as f64 / 4000.0;
    assert!((alive - first(&out, "mc")).abs() < 1e-15);
}

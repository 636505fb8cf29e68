//! Black-box behavior of the eblab binary: validation diagnostics and exit
//! codes, the scenario registry, replay, and a few end-to-end runs whose
//! outputs have known structure.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eblab")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_tmp(name: &str, content: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("eblab_cli_behavior");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn base_config(extra: serde_json::Value) -> serde_json::Value {
    let mut cfg = serde_json::json!({
        "name": "t",
        "family": "gaussian_case2",
        "truth": {"theta0": 0.0, "sigma2": 1.0, "m": 0.0, "tau2_ref": 1.0},
        "n_grid": [10, 20],
        "reps": 5,
        "metrics": ["TV"],
        "seed": 1,
        "output_dir": std::env::temp_dir().join("eblab_cli_behavior/out").to_str().unwrap()
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k.as_str()] = v.clone();
    }
    cfg
}

#[test]
fn list_enumerates_exactly_the_eight_families() {
    let out = run(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let families = [
        "gaussian_case1",
        "gaussian_case2",
        "gaussian_case3",
        "gprior",
        "modelselect",
        "dpmix_I",
        "dpmix_II",
        "bahadur",
    ];
    for f in families {
        assert!(text.contains(f), "missing family {f} in:\n{text}");
    }
    // Exactly eight data rows beneath the header.
    assert_eq!(text.lines().count(), 9, "unexpected listing:\n{text}");
}

#[test]
fn validate_rejects_non_increasing_n_grid() {
    let cfg = base_config(serde_json::json!({"n_grid": [100, 50]}));
    let path = write_tmp("bad_grid.json", &cfg.to_string());
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("n_grid not increasing"), "stderr: {err}");
}

#[test]
fn validate_names_missing_truth_field() {
    let cfg = base_config(serde_json::json!({
        "truth": {"theta0": 0.0, "sigma2": 1.0, "tau2_ref": 1.0}
    }));
    let path = write_tmp("missing_m.json", &cfg.to_string());
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("missing field `m`"), "stderr: {err}");
}

#[test]
fn validate_rejects_unknown_keys_and_metrics() {
    let cfg = base_config(serde_json::json!({"surprise": 1}));
    let path = write_tmp("unknown_key.json", &cfg.to_string());
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("surprise"), "stderr: {err}");

    let cfg = base_config(serde_json::json!({"metrics": ["TV", "wasserstein"]}));
    let path = write_tmp("unknown_metric.json", &cfg.to_string());
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("wasserstein"), "stderr: {err}");

    // Metric outside the family's set.
    let cfg = base_config(serde_json::json!({
        "family": "modelselect",
        "truth": {"m": 4, "k0": 1, "signal": 0.5, "sigma0_2": 1.0},
        "metrics": ["TV"],
        "n_grid": [30]
    }));
    let path = write_tmp("metric_family.json", &cfg.to_string());
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("not available for family"), "stderr: {err}");
}

#[test]
fn validate_requires_epsilon_for_consistency_mass() {
    let cfg = base_config(serde_json::json!({"metrics": ["consistency_mass"]}));
    let path = write_tmp("no_epsilon.json", &cfg.to_string());
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("epsilon"), "stderr: {err}");
}

#[test]
fn case3_events_are_all_degenerate() {
    let out_dir = std::env::temp_dir().join("eblab_cli_behavior/case3");
    let cfg = serde_json::json!({
        "name": "case3_all_degenerate",
        "family": "gaussian_case3",
        "truth": {"theta0": 0.0, "sigma2": 1.0, "m_ref": 0.0, "tau2_ref": 1.0},
        "n_grid": [10, 50],
        "reps": 40,
        "metrics": ["TV", "degeneracy_freq"],
        "seed": 11,
        "output_dir": out_dir.to_str().unwrap()
    });
    let path = write_tmp("case3.json", &cfg.to_string());
    let out = run(&["run", path.to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let events =
        std::fs::read_to_string(out_dir.join("case3_all_degenerate/events.csv")).unwrap();
    let mut rows = 0;
    for line in events.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2], "true", "non-degenerate row: {line}");
        assert_eq!(cols[3], "true", "TV != 1 row: {line}");
        rows += 1;
    }
    assert_eq!(rows, 80);
}

#[test]
fn case1_consistency_mass_shrinks_along_the_grid() {
    // Closed-form Gaussian tails: the posterior mass outside the eps ball
    // drops from the smallest n to the largest, and is essentially zero at
    // n = 400.
    let out_dir = std::env::temp_dir().join("eblab_cli_behavior/case1");
    let cfg = serde_json::json!({
        "name": "case1_mass",
        "family": "gaussian_case1",
        "truth": {"theta0": 0.0, "sigma2": 1.0, "tau2": 1.0, "m_ref": 0.0},
        "n_grid": [25, 400],
        "reps": 200,
        "metrics": ["consistency_mass"],
        "seed": 5,
        "epsilon": 0.5,
        "output_dir": out_dir.to_str().unwrap()
    });
    let path = write_tmp("case1.json", &cfg.to_string());
    let out = run(&["run", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = std::fs::read_to_string(out_dir.join("case1_mass/curve.csv")).unwrap();
    let mean_at = |n: &str| -> f64 {
        curve
            .lines()
            .find(|l| l.starts_with(&format!("{n},consistency_mass")))
            .expect("consistency row present")
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    let small = mean_at("25");
    let large = mean_at("400");
    assert!(large < small, "mass not shrinking: {small} -> {large}");
    assert!(large <= 1e-10, "mean mass at n=400: {large}");
}

#[test]
fn replay_reproduces_one_cell() {
    let out_dir = std::env::temp_dir().join("eblab_cli_behavior/replay");
    let cfg = serde_json::json!({
        "name": "replay_demo",
        "family": "gaussian_case2",
        "truth": {"theta0": 0.0, "sigma2": 1.0, "m": 0.0, "tau2_ref": 1.0},
        "n_grid": [10, 20],
        "reps": 8,
        "metrics": ["TV", "degeneracy_freq"],
        "seed": 21,
        "output_dir": out_dir.to_str().unwrap()
    });
    let path = write_tmp("replay.json", &cfg.to_string());
    let out = run(&["run", path.to_str().unwrap()]);
    assert!(out.status.success());
    let events = std::fs::read_to_string(out_dir.join("replay_demo/events.csv")).unwrap();
    let row = events
        .lines()
        .find(|l| l.starts_with("20,3,"))
        .expect("cell present")
        .to_string();
    let degenerate_in_file = row.split(',').nth(2).unwrap() == "true";

    let out = run(&["run", path.to_str().unwrap(), "--replay", "n=20", "rep=3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("replay prints JSON");
    assert_eq!(doc["n"], 20);
    assert_eq!(doc["rep"], 3);
    assert_eq!(doc["degenerate"].as_bool().unwrap(), degenerate_in_file);

    // Replaying an off-grid n is a config error.
    let out = run(&["run", path.to_str().unwrap(), "--replay", "n=15", "rep=0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dpmix_reads_csv_dataset_and_emits_predictive() {
    let dir = std::env::temp_dir().join("eblab_cli_behavior/dpmix_csv");
    std::fs::create_dir_all(&dir).unwrap();
    // 40-point dataset from two well-separated clumps.
    let mut csv = String::new();
    for i in 0..40 {
        let v = if i % 2 == 0 { -2.0 + 0.05 * i as f64 } else { 2.0 - 0.04 * i as f64 };
        csv.push_str(&format!("{v}\n"));
    }
    std::fs::write(dir.join("data.csv"), csv).unwrap();
    let cfg = serde_json::json!({
        "name": "dpmix_csv",
        "family": "dpmix_II",
        "truth": {
            "components": [[0.5, -2.0, 1.0], [0.5, 2.0, 1.0]],
            "precision": 1.0, "base_sd": 2.0, "sigma_bounds": [0.8, 1.3],
            "gibbs_iters": 150, "gibbs_burnin": 100,
            "data_csv": "data.csv"
        },
        "n_grid": [40],
        "reps": 2,
        "metrics": ["Hellinger"],
        "seed": 31,
        "output_dir": dir.to_str().unwrap()
    });
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = run(&["run", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pred = std::fs::read_to_string(dir.join("dpmix_csv/predictive_n40.csv")).unwrap();
    assert!(pred.starts_with("x,density\n"));
    let rows: Vec<(f64, f64)> = pred
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
        })
        .collect();
    assert!(rows.len() >= 256);
    // Trapezoid mass of the emitted density is ~1.
    let mass: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[1].1 + w[0].1) * (w[1].0 - w[0].0))
        .sum();
    assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");

    // A dataset whose length disagrees with the grid is a config error.
    let bad = serde_json::json!({
        "name": "dpmix_bad",
        "family": "dpmix_II",
        "truth": {
            "components": [[0.5, -2.0, 1.0], [0.5, 2.0, 1.0]],
            "precision": 1.0, "base_sd": 2.0, "sigma_bounds": [0.8, 1.3],
            "gibbs_iters": 150, "gibbs_burnin": 100,
            "data_csv": "data.csv"
        },
        "n_grid": [50],
        "reps": 2,
        "metrics": ["Hellinger"],
        "seed": 31,
        "output_dir": dir.to_str().unwrap()
    });
    let bad_path = dir.join("bad.json");
    std::fs::write(&bad_path, bad.to_string()).unwrap();
    let out = run(&["run", bad_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn meta_json_echoes_config_and_hash() {
    let out_dir = std::env::temp_dir().join("eblab_cli_behavior/meta");
    let cfg = serde_json::json!({
        "name": "meta_demo",
        "family": "gaussian_case2",
        "truth": {"theta0": 0.0, "sigma2": 1.0, "m": 0.0, "tau2_ref": 1.0},
        "n_grid": [10],
        "reps": 3,
        "metrics": ["TV"],
        "seed": 9,
        "output_dir": out_dir.to_str().unwrap()
    });
    let raw = serde_json::to_string_pretty(&cfg).unwrap();
    let path = write_tmp("meta.json", &raw);
    let out = run(&["run", path.to_str().unwrap()]);
    assert!(out.status.success());
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("meta_demo/meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["name"], "meta_demo");
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["config"]["truth"]["sigma2"], 1.0);
    assert_eq!(meta["config_sha1"].as_str().unwrap().len(), 40);
    // SVG chart exists per metric.
    assert!(out_dir.join("meta_demo/tv.svg").exists());
}

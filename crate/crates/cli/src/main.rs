//! eblab: scenario-driven experiment runner.
//!
//! Commands:
//!
//! ```text
//! eblab run <config.json> [--threads N] [--replay n=<n> rep=<r>]
//! eblab validate <config.json>
//! eblab list
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 replication failures.

mod config;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use config::{Scenario, ScenarioConfig};
use eblab_core::curve::{cell_stream_id, run_curve};
use eblab_core::linalg::Matrix;
use eblab_core::rng::RngStream;
use scenario::Runner;

const USAGE: &str = "\
eblab - empirical-Bayes merging diagnostics runner

USAGE:
  eblab run <config.json> [--threads N] [--replay n=<n> rep=<r>]
  eblab validate <config.json>
  eblab list

OPTIONS:
  --threads N        worker threads for the replication pool
                     (default: EBLAB_THREADS env var, else all cores)
  --replay n=<n> rep=<r>
                     re-run a single replication cell of the scenario and
                     print its record as JSON (no files written)

Outputs of `run` land in <output_dir>/<name>/:
  curve.csv   per-n summaries (mean, median, q10, q90, reps_ok) per metric
  events.csv  per-replication degenerate / TV=1 event log
  meta.json   config echo, content hash and seed
  <metric>.svg one line chart per metric
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("validate") => cmd_validate(&args[1..]),
        Some("list") => cmd_list(),
        Some("--help") | Some("-h") | Some("help") => {
            print!("{USAGE}");
            ExitCode::SUCCESS
        }
        _ => {
            eprint!("{USAGE}");
            ExitCode::from(2)
        }
    }
}

fn fail_config(msg: &str) -> ExitCode {
    eprintln!("{msg}");
    ExitCode::from(2)
}

fn load_scenario(path: &str) -> Result<(Scenario, String), String> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| format!("config error: cannot read {path}: {e}"))?;
    let cfg = ScenarioConfig::parse(&raw)?;
    let scenario = cfg.validate()?;
    Ok((scenario, raw))
}

fn resolve_relative(config_path: &str, file: &str) -> PathBuf {
    let base = PathBuf::from(config_path);
    base.parent().map(|p| p.join(file)).unwrap_or_else(|| PathBuf::from(file))
}

/// Fixed design CSV: one row per observation, comma-separated covariates,
/// no header.
fn load_fixed_design(scenario: &Scenario, config_path: &str) -> Result<Option<Matrix>, String> {
    let config::FamilyTruth::Gprior(t) = &scenario.truth else {
        return Ok(None);
    };
    let Some(csv) = &t.design_csv else {
        return Ok(None);
    };
    let path = resolve_relative(config_path, csv);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("config error: cannot read design_csv {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| format!("config error: design_csv row {}: {e}", i + 1))?;
        if row.len() != t.k {
            return Err(format!(
                "config error: design_csv row {} has {} columns, expected k = {}",
                i + 1,
                row.len(),
                t.k
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("config error: design_csv is empty".into());
    }
    Ok(Some(Matrix::from_rows(rows)))
}

/// Fixed mixture dataset: single-column CSV, no header.
fn load_fixed_data(scenario: &Scenario, config_path: &str) -> Result<Option<Vec<f64>>, String> {
    let csv = match &scenario.truth {
        config::FamilyTruth::DpmixI(t) => t.data_csv.clone(),
        config::FamilyTruth::DpmixIi(t) => t.data_csv.clone(),
        _ => None,
    };
    let Some(csv) = csv else {
        return Ok(None);
    };
    let path = resolve_relative(config_path, &csv);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("config error: cannot read data_csv {}: {e}", path.display()))?;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|e| format!("config error: data_csv row {}: {e}", i + 1))?;
        data.push(v);
    }
    if data.is_empty() {
        return Err("config error: data_csv is empty".into());
    }
    if let Some(n) = scenario.config.n_grid.iter().find(|n| **n != data.len()) {
        return Err(format!(
            "config error: data_csv has {} rows but n_grid contains {n}",
            data.len()
        ));
    }
    Ok(Some(data))
}

struct RunFlags {
    config_path: String,
    threads: Option<usize>,
    replay: Option<(usize, usize)>,
}

fn parse_run_flags(args: &[String]) -> Result<RunFlags, String> {
    let mut config_path = None;
    let mut threads = None;
    let mut replay_n = None;
    let mut replay_rep = None;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--threads" => {
                i += 1;
                let v = args.get(i).ok_or("config error: --threads needs a value")?;
                threads =
                    Some(v.parse::<usize>().map_err(|_| "config error: --threads must be an integer")?);
            }
            "--replay" => {
                // Consume n=<n> and rep=<r> in either order.
                for _ in 0..2 {
                    i += 1;
                    let kv = args
                        .get(i)
                        .ok_or("config error: --replay needs n=<n> rep=<r>")?;
                    if let Some(v) = kv.strip_prefix("n=") {
                        replay_n = Some(
                            v.parse::<usize>().map_err(|_| "config error: bad --replay n value")?,
                        );
                    } else if let Some(v) = kv.strip_prefix("rep=") {
                        replay_rep = Some(
                            v.parse::<usize>()
                                .map_err(|_| "config error: bad --replay rep value")?,
                        );
                    } else {
                        return Err(format!("config error: unexpected --replay argument {kv}"));
                    }
                }
            }
            other if config_path.is_none() && !other.starts_with('-') => {
                config_path = Some(other.to_string());
            }
            other => return Err(format!("config error: unexpected argument {other}")),
        }
        i += 1;
    }
    if threads.is_none() {
        if let Ok(v) = std::env::var("EBLAB_THREADS") {
            threads =
                Some(v.parse::<usize>().map_err(|_| "config error: EBLAB_THREADS must be an integer")?);
        }
    }
    let replay = match (replay_n, replay_rep) {
        (Some(n), Some(r)) => Some((n, r)),
        (None, None) => None,
        _ => return Err("config error: --replay needs both n=<n> and rep=<r>".into()),
    };
    Ok(RunFlags {
        config_path: config_path.ok_or("config error: missing config path")?,
        threads,
        replay,
    })
}

fn cmd_run(args: &[String]) -> ExitCode {
    let flags = match parse_run_flags(args) {
        Ok(f) => f,
        Err(e) => return fail_config(&e),
    };
    let (scenario, raw) = match load_scenario(&flags.config_path) {
        Ok(v) => v,
        Err(e) => return fail_config(&e),
    };
    let fixed = match load_fixed_design(&scenario, &flags.config_path) {
        Ok(f) => f,
        Err(e) => return fail_config(&e),
    };
    let fixed_data = match load_fixed_data(&scenario, &flags.config_path) {
        Ok(f) => f,
        Err(e) => return fail_config(&e),
    };
    let runner = match Runner::new(&scenario, fixed, fixed_data) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("scenario setup failed: {e}");
            return ExitCode::from(3);
        }
    };

    if let Some((n, rep)) = flags.replay {
        return cmd_replay(&scenario, &runner, n, rep);
    }

    let curve = match run_curve(
        &runner,
        &scenario.config.n_grid,
        scenario.config.reps,
        scenario.config.seed,
        flags.threads,
    ) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("scenario failed: {e}");
            return ExitCode::from(3);
        }
    };

    let dir = PathBuf::from(&scenario.config.output_dir).join(&scenario.config.name);
    if let Err(e) = output::write_all(&dir, &scenario, &raw, &curve) {
        eprintln!("cannot write outputs to {}: {e}", dir.display());
        return ExitCode::from(3);
    }
    // Mixture families additionally emit the replication-0 predictive per n
    // as a two-column (x, density) CSV.
    for (n_idx, &n) in scenario.config.n_grid.iter().enumerate() {
        let stream = cell_stream_id(n_idx, 0, scenario.config.reps);
        let mut rng = RngStream::new(scenario.config.seed, stream);
        match runner.predictive_density(n, &mut rng) {
            Ok(Some((xs, density))) => {
                let mut csv = String::from("x,density\n");
                for (x, d) in xs.iter().zip(&density) {
                    csv.push_str(&format!("{},{}\n", output::fmt_f64(*x), output::fmt_f64(*d)));
                }
                let path = dir.join(format!("predictive_n{n}.csv"));
                if let Err(e) = std::fs::write(&path, csv) {
                    eprintln!("cannot write {}: {e}", path.display());
                    return ExitCode::from(3);
                }
            }
            Ok(None) => break,
            Err(e) => {
                eprintln!("predictive emission failed: {e}");
                return ExitCode::from(3);
            }
        }
    }
    let failed = curve.records.iter().filter(|r| r.outcome.is_none()).count();
    println!(
        "wrote {} ({} n-points x {} reps, {} failed cells)",
        dir.display(),
        curve.n_grid.len(),
        curve.reps,
        failed
    );
    ExitCode::SUCCESS
}

fn cmd_replay(scenario: &Scenario, runner: &Runner, n: usize, rep: usize) -> ExitCode {
    let Some(n_idx) = scenario.config.n_grid.iter().position(|v| *v == n) else {
        return fail_config(&format!("config error: n = {n} is not on the n_grid"));
    };
    if rep >= scenario.config.reps {
        return fail_config(&format!(
            "config error: rep = {rep} outside 0..{}",
            scenario.config.reps
        ));
    }
    let stream = cell_stream_id(n_idx, rep, scenario.config.reps);
    let mut rng = RngStream::new(scenario.config.seed, stream);
    use eblab_core::curve::Replicable;
    match runner.replicate(n, &mut rng) {
        Ok(outcome) => {
            let values: serde_json::Map<String, serde_json::Value> = outcome
                .values
                .iter()
                .map(|(m, v)| (m.as_str().to_string(), serde_json::json!(v)))
                .collect();
            let doc = serde_json::json!({
                "n": n,
                "rep": rep,
                "stream_id": stream,
                "values": values,
                "degenerate": outcome.degenerate,
                "tv_one": outcome.tv_one,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("replication failed: {e}");
            ExitCode::from(3)
        }
    }
}

fn cmd_validate(args: &[String]) -> ExitCode {
    let Some(path) = args.first() else {
        return fail_config("config error: missing config path");
    };
    match load_scenario(path) {
        Ok((scenario, _)) => {
            println!(
                "ok: scenario \"{}\" (family {}, {} n-points, {} reps, metrics: {})",
                scenario.config.name,
                scenario.config.family.0.as_str(),
                scenario.config.n_grid.len(),
                scenario.config.reps,
                scenario
                    .metrics
                    .iter()
                    .map(|m| m.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail_config(&e),
    }
}

fn cmd_list() -> ExitCode {
    println!("{:<16} {:<22} description", "family", "template");
    for (family, description, template) in scenario::templates() {
        let name = template
            .get("name")
            .and_then(|v| v.as_str())
            .unwrap_or("-")
            .to_string();
        println!("{:<16} {:<22} {description}", family.as_str(), name);
    }
    ExitCode::SUCCESS
}

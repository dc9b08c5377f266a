//! End-to-end checks of the `distopt` binary: the four verbs, exit codes,
//! error wording, and file contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn distopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn test_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("distopt_cli_{name}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const GOOD: &str = r#"
[run]
iterations = 120
trace_stride = 10
master_seed = 4

[problem]
agents = 3

[noise]
x = { kind = "gaussian", sigma = 0.1 }
"#;

#[test]
fn validate_accepts_good_and_rejects_bad() {
    let dir = test_dir("validate");
    let good = write_config(&dir, "good.toml", GOOD);
    let out = distopt(&["validate", good.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ok: 3 agents"), "{stdout}");

    // Inadmissible stepsize exponent: nonzero exit naming the condition.
    let bad = write_config(
        &dir,
        "bad_schedule.toml",
        "[problem]\nagents = 2\n\n[schedule]\na1 = 0.4\n",
    );
    let out = distopt(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("a1"), "{stderr}");
    assert!(stderr.contains("1/2"), "{stderr}");

    // Disjoint constraint sets: the feasibility requirement is named.
    let disjoint = write_config(
        &dir,
        "disjoint.toml",
        r#"
[problem]
agents = 2

[[sets.agent]]
kind = "box"
lower = [0.0, 0.0]
upper = [1.0, 1.0]

[[sets.agent]]
kind = "box"
lower = [2.0, 2.0]
upper = [3.0, 3.0]
"#,
    );
    let out = distopt(&["validate", disjoint.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonempty intersection"));

    // Missing file.
    let out = distopt(&["validate", dir.join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_writes_artifacts_with_exact_row_count() {
    let dir = test_dir("run");
    let config = write_config(&dir, "job.toml", GOOD);
    let out_dir = dir.join("out");
    let out = distopt(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--audit",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let trace = std::fs::read_to_string(out_dir.join("job_trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    // Header plus ceil(120 / 10) + 1 records.
    assert_eq!(lines.len(), 1 + 13);
    assert!(lines[0].starts_with("k,alpha,gamma,consensus_gap"));
    // Audit flags present on audited rows.
    assert!(lines[1].contains("avg-id=pass"));

    assert!(out_dir.join("job_manifest.json").exists());
    assert!(out_dir.join("job_summary.json").exists());

    // Re-running the identical config yields byte-identical traces.
    let first = std::fs::read(out_dir.join("job_trace.csv")).unwrap();
    let out = distopt(&["run", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--audit"]);
    assert!(out.status.success());
    let second = std::fs::read(out_dir.join("job_trace.csv")).unwrap();
    assert_eq!(first, second);

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_mode_override_is_applied() {
    let dir = test_dir("mode");
    let config = write_config(&dir, "job.toml", GOOD);
    let out_dir = dir.join("out");
    let out = distopt(&[
        "run",
        config.to_str().unwrap(),
        "--mode",
        "deterministic",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(out_dir.join("job_manifest.json")).unwrap();
    assert!(manifest.contains("\"mode\": \"deterministic\""));

    let out = distopt(&["run", config.to_str().unwrap(), "--mode", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown run mode"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_writes_per_seed_files_and_aggregate() {
    let dir = test_dir("sweep");
    let config = write_config(&dir, "job.toml", GOOD);
    let out_dir = dir.join("out");
    let out = distopt(&[
        "sweep",
        config.to_str().unwrap(),
        "--seeds",
        "8",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for seed in 4..12 {
        assert!(out_dir.join(format!("seed{seed}_trace.csv")).exists());
    }
    assert!(out_dir.join("aggregate.csv").exists());
    let summary = std::fs::read_to_string(out_dir.join("sweep_summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(parsed["seeds"].as_array().unwrap().len(), 8);
    assert!(parsed["final_row"]["opt_gap_mean"].as_f64().is_some());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn oracle_prints_reference_solution() {
    let dir = test_dir("oracle");
    let config = write_config(&dir, "job.toml", GOOD);
    let out = distopt(&["oracle", config.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("x_star"), "{stdout}");
    assert!(stdout.contains("theta_star"), "{stdout}");
    assert!(stdout.contains("f_star"), "{stdout}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = test_dir("envvar");
    let config = write_config(&dir, "job.toml", GOOD);
    let out_dir = dir.join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_distopt"))
        .args(["run", config.to_str().unwrap()])
        .env("DISTOPT_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out_dir.join("job_trace.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

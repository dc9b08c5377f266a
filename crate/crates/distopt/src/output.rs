//! Run artifacts on disk: the trace file, the manifest, the summary, and
//! seed sweeps with cross-seed aggregation.
//!
//! Trace files are comma-separated with one header row; floating-point
//! columns carry 17 significant digits so a trace re-read loses nothing.
//! Records stream to disk as they are produced, so a failed run leaves its
//! partial trace behind.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, ConfigFile, Manifest};
use crate::engine::{self, RunSummary, RunTrace, Simulation};
use crate::error::{Error, Result};
use crate::metrics::IterationRecord;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

pub const TRACE_HEADER: &str =
    "k,alpha,gamma,consensus_gap,theta_error,lyapunov,opt_gap,audit_flags";

/// One trace row, matching `TRACE_HEADER`.
pub fn format_record(record: &IterationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        record.k,
        format_float(record.alpha),
        format_float(record.gamma),
        format_float(record.consensus_gap),
        format_float(record.theta_error),
        format_float(record.lyapunov),
        format_float(record.opt_gap),
        record.audit_flags()
    )
}

struct TraceWriter {
    writer: BufWriter<File>,
}

impl TraceWriter {
    fn create(path: &Path) -> Result<Self> {
        let file = File::create(path)?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{TRACE_HEADER}")?;
        Ok(Self { writer })
    }

    fn write(&mut self, record: &IterationRecord) -> Result<()> {
        writeln!(self.writer, "{}", format_record(record))?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Paths and results of one executed run.
pub struct RunArtifacts {
    pub trace: RunTrace,
    pub trace_path: PathBuf,
    pub manifest_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Execute one run of a configuration document, writing
/// `<label>_trace.csv`, `<label>_manifest.json`, and `<label>_summary.json`
/// under `out_dir`. The manifest is written before stepping begins and the
/// trace streams, so failures leave the partial artifacts behind.
pub fn execute_run(file: &ConfigFile, out_dir: &Path, label: &str) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let run_config = config::resolve(file)?;
    let mut simulation = Simulation::new(run_config)?;

    let manifest_path = out_dir.join(format!("{label}_manifest.json"));
    let manifest = Manifest::new(file, &simulation);
    std::fs::write(&manifest_path, manifest.to_json()?)?;

    let trace_path = out_dir.join(format!("{label}_trace.csv"));
    let mut writer = TraceWriter::create(&trace_path)?;
    let result = engine::run_prepared_with(&mut simulation, &mut |record| writer.write(record));
    writer.finish()?;
    let trace = result?;

    let summary_path = out_dir.join(format!("{label}_summary.json"));
    let summary_json = serde_json::to_string_pretty(&trace.summary)
        .map_err(|e| Error::Config(format!("cannot serialize summary: {e}")))?;
    std::fs::write(&summary_path, summary_json)?;

    Ok(RunArtifacts { trace, trace_path, manifest_path, summary_path })
}

/// Cross-seed statistics at one traced iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub k: u64,
    pub consensus_gap_mean: f64,
    pub consensus_gap_max: f64,
    pub theta_error_mean: f64,
    pub theta_error_max: f64,
    pub lyapunov_mean: f64,
    pub lyapunov_max: f64,
    pub opt_gap_mean: f64,
    pub opt_gap_max: f64,
}

pub const AGGREGATE_HEADER: &str = "k,consensus_gap_mean,consensus_gap_max,theta_error_mean,\
theta_error_max,lyapunov_mean,lyapunov_max,opt_gap_mean,opt_gap_max";

/// End-of-sweep roll-up: the per-metric mean and max over seeds at the final
/// traced iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub seeds: Vec<u64>,
    pub final_row: AggregateRow,
    pub per_seed: Vec<RunSummary>,
}

pub struct SweepArtifacts {
    pub summary: SweepSummary,
    pub aggregate_rows: Vec<AggregateRow>,
    pub trace_paths: Vec<PathBuf>,
    pub aggregate_path: PathBuf,
    pub summary_path: PathBuf,
}

fn aggregate(records: &[Vec<IterationRecord>]) -> Result<Vec<AggregateRow>> {
    let rows = records[0].len();
    for (i, seed_records) in records.iter().enumerate() {
        if seed_records.len() != rows {
            return Err(Error::InvalidArgument(format!(
                "sweep run {i} produced {} traced rows, expected {rows}",
                seed_records.len()
            )));
        }
    }
    let n = records.len() as f64;
    Ok((0..rows)
        .map(|r| {
            let at = |f: &dyn Fn(&IterationRecord) -> f64| {
                let values = records.iter().map(|run| f(&run[r]));
                let sum: f64 = values.clone().sum();
                let max = values.fold(f64::NEG_INFINITY, f64::max);
                (sum / n, max)
            };
            let (cg_mean, cg_max) = at(&|rec| rec.consensus_gap);
            let (te_mean, te_max) = at(&|rec| rec.theta_error);
            let (ly_mean, ly_max) = at(&|rec| rec.lyapunov);
            let (og_mean, og_max) = at(&|rec| rec.opt_gap);
            AggregateRow {
                k: records[0][r].k,
                consensus_gap_mean: cg_mean,
                consensus_gap_max: cg_max,
                theta_error_mean: te_mean,
                theta_error_max: te_max,
                lyapunov_mean: ly_mean,
                lyapunov_max: ly_max,
                opt_gap_mean: og_mean,
                opt_gap_max: og_max,
            }
        })
        .collect())
}

/// Run `seed_count` replicas of one instance in parallel, one worker per
/// run, with master seeds `base, base + 1, ...`. The problem instance is
/// materialized once (so family-generated data is shared) and the reference
/// is solved once. Produces per-seed trace and manifest files plus
/// `aggregate.csv` and `sweep_summary.json`.
pub fn execute_sweep(
    file: &ConfigFile,
    seed_count: u64,
    out_dir: &Path,
) -> Result<SweepArtifacts> {
    if seed_count == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one seed".into()));
    }
    std::fs::create_dir_all(out_dir)?;

    // Pin the instance: resolve once, echo explicit data, then vary only the
    // master seed.
    let base_config = config::resolve(file)?;
    let resolved = config::resolved_file(file, &base_config);
    let reference = {
        let simulation = Simulation::new(base_config)?;
        simulation.reference().clone()
    };

    let seeds: Vec<u64> = (0..seed_count).map(|i| file.run.master_seed + i).collect();
    let runs: Vec<Result<(u64, PathBuf, RunTrace)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut seed_file = resolved.clone();
            seed_file.run.master_seed = seed;
            let run_config = config::resolve(&seed_file)?;
            let mut simulation = Simulation::with_reference(run_config, reference.clone())?;

            let manifest_path = out_dir.join(format!("seed{seed}_manifest.json"));
            std::fs::write(&manifest_path, Manifest::new(&seed_file, &simulation).to_json()?)?;

            let trace_path = out_dir.join(format!("seed{seed}_trace.csv"));
            let mut writer = TraceWriter::create(&trace_path)?;
            let result =
                engine::run_prepared_with(&mut simulation, &mut |record| writer.write(record));
            writer.finish()?;
            Ok((seed, trace_path, result?))
        })
        .collect();

    let mut trace_paths = Vec::with_capacity(seeds.len());
    let mut traces = Vec::with_capacity(seeds.len());
    let mut per_seed = Vec::with_capacity(seeds.len());
    for run in runs {
        let (_, path, trace) = run?;
        trace_paths.push(path);
        per_seed.push(trace.summary.clone());
        traces.push(trace.records);
    }

    let aggregate_rows = aggregate(&traces)?;
    let aggregate_path = out_dir.join("aggregate.csv");
    {
        let mut writer = BufWriter::new(File::create(&aggregate_path)?);
        writeln!(writer, "{AGGREGATE_HEADER}")?;
        for row in &aggregate_rows {
            writeln!(
                writer,
                "{},{},{},{},{},{},{},{},{}",
                row.k,
                format_float(row.consensus_gap_mean),
                format_float(row.consensus_gap_max),
                format_float(row.theta_error_mean),
                format_float(row.theta_error_max),
                format_float(row.lyapunov_mean),
                format_float(row.lyapunov_max),
                format_float(row.opt_gap_mean),
                format_float(row.opt_gap_max)
            )?;
        }
        writer.flush()?;
    }

    let summary = SweepSummary {
        seeds,
        final_row: aggregate_rows.last().expect("at least one traced row").clone(),
        per_seed,
    };
    let summary_path = out_dir.join("sweep_summary.json");
    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Config(format!("cannot serialize sweep summary: {e}")))?;
    std::fs::write(&summary_path, summary_json)?;

    Ok(SweepArtifacts {
        summary,
        aggregate_rows,
        trace_paths,
        aggregate_path,
        summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("distopt_output_{name}_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    fn small_config() -> ConfigFile {
        config::parse_str(
            "[run]\niterations = 40\ntrace_stride = 10\nmaster_seed = 5\n\n[problem]\nagents = 2\n",
        )
        .unwrap()
    }

    #[test]
    fn float_format_round_trips() {
        for value in [0.1, 1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, 123456.789e12, 0.0] {
            let text = format_float(value);
            let parsed: f64 = text.parse().unwrap();
            assert_eq!(parsed.to_bits(), value.to_bits(), "{text}");
        }
    }

    #[test]
    fn run_artifacts_written_and_row_count_correct() {
        let dir = test_dir("run");
        let file = small_config();
        let artifacts = execute_run(&file, &dir, "demo").unwrap();
        let text = std::fs::read_to_string(&artifacts.trace_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        // ceil(40 / 10) + 1 data rows.
        assert_eq!(lines.len() - 1, 5);
        assert_eq!(artifacts.trace.records.len(), 5);

        let manifest = Manifest::from_json(
            &std::fs::read_to_string(&artifacts.manifest_path).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest.master_seed, 5);
        // The echoed config re-parses and re-resolves.
        let echoed = config::resolve(&manifest.config).unwrap();
        assert_eq!(echoed.agent_count(), 2);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn identical_runs_write_identical_bytes() {
        let dir = test_dir("identical");
        let file = small_config();
        let a = execute_run(&file, &dir, "a").unwrap();
        let b = execute_run(&file, &dir, "b").unwrap();
        let bytes_a = std::fs::read(&a.trace_path).unwrap();
        let bytes_b = std::fs::read(&b.trace_path).unwrap();
        assert_eq!(bytes_a, bytes_b);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_writes_per_seed_traces_and_aggregate() {
        let dir = test_dir("sweep");
        let mut file = small_config();
        file.noise.x = crate::problem::NoiseModel::Gaussian { sigma: 0.05 };
        let artifacts = execute_sweep(&file, 4, &dir).unwrap();
        assert_eq!(artifacts.trace_paths.len(), 4);
        for path in &artifacts.trace_paths {
            assert!(path.exists());
        }
        assert!(artifacts.aggregate_path.exists());
        assert_eq!(artifacts.summary.seeds, vec![5, 6, 7, 8]);
        assert_eq!(artifacts.aggregate_rows.len(), 5);
        let last = artifacts.aggregate_rows.last().unwrap();
        assert!(last.consensus_gap_max >= last.consensus_gap_mean);
        // All seeds share the instance, so the reference data agree.
        let m0 = Manifest::from_json(
            &std::fs::read_to_string(dir.join("seed5_manifest.json")).unwrap(),
        )
        .unwrap();
        let m1 = Manifest::from_json(
            &std::fs::read_to_string(dir.join("seed6_manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(m0.reference, m1.reference);
        assert_eq!(m0.config.problem.agent, m1.config.problem.agent);
        assert_ne!(m0.master_seed, m1.master_seed);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

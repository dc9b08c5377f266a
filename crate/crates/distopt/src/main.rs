//! Thin command-line front end over the `distopt` library: validate a
//! config, execute a run, sweep seeds, or print the reference solution.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use distopt::config::{self, ConfigFile, ModeName};
use distopt::output::{self, format_float};
use distopt::Error;

#[derive(Parser)]
#[command(name = "distopt")]
#[command(about = "Distributed consensus optimization with simultaneous parameter learning")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and fully validate a config file.
    Validate {
        /// Path to the TOML config.
        config: PathBuf,
    },
    /// Execute one run: writes trace, manifest, and summary files.
    Run {
        config: PathBuf,
        /// Override the configured run mode.
        #[arg(long)]
        mode: Option<String>,
        /// Output directory (default: $DISTOPT_OUT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the executable audit checks at every traced iteration.
        #[arg(long)]
        audit: bool,
    },
    /// Run one instance under several master seeds and aggregate the traces.
    Sweep {
        config: PathBuf,
        /// Number of consecutive master seeds to run.
        #[arg(long)]
        seeds: u64,
        /// Output directory (default: $DISTOPT_OUT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the centralized reference solution of the configured instance.
    Oracle {
        config: PathBuf,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("DISTOPT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn exit_code_for(error: &Error) -> u8 {
    match error.class() {
        "config-error" | "invalid-argument" | "dimension-mismatch" => 2,
        "oracle-failure" | "convergence-failure" | "not-strongly-convex" => 3,
        "io-error" => 4,
        _ => 1,
    }
}

fn load_with_overrides(
    path: &PathBuf,
    mode: Option<String>,
    audit: bool,
) -> Result<ConfigFile, Error> {
    let mut file = config::load(path)?;
    if let Some(mode) = mode {
        file.run.mode = mode.parse::<ModeName>()?;
    }
    if audit {
        file.run.audit = true;
    }
    Ok(file)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Validate { config: path } => {
            let file = config::load(&path)?;
            let run_config = config::resolve(&file)?;
            println!(
                "ok: {} agents, decision dim {}, parameter dim {}, mode {}, {} iterations",
                run_config.agent_count(),
                run_config.decision_dim(),
                run_config.parameter_dim(),
                run_config.mode.name(),
                run_config.iterations
            );
            Ok(())
        }
        Command::Run { config: path, mode, out, audit } => {
            let file = load_with_overrides(&path, mode, audit)?;
            let dir = out_dir(out);
            let label = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("run")
                .to_string();
            let artifacts = output::execute_run(&file, &dir, &label)?;
            let summary = &artifacts.trace.summary;
            println!("trace:    {}", artifacts.trace_path.display());
            println!("manifest: {}", artifacts.manifest_path.display());
            println!("summary:  {}", artifacts.summary_path.display());
            println!(
                "final: consensus_gap={} theta_error={} opt_gap={}",
                format_float(summary.final_consensus_gap),
                format_float(summary.final_theta_error),
                format_float(summary.final_opt_gap)
            );
            if let Some(residual) = summary.theta_hat_residual {
                println!("baseline handoff residual: {}", format_float(residual));
            }
            if summary.audited_records > 0 {
                println!(
                    "audit: {} records checked, {} with failures",
                    summary.audited_records, summary.audit_failures
                );
            }
            Ok(())
        }
        Command::Sweep { config: path, seeds, out } => {
            let file = config::load(&path)?;
            let dir = out_dir(out);
            let artifacts = output::execute_sweep(&file, seeds, &dir)?;
            println!("{} runs, aggregate: {}", seeds, artifacts.aggregate_path.display());
            let last = &artifacts.summary.final_row;
            println!(
                "final k={}: consensus_gap mean={} max={}",
                last.k,
                format_float(last.consensus_gap_mean),
                format_float(last.consensus_gap_max)
            );
            println!(
                "final k={}: theta_error   mean={} max={}",
                last.k,
                format_float(last.theta_error_mean),
                format_float(last.theta_error_max)
            );
            println!(
                "final k={}: opt_gap       mean={} max={}",
                last.k,
                format_float(last.opt_gap_mean),
                format_float(last.opt_gap_max)
            );
            Ok(())
        }
        Command::Oracle { config: path } => {
            let file = config::load(&path)?;
            let run_config = config::resolve(&file)?;
            let simulation = distopt::engine::Simulation::new(run_config)?;
            let reference = simulation.reference();
            let join = |v: &distopt::Vector| {
                v.iter().map(|x| format_float(*x)).collect::<Vec<_>>().join(", ")
            };
            println!("x_star     = [{}]", join(&reference.x_star));
            println!("theta_star = [{}]", join(&reference.theta_star));
            println!("f_star     = {}", format_float(reference.f_star));
            println!("tol        = {}", format_float(reference.tol));
            if simulation.singular_aggregate() {
                println!(
                    "note: aggregate quadratic term is singular; the solution set may be non-singleton"
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error [{}]: {error}", error.class());
            ExitCode::from(exit_code_for(&error))
        }
    }
}

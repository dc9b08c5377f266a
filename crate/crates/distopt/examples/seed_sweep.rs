//! Parallel seed sweep of one instance: per-seed traces plus cross-seed
//! mean/max aggregation at every traced iteration.
//!
//! ```bash
//! cargo run -p distopt --example seed_sweep
//! ```

use distopt::config;
use distopt::output;

const CONFIG: &str = r#"
[run]
iterations = 10000
trace_stride = 1000
master_seed = 100

[problem]
agents = 5
dimension = 2
family = "random_pd"
family_seed = 55

[noise]
x = { kind = "gaussian", sigma = 0.1 }
theta = { kind = "gaussian", sigma = 0.1 }
"#;

fn main() -> distopt::Result<()> {
    let file = config::parse_str(CONFIG)?;
    let out_dir = std::env::temp_dir().join("distopt_seed_sweep_example");
    let artifacts = output::execute_sweep(&file, 8, &out_dir)?;

    println!("8 seeds, artifacts under {}\n", out_dir.display());
    println!(
        "{:>7} {:>13} {:>13} {:>13} {:>13}",
        "k", "theta_mean", "theta_max", "gap_mean", "gap_max"
    );
    for row in &artifacts.aggregate_rows {
        println!(
            "{:>7} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e}",
            row.k, row.theta_error_mean, row.theta_error_max, row.opt_gap_mean, row.opt_gap_max
        );
    }
    let last = &artifacts.summary.final_row;
    println!(
        "\nfinal consensus gap across seeds: mean = {:.3e}, max = {:.3e}",
        last.consensus_gap_mean, last.consensus_gap_max
    );
    Ok(())
}

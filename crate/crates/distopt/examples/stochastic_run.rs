//! The full scheme under stochastic gradients: agents jointly learn the
//! unknown parameter while optimizing, over time-varying graphs.
//!
//! ```bash
//! cargo run -p distopt --example stochastic_run
//! ```

use distopt::config;
use distopt::engine;

const CONFIG: &str = r#"
[run]
mode = "misspecified_stochastic"
iterations = 50000
trace_stride = 5000
master_seed = 21

[graph]
kind = "random_connected"
edge_prob = 0.4

[problem]
agents = 5
dimension = 3
family = "random_pd"
family_seed = 8

[learning]
parameter_dimension = 2
rows = 3

[noise]
x = { kind = "gaussian", sigma = 0.1 }
theta = { kind = "gaussian", sigma = 0.1 }

[sets]
default_half_width = 2.0
"#;

fn main() -> distopt::Result<()> {
    let file = config::parse_str(CONFIG)?;
    let trace = engine::run(config::resolve(&file)?)?;

    println!("{:>7} {:>13} {:>13} {:>13}", "k", "consensus", "theta_error", "opt_gap");
    for record in &trace.records {
        println!(
            "{:>7} {:>13.6e} {:>13.6e} {:>13.6e}",
            record.k, record.consensus_gap, record.theta_error, record.opt_gap
        );
    }
    println!(
        "\nfinal: consensus_gap = {:.3e}, theta_error = {:.3e}, opt_gap = {:.3e}",
        trace.summary.final_consensus_gap,
        trace.summary.final_theta_error,
        trace.summary.final_opt_gap
    );
    Ok(())
}

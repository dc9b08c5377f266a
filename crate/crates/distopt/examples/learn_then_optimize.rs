//! The traditional sequential baseline against the joint scheme at an equal
//! iteration budget. Terminating the learning phase early freezes a biased
//! estimate, and the decision phase then solves the wrong problem; the joint
//! scheme keeps improving both.
//!
//! ```bash
//! cargo run -p distopt --example learn_then_optimize
//! ```

use distopt::config;
use distopt::engine;

const BASE: &str = r#"
[run]
iterations = 20000
trace_stride = 2000
master_seed = 17

[problem]
agents = 4
dimension = 2
family = "random_pd"
family_seed = 3

[learning]
parameter_dimension = 2
rows = 2

[init]
theta_half_width = 4.0

[noise]
x = { kind = "gaussian", sigma = 0.05 }
theta = { kind = "gaussian", sigma = 0.1 }
"#;

fn main() -> distopt::Result<()> {
    let mut joint_file = config::parse_str(BASE)?;
    joint_file.run.mode = config::ModeName::MisspecifiedStochastic;
    let joint = engine::run(config::resolve(&joint_file)?)?;

    let mut baseline_file = config::parse_str(BASE)?;
    baseline_file.run.mode = config::ModeName::SequentialBaseline;
    baseline_file.run.learn_iters = 50;
    let baseline = engine::run(config::resolve(&baseline_file)?)?;

    let m = 4.0;
    println!("equal budget of {} iterations:", joint.summary.iterations);
    println!(
        "  joint scheme    : final rms theta error = {:.3e}, final opt_gap = {:.3e}",
        (joint.summary.final_theta_error / m).sqrt(),
        joint.summary.final_opt_gap
    );
    println!(
        "  learn-then-opt  : handoff ||theta_hat - theta_star|| = {:.3e}, final opt_gap = {:.3e}",
        baseline.summary.theta_hat_residual.unwrap(),
        baseline.summary.final_opt_gap
    );
    println!(
        "\nthe baseline froze its estimate after {} learning iterations and cannot recover;",
        baseline.summary.learn_iters.unwrap()
    );
    println!("its optimality gap stalls at the bias induced by the misspecified parameter.");
    Ok(())
}

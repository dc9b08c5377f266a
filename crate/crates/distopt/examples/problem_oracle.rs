//! Build an explicit problem instance, certify its constants, and solve the
//! centralized reference problem the distributed scheme is measured against.
//!
//! ```bash
//! cargo run -p distopt --example problem_oracle
//! ```

use distopt::problem::{
    compute_constants, AgentObjective, LearningSpec, NoiseModel, ReferenceSolver,
};
use distopt::sets::{ConvexSet, SetFamily};
use distopt::{Matrix, Vector};

fn main() -> distopt::Result<()> {
    // Two agents with different curvature, coupled to a 2-d parameter.
    let objectives = vec![
        AgentObjective::new(
            Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]),
            Vector::from_vec(vec![0.2, -0.1]),
        )?,
        AgentObjective::new(
            Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.5]),
            Matrix::from_row_slice(2, 2, &[-0.2, 0.1, 0.0, 0.4]),
            Vector::from_vec(vec![-0.3, 0.25]),
        )?,
    ];
    let sets = SetFamily::new(vec![
        ConvexSet::Box {
            lower: Vector::from_vec(vec![-1.0, -1.0]),
            upper: Vector::from_vec(vec![1.0, 1.0]),
        },
        ConvexSet::Box {
            lower: Vector::from_vec(vec![-0.8, -1.2]),
            upper: Vector::from_vec(vec![1.2, 0.8]),
        },
    ])?;
    // h(theta) = ||C theta - d||^2 / 2 with an overdetermined design.
    let learning = LearningSpec::new(
        Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]),
        Vector::from_vec(vec![0.4, -0.6, 0.1]),
        ConvexSet::FullSpace { dim: 2 },
    )?;

    let noise = NoiseModel::Gaussian { sigma: 0.1 };
    let constants = compute_constants(&objectives, &sets, &learning, &noise, &noise)?;
    println!("certified constants:");
    println!("  coupling Lipschitz (max ||B_i||)  = {:.6}", constants.coupling_lipschitz);
    println!("  strong convexity kappa            = {:.6}", constants.strong_convexity);
    println!("  learning gradient Lipschitz       = {:.6}", constants.learning_lipschitz);
    println!("  largest set diameter              = {:.6}", constants.set_diameter);
    println!("  gradient bound over the hull      = {:.6}", constants.hull_grad_bound);
    println!("  gradient bound over intersection  = {:.6}", constants.intersection_grad_bound);
    println!("  noise second-moment roots         = {:.6} / {:.6}",
        constants.x_noise_bound, constants.theta_noise_bound);

    let reference = ReferenceSolver::with_tol(1e-10).solve(&objectives, &sets, &learning)?;
    println!("\nreference solution:");
    println!("  theta_star = ({:.8}, {:.8})", reference.theta_star[0], reference.theta_star[1]);
    println!("  x_star     = ({:.8}, {:.8})", reference.x_star[0], reference.x_star[1]);
    println!("  f_star     = {:.10}", reference.f_star);

    // The closed form agrees with the iterative learning solve.
    let closed = learning.theta_star_closed_form()?;
    let iterative = learning.theta_star_projected_gradient(1e-12, 1_000_000)?;
    println!("\nlearning solve agreement: {:.3e}", (closed - iterative).norm());
    Ok(())
}

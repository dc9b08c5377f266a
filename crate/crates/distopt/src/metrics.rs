//! Per-iteration diagnostics: consensus gap, learning error, the joint
//! distance function, optimality gap, and the executable audit checks that
//! accompany a traced run.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::WeightMatrix;
use crate::problem::{aggregate_value, AgentObjective, ReferenceSolution};
use crate::sets::{ConvexSet, SetFamily};
use crate::Vector;

/// Joint squared-distance function `sum_i (||x_i - x_ref||^2 +
/// ||theta_i - theta_ref||^2)`; the quantity the scheme drives down.
pub fn lyapunov(x: &[Vector], theta: &[Vector], x_ref: &Vector, theta_ref: &Vector) -> f64 {
    let mut total = 0.0;
    for xi in x {
        total += (xi - x_ref).norm_squared();
    }
    for ti in theta {
        total += (ti - theta_ref).norm_squared();
    }
    total
}

/// Largest pairwise distance among the agents' decision iterates.
pub fn consensus_gap(points: &[Vector]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            worst = worst.max((&points[i] - &points[j]).norm());
        }
    }
    worst
}

/// Aggregate squared learning error `sum_i ||theta_i - theta_star||^2`.
pub fn theta_error(theta: &[Vector], theta_star: &Vector) -> f64 {
    theta.iter().map(|t| (t - theta_star).norm_squared()).sum()
}

/// Mean of the agents' iterates.
pub fn mean_point(points: &[Vector]) -> Vector {
    let mut mean = Vector::zeros(points[0].len());
    for p in points {
        mean += p;
    }
    mean / points.len() as f64
}

/// Optimality gap `f(z, theta_star) - f_star` at `z`, the projection of the
/// iterate average onto the set intersection. Small negative values (the
/// reference value is itself an iterative solve) are clamped to zero and
/// flagged.
pub struct OptimalityGap {
    pub value: f64,
    pub clamped: bool,
    pub mean: Vector,
    pub projected_mean: Vector,
}

pub fn optimality_gap(
    objectives: &[AgentObjective],
    sets: &SetFamily,
    reference: &ReferenceSolution,
    x: &[Vector],
    projection_tol: f64,
    projection_max_sweeps: usize,
) -> Result<OptimalityGap> {
    let mean = mean_point(x);
    let projected_mean = sets.project_intersection(&mean, projection_tol, projection_max_sweeps)?;
    let raw = aggregate_value(objectives, &projected_mean, &reference.theta_star)? - reference.f_star;
    let clamped = raw < 0.0;
    Ok(OptimalityGap {
        value: raw.max(0.0),
        clamped,
        mean,
        projected_mean,
    })
}

/// Which stage of a run a record belongs to. Joint for the simultaneous
/// scheme; the sequential baseline reports its two stages separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunPhase {
    Joint,
    Learning,
    Optimizing,
}

impl std::fmt::Display for RunPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunPhase::Joint => write!(f, "joint"),
            RunPhase::Learning => write!(f, "learn"),
            RunPhase::Optimizing => write!(f, "optimize"),
        }
    }
}

/// Outcome of one audit check at one traced iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CheckOutcome {
    Pass,
    /// The inequality was violated by `excess` beyond its slack.
    Fail { excess: f64 },
    Skipped { reason: String },
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, CheckOutcome::Pass)
    }

    pub fn failed(&self) -> bool {
        matches!(self, CheckOutcome::Fail { .. })
    }

    fn tag(&self) -> &'static str {
        match self {
            CheckOutcome::Pass => "pass",
            CheckOutcome::Fail { .. } => "fail",
            CheckOutcome::Skipped { .. } => "skip",
        }
    }
}

/// The audit checks executed while stepping away from a traced iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Exact identity for weighted averages, applied to each mixing row.
    pub averaging_identity: CheckOutcome,
    /// Mixing never widens the largest pairwise distance.
    pub consensus_contraction: CheckOutcome,
    /// Noise-free learning contraction factor `1 - 2 gamma kappa +
    /// gamma^2 R^2` per step.
    pub learning_descent: CheckOutcome,
    /// Distance-to-intersection bound through the interior-ball constant.
    pub intersection_bound: CheckOutcome,
    /// Post-step feasibility of every iterate.
    pub feasibility: CheckOutcome,
}

impl AuditReport {
    pub fn all_passed_or_skipped(&self) -> bool {
        !self.iter().any(|(_, c)| c.failed())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &CheckOutcome)> {
        [
            ("avg-id", &self.averaging_identity),
            ("contract", &self.consensus_contraction),
            ("descent", &self.learning_descent),
            ("bound", &self.intersection_bound),
            ("feas", &self.feasibility),
        ]
        .into_iter()
    }

    /// Compact flags column for the trace file, e.g.
    /// `avg-id=pass;contract=pass;descent=skip;bound=pass;feas=pass`.
    pub fn flags(&self) -> String {
        self.iter()
            .map(|(name, outcome)| format!("{name}={}", outcome.tag()))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Absolute slack for the exact averaging identity.
pub const AVERAGING_IDENTITY_TOL: f64 = 1e-10;
/// Absolute slack for the per-step learning contraction.
pub const LEARNING_DESCENT_SLACK: f64 = 1e-12;
/// Absolute slack for the intersection-distance bound.
pub const INTERSECTION_BOUND_SLACK: f64 = 1e-10;
/// Feasibility tolerance for post-step iterates.
pub const FEASIBILITY_TOL: f64 = 1e-10;
/// Rounding slack for the mixing contraction comparison.
pub const CONTRACTION_SLACK: f64 = 1e-12;

/// For each row `lambda` of the weights: `||sum_j lambda_j x_j - c||^2 =
/// sum_j lambda_j ||x_j - c||^2 - (1/2) sum_{j,l} lambda_j lambda_l
/// ||x_j - x_l||^2`, checked against the already-computed averages `v`.
pub fn check_averaging_identity(
    weights: &WeightMatrix,
    x: &[Vector],
    v: &[Vector],
    probe: &Vector,
) -> CheckOutcome {
    let mut worst = 0.0_f64;
    for (i, avg) in v.iter().enumerate() {
        let lhs = (avg - probe).norm_squared();
        let mut weighted = 0.0;
        for (j, xj) in x.iter().enumerate() {
            weighted += weights.entry(i, j) * (xj - probe).norm_squared();
        }
        let mut cross = 0.0;
        for (j, xj) in x.iter().enumerate() {
            for (l, xl) in x.iter().enumerate() {
                cross += weights.entry(i, j) * weights.entry(i, l) * (xj - xl).norm_squared();
            }
        }
        worst = worst.max((lhs - (weighted - 0.5 * cross)).abs());
    }
    if worst <= AVERAGING_IDENTITY_TOL {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail { excess: worst - AVERAGING_IDENTITY_TOL }
    }
}

/// Doubly stochastic mixing is nonexpansive in the consensus seminorm.
pub fn check_consensus_contraction(x: &[Vector], v: &[Vector]) -> CheckOutcome {
    let before = consensus_gap(x);
    let after = consensus_gap(v);
    if after <= before + CONTRACTION_SLACK {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail { excess: after - before - CONTRACTION_SLACK }
    }
}

/// Per-step noise-free learning contraction:
/// `sum_i ||theta_i' - theta*||^2 <= (1 - 2 gamma kappa + gamma^2 R^2) *
/// sum_i ||theta_i - theta*||^2 + slack`, applicable once
/// `gamma <= kappa / R^2`.
#[allow(clippy::too_many_arguments)]
pub fn check_learning_descent(
    theta_before: &[Vector],
    theta_after: &[Vector],
    theta_star: &Vector,
    gamma: f64,
    kappa: f64,
    grad_lipschitz: f64,
    theta_updated: bool,
    noise_free: bool,
) -> CheckOutcome {
    if !theta_updated {
        return CheckOutcome::Skipped { reason: "learning update not active".into() };
    }
    if !noise_free {
        return CheckOutcome::Skipped { reason: "stochastic learning gradients".into() };
    }
    if gamma > kappa / (grad_lipschitz * grad_lipschitz) {
        return CheckOutcome::Skipped { reason: "stepsize above kappa / R^2".into() };
    }
    let factor = 1.0 - 2.0 * gamma * kappa + gamma * gamma * grad_lipschitz * grad_lipschitz;
    let before = theta_error(theta_before, theta_star);
    let after = theta_error(theta_after, theta_star);
    if after <= factor * before + LEARNING_DESCENT_SLACK {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail { excess: after - factor * before - LEARNING_DESCENT_SLACK }
    }
}

/// Distance-to-intersection bound at a traced iterate:
/// `sum_j ||x_j - z|| <= m (1 + m D / delta) max_{j,l} ||x_j - x_l||`
/// where `z` is the projected iterate average and `delta` the interior-ball
/// clearance of the intersection.
pub fn check_intersection_bound(
    x: &[Vector],
    projected_mean: &Vector,
    set_diameter: f64,
    interior: Option<&(Vector, f64)>,
    unavailable_reason: &str,
) -> CheckOutcome {
    let Some((_, delta)) = interior else {
        return CheckOutcome::Skipped { reason: unavailable_reason.to_string() };
    };
    let m = x.len() as f64;
    let lhs: f64 = x.iter().map(|xi| (xi - projected_mean).norm()).sum();
    let rhs = m * (1.0 + m * set_diameter / delta) * consensus_gap(x);
    if lhs <= rhs + INTERSECTION_BOUND_SLACK {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail { excess: lhs - rhs - INTERSECTION_BOUND_SLACK }
    }
}

/// Every post-step iterate must sit (numerically) inside its set.
pub fn check_feasibility(
    x: &[Vector],
    theta: &[Vector],
    sets: &SetFamily,
    theta_set: &ConvexSet,
) -> Result<CheckOutcome> {
    let mut worst = 0.0_f64;
    for (i, xi) in x.iter().enumerate() {
        worst = worst.max(sets.set(i).distance(xi)?);
    }
    for ti in theta {
        worst = worst.max(theta_set.distance(ti)?);
    }
    Ok(if worst <= FEASIBILITY_TOL {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail { excess: worst - FEASIBILITY_TOL }
    })
}

/// One traced row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u64,
    pub alpha: f64,
    pub gamma: f64,
    pub consensus_gap: f64,
    pub theta_error: f64,
    pub lyapunov: f64,
    /// `f(z, theta_star) - f_star`, clamped at zero.
    pub opt_gap: f64,
    pub opt_gap_clamped: bool,
    /// Illustration column: `f(z, mean theta) - f_star`, unclamped.
    pub opt_gap_mean_theta: f64,
    /// Iterate average `y`.
    pub mean_x: Vector,
    /// Projected average `z`.
    pub projected_mean: Vector,
    pub phase: RunPhase,
    pub audit: Option<AuditReport>,
}

impl IterationRecord {
    /// The flags column of the trace file; `-` when the step was not audited.
    pub fn audit_flags(&self) -> String {
        match &self.audit {
            Some(report) => report.flags(),
            Option::None => "-".to_string(),
        }
    }
}

/// Assemble the metric row for the state `(x, theta)` at iteration `k`.
#[allow(clippy::too_many_arguments)]
pub fn make_record(
    k: u64,
    alpha: f64,
    gamma: f64,
    x: &[Vector],
    theta: &[Vector],
    objectives: &[AgentObjective],
    sets: &SetFamily,
    reference: &ReferenceSolution,
    phase: RunPhase,
    projection_tol: f64,
    projection_max_sweeps: usize,
) -> Result<IterationRecord> {
    let gap = optimality_gap(objectives, sets, reference, x, projection_tol, projection_max_sweeps)?;
    let mean_theta = mean_point(theta);
    let opt_gap_mean_theta =
        aggregate_value(objectives, &gap.projected_mean, &mean_theta)? - reference.f_star;
    Ok(IterationRecord {
        k,
        alpha,
        gamma,
        consensus_gap: consensus_gap(x),
        theta_error: theta_error(theta, &reference.theta_star),
        lyapunov: lyapunov(x, theta, &reference.x_star, &reference.theta_star),
        opt_gap: gap.value,
        opt_gap_clamped: gap.clamped,
        opt_gap_mean_theta,
        mean_x: gap.mean,
        projected_mean: gap.projected_mean,
        phase,
        audit: Option::None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Topology, TopologyKind};
    use crate::problem::ReferenceSolver;
    use crate::problem::{AgentObjective, LearningSpec};
    use crate::rng;
    use crate::Matrix;
    use rand::Rng;

    fn vecn(values: &[f64]) -> Vector {
        Vector::from_vec(values.to_vec())
    }

    #[test]
    fn lyapunov_cases() {
        let x = vec![vecn(&[1.0, 0.0])];
        let theta = vec![vecn(&[0.5])];
        assert_eq!(lyapunov(&x, &theta, &x[0], &theta[0]), 0.0);
        assert_eq!(lyapunov(&x, &theta, &vecn(&[0.0, 0.0]), &theta[0]), 1.0);

        // Brute-force term-by-term oracle on a random state.
        let mut rng = rng::stream(91, &[0x70]);
        let m = 5;
        let xs: Vec<Vector> =
            (0..m).map(|_| Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0))).collect();
        let thetas: Vec<Vector> =
            (0..m).map(|_| Vector::from_fn(2, |_, _| rng.random_range(-2.0..2.0))).collect();
        let x_ref = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let t_ref = Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let mut oracle = 0.0;
        for i in 0..m {
            for c in 0..3 {
                oracle += (xs[i][c] - x_ref[c]) * (xs[i][c] - x_ref[c]);
            }
            for c in 0..2 {
                oracle += (thetas[i][c] - t_ref[c]) * (thetas[i][c] - t_ref[c]);
            }
        }
        assert!((lyapunov(&xs, &thetas, &x_ref, &t_ref) - oracle).abs() < 1e-12);
    }

    #[test]
    fn consensus_gap_cases() {
        assert_eq!(consensus_gap(&[vecn(&[3.0, 3.0])]), 0.0);
        let equal = vec![vecn(&[1.0, 2.0]); 4];
        assert_eq!(consensus_gap(&equal), 0.0);
        assert_eq!(consensus_gap(&[vecn(&[0.0, 0.0]), vecn(&[3.0, 4.0])]), 5.0);

        // Ordered-pair oracle on a random cloud.
        let mut rng = rng::stream(92, &[0x71]);
        let points: Vec<Vector> =
            (0..5).map(|_| Vector::from_fn(3, |_, _| rng.random_range(-4.0..4.0))).collect();
        let mut oracle = 0.0_f64;
        for a in &points {
            for b in &points {
                oracle = oracle.max((a - b).norm());
            }
        }
        assert_eq!(consensus_gap(&points), oracle);
    }

    #[test]
    fn optimality_gap_hand_evaluable() {
        // Single agent, f = x^2/2 on [-1, 1]: at x = 0.2 the gap is 0.02.
        let objective = AgentObjective::new(
            Matrix::identity(1, 1),
            Matrix::zeros(1, 1),
            Vector::zeros(1),
        )
        .unwrap();
        let sets = SetFamily::new(vec![ConvexSet::Box {
            lower: vecn(&[-1.0]),
            upper: vecn(&[1.0]),
        }])
        .unwrap();
        let learning = LearningSpec::new(
            Matrix::identity(1, 1),
            Vector::zeros(1),
            ConvexSet::FullSpace { dim: 1 },
        )
        .unwrap();
        let reference = ReferenceSolver::with_tol(1e-10)
            .solve(std::slice::from_ref(&objective), &sets, &learning)
            .unwrap();
        let gap = optimality_gap(&[objective], &sets, &reference, &[vecn(&[0.2])], 1e-10, 100)
            .unwrap();
        assert!((gap.value - 0.02).abs() < 1e-9);
        assert!(!gap.clamped);

        // At the solution the gap collapses to the oracle tolerance.
        let solution_state = [reference.x_star.clone()];
        let gap = optimality_gap(
            &[AgentObjective::new(
                Matrix::identity(1, 1),
                Matrix::zeros(1, 1),
                Vector::zeros(1),
            )
            .unwrap()],
            &sets,
            &reference,
            &solution_state,
            1e-10,
            100,
        )
        .unwrap();
        assert!(gap.value.abs() <= reference.tol);
    }

    #[test]
    fn averaging_identity_holds_for_mixing_rows() {
        let mut rng = rng::stream(93, &[0x72]);
        for seed in 0..200u64 {
            let m = 1 + (seed as usize % 6);
            let topo = Topology::generate(
                &TopologyKind::RandomConnected { extra_edge_prob: 0.4 },
                m,
                0,
                seed,
            )
            .unwrap();
            let weights = topo.metropolis_weights().unwrap();
            let xs: Vec<Vector> =
                (0..m).map(|_| Vector::from_fn(3, |_, _| rng.random_range(-5.0..5.0))).collect();
            let v: Vec<Vector> = (0..m)
                .map(|i| {
                    let mut avg = Vector::zeros(3);
                    for (j, xj) in xs.iter().enumerate() {
                        avg += weights.entry(i, j) * xj;
                    }
                    avg
                })
                .collect();
            let probe = Vector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let outcome = check_averaging_identity(&weights, &xs, &v, &probe);
            assert!(outcome.passed(), "{outcome:?}");
        }
    }

    #[test]
    fn contraction_check_flags_expansion() {
        let x = vec![vecn(&[0.0]), vecn(&[1.0])];
        let v_good = vec![vecn(&[0.4]), vecn(&[0.6])];
        assert!(check_consensus_contraction(&x, &v_good).passed());
        let v_bad = vec![vecn(&[-1.0]), vecn(&[2.0])];
        assert!(check_consensus_contraction(&x, &v_bad).failed());
    }

    #[test]
    fn intersection_bound_skip_and_pass() {
        let x = vec![vecn(&[0.2, 0.2]), vecn(&[0.4, 0.3])];
        let z = vecn(&[0.3, 0.25]);
        let skipped = check_intersection_bound(&x, &z, 1.0, Option::None, "no interior point");
        assert!(matches!(skipped, CheckOutcome::Skipped { .. }));
        let interior = (vecn(&[0.5, 0.5]), 0.5);
        let outcome = check_intersection_bound(&x, &z, 2.0, Some(&interior), "");
        assert!(outcome.passed(), "{outcome:?}");
    }

    #[test]
    fn flags_format_is_stable() {
        let report = AuditReport {
            averaging_identity: CheckOutcome::Pass,
            consensus_contraction: CheckOutcome::Pass,
            learning_descent: CheckOutcome::Skipped { reason: "x".into() },
            intersection_bound: CheckOutcome::Fail { excess: 1.0 },
            feasibility: CheckOutcome::Pass,
        };
        assert_eq!(
            report.flags(),
            "avg-id=pass;contract=pass;descent=skip;bound=fail;feas=pass"
        );
        assert!(!report.all_passed_or_skipped());
    }
}

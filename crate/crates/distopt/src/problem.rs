//! Agent objectives, the learning metric, stochastic gradient oracles, and
//! certified problem constants.
//!
//! Objectives live in a quadratic family `f_i(x, th) = x'Q_i x / 2 +
//! (B_i th + b_i)'x` so that every structural property the scheme relies on
//! (convexity in `x`, Lipschitz continuity of the gradient in `th`, strong
//! convexity of the learning metric) is computable from the data instead of
//! being asserted. The learning metric is `h(th) = ||C th - d||^2 / 2` with a
//! full-column-rank design matrix. Gradient noise is additive on the exact
//! gradients, which realizes the stochastic errors directly and keeps their
//! moments exactly controllable.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sets::{ConvexSet, SetFamily};
use crate::{Matrix, Vector};

/// Spectral norm `||M||_2` via the Gram matrix.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max).max(0.0).sqrt()
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_bounds(m: &Matrix) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// One agent's objective `f_i(x, th) = x'Qx/2 + (B th + b)'x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentObjective {
    quadratic: Matrix,
    coupling: Matrix,
    linear: Vector,
}

/// Eigenvalue floor below which a quadratic term is rejected as non-convex.
pub const PSD_FLOOR: f64 = -1e-10;

impl AgentObjective {
    /// Build and certify an objective: `quadratic` must be symmetric positive
    /// semidefinite (merely convex objectives, with singular `quadratic`, are
    /// first-class citizens).
    pub fn new(quadratic: Matrix, coupling: Matrix, linear: Vector) -> Result<Self> {
        let n = quadratic.nrows();
        if quadratic.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "quadratic term",
                expected: n,
                actual: quadratic.ncols(),
            });
        }
        if linear.len() != n {
            return Err(Error::DimensionMismatch {
                context: "linear term",
                expected: n,
                actual: linear.len(),
            });
        }
        if coupling.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "coupling term rows",
                expected: n,
                actual: coupling.nrows(),
            });
        }
        let asym = (&quadratic - quadratic.transpose()).norm();
        if asym > 1e-9 * (1.0 + quadratic.norm()) {
            return Err(Error::InvalidArgument(format!(
                "quadratic term must be symmetric (asymmetry norm {asym:.3e})"
            )));
        }
        let (eig_min, _) = symmetric_eigen_bounds(&quadratic);
        if eig_min < PSD_FLOOR {
            return Err(Error::InvalidArgument(format!(
                "quadratic term must be positive semidefinite; smallest eigenvalue {eig_min:.3e}"
            )));
        }
        Ok(Self { quadratic, coupling, linear })
    }

    pub fn dim(&self) -> usize {
        self.quadratic.nrows()
    }

    pub fn parameter_dim(&self) -> usize {
        self.coupling.ncols()
    }

    pub fn quadratic(&self) -> &Matrix {
        &self.quadratic
    }

    pub fn coupling(&self) -> &Matrix {
        &self.coupling
    }

    pub fn linear(&self) -> &Vector {
        &self.linear
    }

    fn check_dims(&self, x: &Vector, theta: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "objective decision input",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        if theta.len() != self.parameter_dim() {
            return Err(Error::DimensionMismatch {
                context: "objective parameter input",
                expected: self.parameter_dim(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &Vector, theta: &Vector) -> Result<f64> {
        self.check_dims(x, theta)?;
        let qx = &self.quadratic * x;
        let affine = &self.coupling * theta + &self.linear;
        Ok(0.5 * x.dot(&qx) + affine.dot(x))
    }

    /// Exact gradient `Qx + B th + b`.
    pub fn grad_x(&self, x: &Vector, theta: &Vector) -> Result<Vector> {
        self.check_dims(x, theta)?;
        Ok(&self.quadratic * x + &self.coupling * theta + &self.linear)
    }

    /// Exact gradient plus one noise draw from the given model.
    pub fn sample_grad_x(
        &self,
        x: &Vector,
        theta: &Vector,
        noise: &NoiseModel,
        rng: &mut impl Rng,
    ) -> Result<Vector> {
        let mut g = self.grad_x(x, theta)?;
        noise.add_sample(&mut g, rng);
        Ok(g)
    }

    /// Lipschitz constant of `th |-> grad_x f(x, th)`: `||B||_2`.
    pub fn coupling_lipschitz(&self) -> f64 {
        spectral_norm(&self.coupling)
    }
}

/// Additive zero-mean gradient noise, drawn independently per agent, per
/// iteration, and per coordinate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::None => Ok(()),
            NoiseModel::Gaussian { sigma } => {
                if *sigma < 0.0 || !sigma.is_finite() {
                    Err(Error::InvalidArgument(format!(
                        "gaussian noise sigma must be a nonnegative finite number, got {sigma}"
                    )))
                } else {
                    Ok(())
                }
            }
            NoiseModel::Uniform { half_width } => {
                if *half_width < 0.0 || !half_width.is_finite() {
                    Err(Error::InvalidArgument(format!(
                        "uniform noise half_width must be a nonnegative finite number, got {half_width}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseModel::None)
    }

    /// Add one draw in place. The `none` model consumes no generator state,
    /// so noiseless runs and zero-noise configurations share streams exactly.
    pub fn add_sample(&self, target: &mut Vector, rng: &mut impl Rng) {
        match self {
            NoiseModel::None => {}
            NoiseModel::Gaussian { sigma } => {
                let normal = Normal::new(0.0, *sigma).expect("validated sigma");
                for value in target.iter_mut() {
                    *value += normal.sample(rng);
                }
            }
            NoiseModel::Uniform { half_width } => {
                if *half_width > 0.0 {
                    for value in target.iter_mut() {
                        *value += rng.random_range(-half_width..=*half_width);
                    }
                }
            }
        }
    }

    pub fn sample(&self, dim: usize, rng: &mut impl Rng) -> Vector {
        let mut v = Vector::zeros(dim);
        self.add_sample(&mut v, rng);
        v
    }

    /// Tight bound on `E||w||^2` for a `dim`-dimensional draw.
    pub fn second_moment_bound(&self, dim: usize) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } => dim as f64 * sigma * sigma,
            NoiseModel::Uniform { half_width } => dim as f64 * half_width * half_width / 3.0,
        }
    }
}

/// The learning problem: minimize `h(th) = ||C th - d||^2 / 2` over a closed
/// convex parameter set. Strong convexity (`kappa > 0`) is certified from the
/// design matrix at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningSpec {
    design: Matrix,
    target: Vector,
    theta_set: ConvexSet,
    kappa: f64,
    grad_lipschitz: f64,
}

impl LearningSpec {
    pub fn new(design: Matrix, target: Vector, theta_set: ConvexSet) -> Result<Self> {
        if target.len() != design.nrows() {
            return Err(Error::DimensionMismatch {
                context: "learning target",
                expected: design.nrows(),
                actual: target.len(),
            });
        }
        theta_set.validate()?;
        if theta_set.dim() != design.ncols() {
            return Err(Error::DimensionMismatch {
                context: "learning parameter set",
                expected: design.ncols(),
                actual: theta_set.dim(),
            });
        }
        let gram = design.transpose() * &design;
        let (kappa, grad_lipschitz) = symmetric_eigen_bounds(&gram);
        if kappa <= 1e-10 {
            return Err(Error::NotStronglyConvex(format!(
                "design matrix is rank deficient: smallest Gram eigenvalue {kappa:.3e}; \
                 the learning metric must be strongly convex"
            )));
        }
        Ok(Self { design, target, theta_set, kappa, grad_lipschitz })
    }

    pub fn parameter_dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    pub fn theta_set(&self) -> &ConvexSet {
        &self.theta_set
    }

    /// Strong convexity constant: smallest eigenvalue of `C'C`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Gradient Lipschitz constant: largest eigenvalue of `C'C`.
    pub fn grad_lipschitz(&self) -> f64 {
        self.grad_lipschitz
    }

    fn check_theta(&self, theta: &Vector) -> Result<()> {
        if theta.len() != self.parameter_dim() {
            return Err(Error::DimensionMismatch {
                context: "learning parameter input",
                expected: self.parameter_dim(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, theta: &Vector) -> Result<f64> {
        self.check_theta(theta)?;
        let residual = &self.design * theta - &self.target;
        Ok(0.5 * residual.norm_squared())
    }

    /// Exact gradient `C'(C th - d)`.
    pub fn grad(&self, theta: &Vector) -> Result<Vector> {
        self.check_theta(theta)?;
        Ok(self.design.transpose() * (&self.design * theta - &self.target))
    }

    pub fn sample_grad(
        &self,
        theta: &Vector,
        noise: &NoiseModel,
        rng: &mut impl Rng,
    ) -> Result<Vector> {
        let mut g = self.grad(theta)?;
        noise.add_sample(&mut g, rng);
        Ok(g)
    }

    /// Unconstrained minimizer `(C'C)^{-1} C'd`.
    pub fn theta_star_closed_form(&self) -> Result<Vector> {
        let gram = self.design.transpose() * &self.design;
        let rhs = self.design.transpose() * &self.target;
        nalgebra::linalg::Cholesky::new(gram)
            .map(|chol| chol.solve(&rhs))
            .ok_or_else(|| {
                Error::NotStronglyConvex("Gram matrix is not positive definite".into())
            })
    }

    /// Deterministic projected gradient on `h` with fixed step `1/R` until
    /// the step displacement drops below `displacement_tol`.
    pub fn theta_star_projected_gradient(
        &self,
        displacement_tol: f64,
        max_iters: usize,
    ) -> Result<Vector> {
        let step = 1.0 / self.grad_lipschitz;
        let mut theta = self.theta_set.project(&Vector::zeros(self.parameter_dim()))?;
        for _ in 0..max_iters {
            let next = self.theta_set.project(&(&theta - step * self.grad(&theta)?))?;
            let displacement = (&next - &theta).norm();
            theta = next;
            if displacement < displacement_tol {
                return Ok(theta);
            }
        }
        Err(Error::OracleFailure(format!(
            "learning solve did not reach displacement {displacement_tol:.3e} within {max_iters} iterations"
        )))
    }

    /// The true parameter: closed form on the full space, projected gradient
    /// otherwise.
    pub fn theta_star(&self, displacement_tol: f64, max_iters: usize) -> Result<Vector> {
        match self.theta_set {
            ConvexSet::FullSpace { .. } => self.theta_star_closed_form(),
            _ => self.theta_star_projected_gradient(displacement_tol, max_iters),
        }
    }
}

/// Certified constants of one problem instance. All bounds are computed from
/// the problem data; none is assumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Largest coupling Lipschitz constant over agents.
    pub coupling_lipschitz: f64,
    /// Strong convexity constant of the learning metric.
    pub strong_convexity: f64,
    /// Gradient Lipschitz constant of the learning metric.
    pub learning_lipschitz: f64,
    /// Largest constraint-set diameter over agents.
    pub set_diameter: f64,
    /// Bound on the gradient norms over the hull of the union of the
    /// constraint sets, at the true parameter.
    pub hull_grad_bound: f64,
    /// Bound on the gradient norms over the set intersection, at the true
    /// parameter.
    pub intersection_grad_bound: f64,
    /// Root second-moment bound of the decision-gradient noise.
    pub x_noise_bound: f64,
    /// Root second-moment bound of the learning-gradient noise.
    pub theta_noise_bound: f64,
}

/// Upper bound on `max_{x in set} ||Qx + c0||`. Exact (via extreme points)
/// for boxes and simplices; center-plus-radius bound for balls.
fn grad_norm_bound_over_set(
    objective: &AgentObjective,
    set: &ConvexSet,
    affine: &Vector,
) -> Result<f64> {
    match set {
        ConvexSet::Box { .. } | ConvexSet::Simplex { .. } => {
            let mut worst = 0.0_f64;
            for vertex in set.extreme_points()? {
                worst = worst.max((objective.quadratic() * vertex + affine).norm());
            }
            Ok(worst)
        }
        ConvexSet::Ball { center, radius } => Ok((objective.quadratic() * center + affine).norm()
            + radius * spectral_norm(objective.quadratic())),
        ConvexSet::FullSpace { .. } => {
            Err(Error::UnboundedSet("gradient bound over the full space".into()))
        }
    }
}

/// Compute every certified constant of an instance. The true parameter is
/// resolved internally with a tight tolerance.
pub fn compute_constants(
    objectives: &[AgentObjective],
    sets: &SetFamily,
    learning: &LearningSpec,
    noise_x: &NoiseModel,
    noise_theta: &NoiseModel,
) -> Result<ProblemConstants> {
    if objectives.is_empty() {
        return Err(Error::InvalidArgument("at least one agent objective required".into()));
    }
    if objectives.len() != sets.len() {
        return Err(Error::DimensionMismatch {
            context: "objectives vs constraint sets",
            expected: sets.len(),
            actual: objectives.len(),
        });
    }
    let n = objectives[0].dim();
    let theta_star = learning.theta_star(1e-12, 20_000_000)?;

    let coupling_lipschitz = objectives
        .iter()
        .map(AgentObjective::coupling_lipschitz)
        .fold(0.0_f64, f64::max);

    let mut set_diameter = 0.0_f64;
    for set in sets.sets() {
        set_diameter = set_diameter.max(set.diameter()?);
    }

    // Affine part of each gradient at the true parameter.
    let affines: Vec<Vector> = objectives
        .iter()
        .map(|o| o.coupling() * &theta_star + o.linear())
        .collect();

    // The norm is convex, so its maximum over the hull of the union equals
    // its maximum over the union; bound each set separately.
    let mut hull_grad_bound = 0.0_f64;
    for (objective, affine) in objectives.iter().zip(&affines) {
        for set in sets.sets() {
            hull_grad_bound =
                hull_grad_bound.max(grad_norm_bound_over_set(objective, set, affine)?);
        }
    }

    // Exact vertex evaluation on the intersection box when available;
    // otherwise the tightest single-set bound contains the intersection.
    let mut intersection_grad_bound = 0.0_f64;
    if let Some((lower, upper)) = sets.intersection_box() {
        let inter = ConvexSet::Box { lower: lower.clone(), upper: upper.clone() };
        for (objective, affine) in objectives.iter().zip(&affines) {
            intersection_grad_bound = intersection_grad_bound
                .max(grad_norm_bound_over_set(objective, &inter, affine)?);
        }
    } else {
        for (objective, affine) in objectives.iter().zip(&affines) {
            let mut best = f64::INFINITY;
            for set in sets.sets() {
                best = best.min(grad_norm_bound_over_set(objective, set, affine)?);
            }
            intersection_grad_bound = intersection_grad_bound.max(best);
        }
    }

    Ok(ProblemConstants {
        coupling_lipschitz,
        strong_convexity: learning.kappa(),
        learning_lipschitz: learning.grad_lipschitz(),
        set_diameter,
        hull_grad_bound,
        intersection_grad_bound,
        x_noise_bound: noise_x.second_moment_bound(n).sqrt(),
        theta_noise_bound: noise_theta.second_moment_bound(learning.parameter_dim()).sqrt(),
    })
}

/// Aggregate objective `f(x, th) = sum_i f_i(x, th)`.
pub fn aggregate_value(objectives: &[AgentObjective], x: &Vector, theta: &Vector) -> Result<f64> {
    let mut total = 0.0;
    for objective in objectives {
        total += objective.value(x, theta)?;
    }
    Ok(total)
}

/// Aggregate gradient `sum_i grad_x f_i(x, th)`.
pub fn aggregate_grad(objectives: &[AgentObjective], x: &Vector, theta: &Vector) -> Result<Vector> {
    let mut total = Vector::zeros(x.len());
    for objective in objectives {
        total += objective.grad_x(x, theta)?;
    }
    Ok(total)
}

/// The centralized solution the distributed scheme is measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: Vector,
    pub theta_star: Vector,
    pub f_star: f64,
    /// Tolerance the solver was run at; downstream gap metrics clamp small
    /// negative values up to this tolerance.
    pub tol: f64,
}

/// Deterministic centralized solver for the reference pair `(x*, th*)`.
#[derive(Debug, Clone)]
pub struct ReferenceSolver {
    pub tol: f64,
    pub max_iters: usize,
    pub projection_tol: f64,
    pub projection_max_sweeps: usize,
}

impl Default for ReferenceSolver {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 5_000_000,
            projection_tol: 1e-10,
            projection_max_sweeps: crate::sets::DEFAULT_MAX_SWEEPS,
        }
    }
}

impl ReferenceSolver {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Solve from the canonical start (the projected origin).
    pub fn solve(
        &self,
        objectives: &[AgentObjective],
        sets: &SetFamily,
        learning: &LearningSpec,
    ) -> Result<ReferenceSolution> {
        let x0 = sets.project_intersection(
            &Vector::zeros(sets.dim()),
            self.projection_tol,
            self.projection_max_sweeps,
        )?;
        self.solve_from(objectives, sets, learning, &x0)
    }

    /// Solve with an explicit start point (projected onto the intersection
    /// first). Used to confirm that the solve is start-independent.
    pub fn solve_from(
        &self,
        objectives: &[AgentObjective],
        sets: &SetFamily,
        learning: &LearningSpec,
        x0: &Vector,
    ) -> Result<ReferenceSolution> {
        if objectives.len() != sets.len() {
            return Err(Error::DimensionMismatch {
                context: "objectives vs constraint sets",
                expected: sets.len(),
                actual: objectives.len(),
            });
        }
        let displacement_tol = self.tol * 1e-2;
        let theta_star = learning.theta_star(displacement_tol, self.max_iters)?;

        let n = sets.dim();
        let mut aggregate_quadratic = Matrix::zeros(n, n);
        for objective in objectives {
            aggregate_quadratic += objective.quadratic();
        }
        let (_, lipschitz) = symmetric_eigen_bounds(&aggregate_quadratic);

        let mut x =
            sets.project_intersection(x0, self.projection_tol, self.projection_max_sweeps)?;
        let mut converged = false;
        for iter in 0..self.max_iters {
            let step = if lipschitz > 1e-12 {
                1.0 / lipschitz
            } else {
                // Purely affine aggregate objective: diminishing steps.
                1.0 / ((iter + 1) as f64).sqrt()
            };
            let gradient = aggregate_grad(objectives, &x, &theta_star)?;
            let next = sets.project_intersection(
                &(&x - step * gradient),
                self.projection_tol,
                self.projection_max_sweeps,
            )?;
            let displacement = (&next - &x).norm();
            x = next;
            if displacement < displacement_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::OracleFailure(format!(
                "decision solve did not reach displacement {displacement_tol:.3e} within {} iterations",
                self.max_iters
            )));
        }
        let f_star = aggregate_value(objectives, &x, &theta_star)?;
        Ok(ReferenceSolution { x_star: x, theta_star, f_star, tol: self.tol })
    }
}

/// Named random instance families, used by configs that generate problem
/// data rather than spelling out matrices. Deterministic in the seed.
pub mod families {
    use super::*;
    use crate::rng;

    fn uniform_matrix(rows: usize, cols: usize, range: f64, rng: &mut impl Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-range..range))
    }

    /// Per-agent positive definite quadratics with random coupling.
    pub fn objectives_random_pd(
        m: usize,
        n: usize,
        p: usize,
        seed: u64,
    ) -> Result<Vec<AgentObjective>> {
        (0..m as u64)
            .map(|agent| {
                let mut rng = rng::stream(seed, &[rng::STREAM_PROBLEM_FAMILY, agent]);
                let a = uniform_matrix(n, n, 1.0, &mut rng);
                let quadratic = a.transpose() * &a / n as f64 + Matrix::identity(n, n) * 0.3;
                let coupling = uniform_matrix(n, p, 0.5, &mut rng);
                let linear = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                AgentObjective::new(quadratic, coupling, linear)
            })
            .collect()
    }

    /// Like `objectives_random_pd`, but every quadratic term is singular
    /// (rank at most `n - 1`), exercising merely convex instances.
    pub fn objectives_random_singular(
        m: usize,
        n: usize,
        p: usize,
        seed: u64,
    ) -> Result<Vec<AgentObjective>> {
        (0..m as u64)
            .map(|agent| {
                let mut rng = rng::stream(seed, &[rng::STREAM_PROBLEM_FAMILY, agent, 0x5107]);
                let rows = n.saturating_sub(1);
                let quadratic = if rows == 0 {
                    Matrix::zeros(n, n)
                } else {
                    let a = uniform_matrix(rows, n, 1.0, &mut rng);
                    a.transpose() * &a / n as f64
                };
                let coupling = uniform_matrix(n, p, 0.5, &mut rng);
                let linear = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                AgentObjective::new(quadratic, coupling, linear)
            })
            .collect()
    }

    /// A full-column-rank learning design with a random target. Resamples
    /// (deterministically) until the Gram spectrum is comfortably positive.
    pub fn learning_random_full_rank(
        p: usize,
        rows: usize,
        theta_set: ConvexSet,
        seed: u64,
    ) -> Result<LearningSpec> {
        for attempt in 0..64u64 {
            let mut rng = rng::stream(seed, &[rng::STREAM_LEARNING_FAMILY, attempt]);
            let design = uniform_matrix(rows, p, 1.0, &mut rng);
            let target = Vector::from_fn(rows, |_, _| rng.random_range(-2.0..2.0));
            let gram = design.transpose() * &design;
            let (min_eig, _) = symmetric_eigen_bounds(&gram);
            if min_eig >= 0.05 {
                return LearningSpec::new(design, target, theta_set);
            }
        }
        Err(Error::OracleFailure(
            "could not draw a well-conditioned learning design".into(),
        ))
    }
}

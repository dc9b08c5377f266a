//! The synchronous three-step scheme: neighbor averaging over a time-varying
//! graph, a projected (stochastic) gradient step on each agent's objective at
//! its current parameter belief, and a projected (stochastic) gradient step
//! on the shared learning metric.
//!
//! One round reads only epoch-`k` state and writes each agent's own slot, so
//! per-agent updates commute; the run as a whole is deterministic in
//! `(config, master_seed)` because every randomness consumer owns a derived
//! stream.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Topology, TopologyKind, WeightMatrix};
use crate::metrics::{self, AuditReport, IterationRecord, RunPhase};
use crate::problem::{
    compute_constants, symmetric_eigen_bounds, AgentObjective, LearningSpec, NoiseModel,
    ProblemConstants, ReferenceSolution, ReferenceSolver,
};
use crate::rng;
use crate::schedule::StepsizeSchedule;
use crate::sets::SetFamily;
use crate::{Matrix, Vector};

/// How the per-epoch communication graphs are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSettings {
    pub kind: TopologyKind,
    /// Reuse the epoch-0 topology for every iteration (static graph runs).
    pub freeze: bool,
}

impl Default for GraphSettings {
    fn default() -> Self {
        Self {
            kind: TopologyKind::RandomConnected { extra_edge_prob: 0.3 },
            freeze: false,
        }
    }
}

/// Initial iterate distribution: coordinatewise uniform draws projected onto
/// the respective sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSettings {
    pub x_half_width: f64,
    pub theta_half_width: f64,
    /// Start every parameter belief at the true parameter (used to exercise
    /// the reduced scheme and equivalence checks).
    pub theta_at_star: bool,
}

impl Default for InitSettings {
    fn default() -> Self {
        Self { x_half_width: 1.0, theta_half_width: 1.0, theta_at_star: false }
    }
}

/// Run modes of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// The full scheme: stochastic gradients on both updates.
    MisspecifiedStochastic,
    /// Exact gradients everywhere; noise models are ignored.
    Deterministic,
    /// The parameter is known: beliefs are pinned at the true parameter and
    /// the learning update is skipped (reduced scheme).
    CorrectlySpecified,
    /// Learn-then-optimize: run only the learning update for `learn_iters`
    /// iterations, freeze the averaged estimate, then run only the decision
    /// scheme with that estimate for the remaining budget.
    SequentialBaseline { learn_iters: u64 },
}

impl RunMode {
    pub fn name(&self) -> &'static str {
        match self {
            RunMode::MisspecifiedStochastic => "misspecified_stochastic",
            RunMode::Deterministic => "deterministic",
            RunMode::CorrectlySpecified => "correctly_specified",
            RunMode::SequentialBaseline { .. } => "sequential_baseline",
        }
    }

    fn noise_active(&self) -> bool {
        !matches!(self, RunMode::Deterministic)
    }
}

/// A fully assembled run description. `validate` must pass before the
/// engine will execute it.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub objectives: Vec<AgentObjective>,
    pub sets: SetFamily,
    pub learning: LearningSpec,
    pub noise_x: NoiseModel,
    pub noise_theta: NoiseModel,
    pub schedule: StepsizeSchedule,
    pub graph: GraphSettings,
    pub mode: RunMode,
    /// Iteration budget `K`.
    pub iterations: u64,
    pub master_seed: u64,
    pub trace_stride: u64,
    /// Run the executable audit checks at every traced iteration.
    pub audit: bool,
    /// Tolerance for the centralized reference solve.
    pub oracle_tol: f64,
    pub init: InitSettings,
    pub projection_tol: f64,
    pub projection_max_sweeps: usize,
}

impl RunConfig {
    pub fn agent_count(&self) -> usize {
        self.objectives.len()
    }

    pub fn decision_dim(&self) -> usize {
        self.sets.dim()
    }

    pub fn parameter_dim(&self) -> usize {
        self.learning.parameter_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objectives.is_empty() {
            return Err(Error::Config("at least one agent objective is required".into()));
        }
        if self.objectives.len() != self.sets.len() {
            return Err(Error::Config(format!(
                "{} objectives but {} constraint sets; one set per agent is required",
                self.objectives.len(),
                self.sets.len()
            )));
        }
        for (i, objective) in self.objectives.iter().enumerate() {
            if objective.dim() != self.sets.dim() {
                return Err(Error::Config(format!(
                    "objective {i} has decision dimension {}, constraint sets have {}",
                    objective.dim(),
                    self.sets.dim()
                )));
            }
            if objective.parameter_dim() != self.learning.parameter_dim() {
                return Err(Error::Config(format!(
                    "objective {i} couples a {}-dimensional parameter, learning problem has {}",
                    objective.parameter_dim(),
                    self.learning.parameter_dim()
                )));
            }
        }
        self.noise_x.validate()?;
        self.noise_theta.validate()?;
        self.schedule
            .validate()
            .into_result("schedule (stepsize admissibility)")?;
        if let TopologyKind::RandomConnected { extra_edge_prob } = self.graph.kind {
            if !(0.0..=1.0).contains(&extra_edge_prob) {
                return Err(Error::Config(format!(
                    "graph.extra_edge_prob = {extra_edge_prob} must lie in [0, 1]"
                )));
            }
        }
        if self.trace_stride == 0 {
            return Err(Error::Config("trace_stride must be at least 1".into()));
        }
        if let RunMode::SequentialBaseline { learn_iters } = self.mode {
            if learn_iters == 0 {
                return Err(Error::Config("sequential baseline requires learn_iters >= 1".into()));
            }
            if learn_iters >= self.iterations {
                return Err(Error::Config(format!(
                    "sequential baseline requires learn_iters < iterations ({} >= {})",
                    learn_iters, self.iterations
                )));
            }
        }
        if !(self.oracle_tol > 0.0) {
            return Err(Error::Config("oracle_tol must be positive".into()));
        }
        if !(self.projection_tol > 0.0) {
            return Err(Error::Config("projection_tol must be positive".into()));
        }
        if self.projection_max_sweeps == 0 {
            return Err(Error::Config("projection_max_sweeps must be at least 1".into()));
        }
        if self.init.x_half_width < 0.0 || self.init.theta_half_width < 0.0 {
            return Err(Error::Config("init half widths must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-agent iterates at one epoch: decisions `x_i`, parameter beliefs
/// `theta_i`, and the last alignment averages `v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub k: u64,
    pub x: Vec<Vector>,
    pub theta: Vec<Vector>,
    pub v: Vec<Vector>,
}

/// Alignment step: `v_i = sum_j w_ij x_j`, computed from an immutable
/// snapshot of the epoch-`k` decisions.
pub fn align(state: &SwarmState, weights: &WeightMatrix) -> Vec<Vector> {
    let m = state.x.len();
    let dim = state.x[0].len();
    let mut v = Vec::with_capacity(m);
    for i in 0..m {
        let mut avg = Vector::zeros(dim);
        for (j, xj) in state.x.iter().enumerate() {
            let w = weights.entry(i, j);
            if w != 0.0 {
                avg += w * xj;
            }
        }
        v.push(avg);
    }
    v
}

/// Data captured while stepping away from a traced iteration; feeds the
/// audit checks.
pub struct StepCapture {
    pub k: u64,
    pub alpha: f64,
    pub gamma: f64,
    pub weights: WeightMatrix,
    pub x_before: Vec<Vector>,
    pub theta_before: Vec<Vector>,
    pub v: Vec<Vector>,
    pub theta_updated: bool,
}

enum StepPhase {
    /// Alignment + decision update, plus the learning update when the mode
    /// calls for it.
    Joint,
    /// Learning update only (baseline phase 1).
    LearnOnly,
    /// Alignment + decision update with frozen beliefs (baseline phase 2);
    /// the optimization stepsize index restarts at the phase boundary.
    OptimizeOnly { alpha_index: u64 },
}

/// One in-flight run: the validated configuration plus the reference
/// solution, certified constants, per-agent noise streams, and the state.
pub struct Simulation {
    config: RunConfig,
    constants: ProblemConstants,
    reference: ReferenceSolution,
    interior: Option<(Vector, f64)>,
    interior_unavailable: String,
    singular_aggregate: bool,
    state: SwarmState,
    noise_x_rngs: Vec<ChaCha12Rng>,
    noise_theta_rngs: Vec<ChaCha12Rng>,
    frozen_graph: Option<(Topology, WeightMatrix)>,
    theta_pinned: bool,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let reference = ReferenceSolver {
            tol: config.oracle_tol,
            projection_tol: config.projection_tol,
            projection_max_sweeps: config.projection_max_sweeps,
            ..ReferenceSolver::default()
        }
        .solve(&config.objectives, &config.sets, &config.learning)?;
        Self::with_reference(config, reference)
    }

    /// Build a simulation around an already-computed reference solution
    /// (shared across seed sweeps of the same instance).
    pub fn with_reference(config: RunConfig, reference: ReferenceSolution) -> Result<Self> {
        config.validate()?;
        let constants = compute_constants(
            &config.objectives,
            &config.sets,
            &config.learning,
            &config.noise_x,
            &config.noise_theta,
        )?;
        let (interior, interior_unavailable) = match config.sets.interior_ball() {
            Ok(ball) => (Some(ball), String::new()),
            Err(e) => (Option::None, e.to_string()),
        };

        let n = config.decision_dim();
        let mut aggregate_quadratic = Matrix::zeros(n, n);
        for objective in &config.objectives {
            aggregate_quadratic += objective.quadratic();
        }
        let singular_aggregate = symmetric_eigen_bounds(&aggregate_quadratic).0 <= 1e-10;

        let m = config.agent_count();
        let seed = config.master_seed;
        let theta_pinned = matches!(config.mode, RunMode::CorrectlySpecified);
        let pin_theta = theta_pinned || config.init.theta_at_star;

        let mut x = Vec::with_capacity(m);
        let mut theta = Vec::with_capacity(m);
        for i in 0..m as u64 {
            let mut rx = rng::stream(seed, &[rng::STREAM_INIT_X, i]);
            let w = config.init.x_half_width;
            let draw = Vector::from_fn(n, |_, _| rx.random_range(-w..=w));
            x.push(config.sets.set(i as usize).project(&draw)?);

            if pin_theta {
                theta.push(reference.theta_star.clone());
            } else {
                let mut rt = rng::stream(seed, &[rng::STREAM_INIT_THETA, i]);
                let w = config.init.theta_half_width;
                let draw =
                    Vector::from_fn(config.parameter_dim(), |_, _| rt.random_range(-w..=w));
                theta.push(config.learning.theta_set().project(&draw)?);
            }
        }
        let v = x.clone();

        let noise_x_rngs = (0..m as u64)
            .map(|i| rng::stream(seed, &[rng::STREAM_NOISE_X, i]))
            .collect();
        let noise_theta_rngs = (0..m as u64)
            .map(|i| rng::stream(seed, &[rng::STREAM_NOISE_THETA, i]))
            .collect();

        let frozen_graph = if config.graph.freeze {
            let topo = Topology::generate(&config.graph.kind, m, 0, seed)?;
            let weights = topo.metropolis_weights()?;
            Some((topo, weights))
        } else {
            Option::None
        };

        Ok(Self {
            config,
            constants,
            reference,
            interior,
            interior_unavailable,
            singular_aggregate,
            state: SwarmState { k: 0, x, theta, v },
            noise_x_rngs,
            noise_theta_rngs,
            frozen_graph,
            theta_pinned,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &SwarmState {
        &self.state
    }

    pub fn reference(&self) -> &ReferenceSolution {
        &self.reference
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn singular_aggregate(&self) -> bool {
        self.singular_aggregate
    }

    pub fn interior_ball(&self) -> Option<&(Vector, f64)> {
        self.interior.as_ref()
    }

    /// Replace the iterates (projected onto their sets) for warm starts and
    /// constructed experiments. Resets the iteration counter.
    pub fn set_state(&mut self, x: Vec<Vector>, theta: Vec<Vector>) -> Result<()> {
        let m = self.config.agent_count();
        if x.len() != m || theta.len() != m {
            return Err(Error::DimensionMismatch {
                context: "state replacement",
                expected: m,
                actual: x.len().min(theta.len()),
            });
        }
        let mut projected_x = Vec::with_capacity(m);
        let mut projected_theta = Vec::with_capacity(m);
        for i in 0..m {
            projected_x.push(self.config.sets.set(i).project(&x[i])?);
            projected_theta.push(self.config.learning.theta_set().project(&theta[i])?);
        }
        self.state.v = projected_x.clone();
        self.state.x = projected_x;
        self.state.theta = projected_theta;
        self.state.k = 0;
        Ok(())
    }

    fn graph_for_epoch(&self, epoch: u64) -> Result<(Topology, WeightMatrix)> {
        if let Some((topo, weights)) = &self.frozen_graph {
            return Ok((topo.clone(), weights.clone()));
        }
        let topo = Topology::generate(
            &self.config.graph.kind,
            self.config.agent_count(),
            epoch,
            self.config.master_seed,
        )?;
        let weights = topo.metropolis_weights()?;
        Ok((topo, weights))
    }

    /// Advance one iteration of the full scheme.
    pub fn step(&mut self, capture: bool) -> Result<Option<StepCapture>> {
        self.step_phase(StepPhase::Joint, capture)
    }

    fn step_phase(&mut self, phase: StepPhase, capture: bool) -> Result<Option<StepCapture>> {
        let k = self.state.k;
        let gamma = self.config.schedule.gamma(k);
        let noise_active = self.config.mode.noise_active();
        let m = self.config.agent_count();

        let (update_x, update_theta, alpha) = match &phase {
            StepPhase::Joint => (true, !self.theta_pinned, self.config.schedule.alpha(k)),
            StepPhase::LearnOnly => (false, true, self.config.schedule.alpha(k)),
            StepPhase::OptimizeOnly { alpha_index } => {
                (true, false, self.config.schedule.alpha(*alpha_index))
            }
        };

        let captured_before = if capture {
            Some((self.state.x.clone(), self.state.theta.clone()))
        } else {
            Option::None
        };

        let mut capture_weights = Option::None;
        if update_x {
            let (_topo, weights) = self.graph_for_epoch(k)?;
            let v = align(&self.state, &weights);
            for (i, avg) in v.iter().enumerate() {
                // The decision update reads the epoch-k belief.
                let mut gradient = self.config.objectives[i].grad_x(avg, &self.state.theta[i])?;
                if noise_active {
                    self.config.noise_x.add_sample(&mut gradient, &mut self.noise_x_rngs[i]);
                }
                let candidate = avg - alpha * gradient;
                self.state.x[i] = self.config.sets.set(i).project(&candidate)?;
                debug_assert!(
                    self.config.sets.set(i).distance(&self.state.x[i])? <= 1e-10,
                    "post-step infeasibility"
                );
            }
            self.state.v = v;
            capture_weights = Some(weights);
        }

        if update_theta {
            for i in 0..m {
                let mut gradient = self.config.learning.grad(&self.state.theta[i])?;
                if noise_active {
                    self.config
                        .noise_theta
                        .add_sample(&mut gradient, &mut self.noise_theta_rngs[i]);
                }
                let candidate = &self.state.theta[i] - gamma * gradient;
                self.state.theta[i] = self.config.learning.theta_set().project(&candidate)?;
                debug_assert!(
                    self.config.learning.theta_set().distance(&self.state.theta[i])? <= 1e-10,
                    "post-step parameter infeasibility"
                );
            }
        }

        self.state.k = k + 1;

        Ok(captured_before.map(|(x_before, theta_before)| StepCapture {
            k,
            alpha,
            gamma,
            weights: capture_weights.unwrap_or_else(|| {
                // Learning-only steps perform no alignment; report the
                // trivial self-weights so the capture stays well-formed.
                WeightMatrix::from_entries(Matrix::identity(m, m), 1.0)
            }),
            x_before,
            theta_before,
            v: self.state.v.clone(),
            theta_updated: update_theta,
        }))
    }

    fn record_now(&self, phase: RunPhase) -> Result<IterationRecord> {
        let k = self.state.k;
        metrics::make_record(
            k,
            self.config.schedule.alpha(k),
            self.config.schedule.gamma(k),
            &self.state.x,
            &self.state.theta,
            &self.config.objectives,
            &self.config.sets,
            &self.reference,
            phase,
            self.config.projection_tol,
            self.config.projection_max_sweeps,
        )
    }

    fn audit_step(&self, cap: &StepCapture, record: &IterationRecord) -> Result<AuditReport> {
        let noise_free = !self.config.mode.noise_active()
            || (self.config.noise_theta.is_none());
        let averaging_identity = if cap.weights.node_count() == self.config.agent_count() {
            metrics::check_averaging_identity(
                &cap.weights,
                &cap.x_before,
                &cap.v,
                &self.reference.x_star,
            )
        } else {
            metrics::CheckOutcome::Skipped { reason: "no alignment in this phase".into() }
        };
        Ok(AuditReport {
            averaging_identity,
            consensus_contraction: metrics::check_consensus_contraction(&cap.x_before, &cap.v),
            learning_descent: metrics::check_learning_descent(
                &cap.theta_before,
                &self.state.theta,
                &self.reference.theta_star,
                cap.gamma,
                self.constants.strong_convexity,
                self.constants.learning_lipschitz,
                cap.theta_updated,
                noise_free,
            ),
            intersection_bound: metrics::check_intersection_bound(
                &cap.x_before,
                &record.projected_mean,
                self.constants.set_diameter,
                self.interior.as_ref(),
                &self.interior_unavailable,
            ),
            feasibility: metrics::check_feasibility(
                &self.state.x,
                &self.state.theta,
                &self.config.sets,
                self.config.learning.theta_set(),
            )?,
        })
    }
}

/// Result of a run: every traced record plus the end-of-run summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
}

/// Final metrics of a run (and, for the sequential baseline, the handoff
/// residual of the frozen estimate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub iterations: u64,
    pub final_consensus_gap: f64,
    pub final_theta_error: f64,
    pub final_lyapunov: f64,
    pub final_opt_gap: f64,
    pub audited_records: usize,
    pub audit_failures: usize,
    /// Set when the aggregate quadratic term is singular: the solution set
    /// may then be non-singleton and only value-based gaps are meaningful.
    pub singular_aggregate: bool,
    /// Sequential baseline only: `||theta_hat - theta_star||` of the frozen
    /// estimate handed to phase 2.
    pub theta_hat_residual: Option<f64>,
    pub learn_iters: Option<u64>,
}

fn summarize(trace: &[IterationRecord], sim: &Simulation) -> RunSummary {
    let last = trace.last().expect("trace always holds the initial record");
    let audited_records = trace.iter().filter(|r| r.audit.is_some()).count();
    let audit_failures = trace
        .iter()
        .filter_map(|r| r.audit.as_ref())
        .filter(|a| !a.all_passed_or_skipped())
        .count();
    RunSummary {
        mode: sim.config.mode.name().to_string(),
        iterations: sim.config.iterations,
        final_consensus_gap: last.consensus_gap,
        final_theta_error: last.theta_error,
        final_lyapunov: last.lyapunov,
        final_opt_gap: last.opt_gap,
        audited_records,
        audit_failures,
        singular_aggregate: sim.singular_aggregate,
        theta_hat_residual: Option::None,
        learn_iters: Option::None,
    }
}

/// Run to completion, materializing the whole trace.
pub fn run(config: RunConfig) -> Result<RunTrace> {
    run_with(config, &mut |_| Ok(()))
}

/// Run to completion, invoking `sink` on every traced record as it is
/// produced (the CLI streams records to disk so failures leave a partial
/// trace behind).
pub fn run_with(
    config: RunConfig,
    sink: &mut dyn FnMut(&IterationRecord) -> Result<()>,
) -> Result<RunTrace> {
    let mut sim = Simulation::new(config)?;
    run_prepared_with(&mut sim, sink)
}

/// Run an already-initialized simulation to completion (used by experiments
/// that adjust the initial state first, and by sweeps that share one
/// reference solve).
pub fn run_prepared(sim: &mut Simulation) -> Result<RunTrace> {
    run_prepared_with(sim, &mut |_| Ok(()))
}

pub fn run_prepared_with(
    sim: &mut Simulation,
    sink: &mut dyn FnMut(&IterationRecord) -> Result<()>,
) -> Result<RunTrace> {
    if let RunMode::SequentialBaseline { learn_iters } = sim.config.mode {
        return run_sequential_baseline_with(sim, learn_iters, sink);
    }
    let total = sim.config.iterations;
    let stride = sim.config.trace_stride.max(1);
    let mut records = Vec::new();
    for k in 0..total {
        let traced = k % stride == 0;
        if traced {
            let mut record = sim.record_now(RunPhase::Joint).map_err(|e| e.at_iteration(k))?;
            let cap = sim
                .step(sim.config.audit)
                .map_err(|e| e.at_iteration(k))?;
            if let Some(cap) = cap {
                record.audit = Some(sim.audit_step(&cap, &record).map_err(|e| e.at_iteration(k))?);
            }
            sink(&record)?;
            records.push(record);
        } else {
            sim.step(false).map_err(|e| e.at_iteration(k))?;
        }
    }
    let record = sim.record_now(RunPhase::Joint).map_err(|e| e.at_iteration(total))?;
    sink(&record)?;
    records.push(record);
    let summary = summarize(&records, sim);
    Ok(RunTrace { records, summary })
}

/// The traditional learn-then-optimize baseline. Phase 1 runs only the
/// learning update for `learn_iters` iterations; the across-agent average of
/// the final beliefs is frozen as the estimate; phase 2 runs the reduced
/// decision scheme against that estimate for the remaining budget.
pub fn run_sequential_baseline(config: RunConfig) -> Result<RunTrace> {
    match config.mode {
        RunMode::SequentialBaseline { .. } => run(config),
        _ => Err(Error::Config(
            "run_sequential_baseline requires the sequential_baseline mode".into(),
        )),
    }
}

fn run_sequential_baseline_with(
    sim: &mut Simulation,
    learn_iters: u64,
    sink: &mut dyn FnMut(&IterationRecord) -> Result<()>,
) -> Result<RunTrace> {
    let total = sim.config.iterations;
    let stride = sim.config.trace_stride.max(1);
    let mut records = Vec::new();

    // Phase 1: learning only.
    for k in 0..learn_iters {
        let traced = k % stride == 0;
        if traced {
            let mut record =
                sim.record_now(RunPhase::Learning).map_err(|e| e.at_iteration(k))?;
            let cap = sim
                .step_phase(StepPhase::LearnOnly, sim.config.audit)
                .map_err(|e| e.at_iteration(k))?;
            if let Some(cap) = cap {
                record.audit = Some(sim.audit_step(&cap, &record).map_err(|e| e.at_iteration(k))?);
            }
            sink(&record)?;
            records.push(record);
        } else {
            sim.step_phase(StepPhase::LearnOnly, false)
                .map_err(|e| e.at_iteration(k))?;
        }
    }

    // Handoff: freeze the averaged estimate in every agent.
    let theta_hat = metrics::mean_point(&sim.state.theta);
    let theta_hat = sim.config.learning.theta_set().project(&theta_hat)?;
    let theta_hat_residual = (&theta_hat - &sim.reference.theta_star).norm();
    for belief in sim.state.theta.iter_mut() {
        *belief = theta_hat.clone();
    }

    // Phase 2: decision scheme with the frozen estimate; the optimization
    // stepsize index restarts, matching a fresh solve of the surrogate.
    for k in learn_iters..total {
        let phase = StepPhase::OptimizeOnly { alpha_index: k - learn_iters };
        let traced = k % stride == 0;
        if traced {
            let mut record =
                sim.record_now(RunPhase::Optimizing).map_err(|e| e.at_iteration(k))?;
            let cap = sim
                .step_phase(phase, sim.config.audit)
                .map_err(|e| e.at_iteration(k))?;
            if let Some(cap) = cap {
                record.audit = Some(sim.audit_step(&cap, &record).map_err(|e| e.at_iteration(k))?);
            }
            sink(&record)?;
            records.push(record);
        } else {
            sim.step_phase(phase, false).map_err(|e| e.at_iteration(k))?;
        }
    }

    let record = sim
        .record_now(RunPhase::Optimizing)
        .map_err(|e| e.at_iteration(total))?;
    sink(&record)?;
    records.push(record);

    let mut summary = summarize(&records, sim);
    summary.theta_hat_residual = Some(theta_hat_residual);
    summary.learn_iters = Some(learn_iters);
    Ok(RunTrace { records, summary })
}

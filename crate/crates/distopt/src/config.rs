//! The run configuration file: one TOML document with a section per
//! subsystem (`run`, `graph`, `problem`, `learning`, `sets`, `noise`,
//! `schedule`, `init`), resolution into a validated [`RunConfig`], and the
//! manifest that makes a run reproducible.
//!
//! Problem data can be spelled out matrix-by-matrix or generated from a
//! named seeded family; the resolved (fully explicit) form is echoed into
//! the manifest so any run can be replayed from its output directory alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{GraphSettings, InitSettings, RunConfig, RunMode, Simulation};
use crate::error::{Error, Result};
use crate::graph::TopologyKind;
use crate::problem::{families, AgentObjective, LearningSpec, NoiseModel, ProblemConstants};
use crate::rng;
use crate::schedule::StepsizeSchedule;
use crate::sets::{ConvexSet, SetFamily};
use crate::{Matrix, Vector};

/// The whole configuration document. Every section has defaults; a minimal
/// config only names the agent count.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub run: RunSection,
    pub graph: GraphSection,
    pub problem: ProblemSection,
    pub learning: LearningSection,
    pub sets: SetsSection,
    pub noise: NoiseSection,
    pub schedule: StepsizeSchedule,
    pub init: InitSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    MisspecifiedStochastic,
    Deterministic,
    CorrectlySpecified,
    SequentialBaseline,
}

impl std::str::FromStr for ModeName {
    type Err = Error;

    fn from_str(value: &str) -> Result<Self> {
        match value {
            "misspecified_stochastic" => Ok(ModeName::MisspecifiedStochastic),
            "deterministic" => Ok(ModeName::Deterministic),
            "correctly_specified" => Ok(ModeName::CorrectlySpecified),
            "sequential_baseline" => Ok(ModeName::SequentialBaseline),
            other => Err(Error::Config(format!(
                "unknown run mode '{other}'; expected misspecified_stochastic, deterministic, \
                 correctly_specified, or sequential_baseline"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: ModeName,
    /// Iteration budget `K`.
    pub iterations: u64,
    pub master_seed: u64,
    pub trace_stride: u64,
    pub audit: bool,
    /// Learning budget of the sequential baseline.
    pub learn_iters: u64,
    pub oracle_tol: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: ModeName::MisspecifiedStochastic,
            iterations: 1000,
            master_seed: 0,
            trace_stride: 10,
            audit: false,
            learn_iters: 100,
            oracle_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKindName {
    Complete,
    Ring,
    RandomConnected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub kind: GraphKindName,
    /// Probability of each non-tree edge in `random_connected` graphs.
    pub edge_prob: f64,
    /// Reuse the epoch-0 topology for the whole run.
    pub freeze: bool,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self { kind: GraphKindName::RandomConnected, edge_prob: 0.3, freeze: false }
    }
}

impl GraphSection {
    pub fn to_settings(&self) -> Result<GraphSettings> {
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Config(format!(
                "[graph] edge_prob = {} must lie in [0, 1]",
                self.edge_prob
            )));
        }
        let kind = match self.kind {
            GraphKindName::Complete => TopologyKind::Complete,
            GraphKindName::Ring => TopologyKind::Ring,
            GraphKindName::RandomConnected => {
                TopologyKind::RandomConnected { extra_edge_prob: self.edge_prob }
            }
        };
        Ok(GraphSettings { kind, freeze: self.freeze })
    }
}

/// Explicit matrices for one agent. `coupling` and `linear` default to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentMatrices {
    pub quadratic: Vec<Vec<f64>>,
    #[serde(default)]
    pub coupling: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub linear: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// Agent count; required unless explicit agents are listed.
    pub agents: Option<usize>,
    /// Decision dimension; defaults to 2 when no explicit matrices fix it.
    pub dimension: Option<usize>,
    /// Named random family: `random_pd` or `random_singular`.
    pub family: Option<String>,
    pub family_seed: Option<u64>,
    /// Explicit per-agent matrices; takes precedence over `family`.
    pub agent: Option<Vec<AgentMatrices>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSection {
    /// Parameter dimension; defaults to 2 when no explicit design fixes it.
    pub parameter_dimension: Option<usize>,
    /// Design rows; defaults to the parameter dimension.
    pub rows: Option<usize>,
    /// Named random family: `random_full_rank`.
    pub family: Option<String>,
    pub family_seed: Option<u64>,
    pub design: Option<Vec<Vec<f64>>>,
    pub target: Option<Vec<f64>>,
    pub theta_set: SetSpec,
}

impl Default for LearningSection {
    fn default() -> Self {
        Self {
            parameter_dimension: None,
            rows: None,
            family: None,
            family_seed: None,
            design: None,
            target: None,
            theta_set: SetSpec::FullSpace { dim: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetsSection {
    /// Per-agent constraint sets; defaults to boxes `[-w, w]^n`.
    pub agent: Option<Vec<SetSpec>>,
    pub default_half_width: f64,
    pub projection_tol: f64,
    pub projection_max_sweeps: usize,
}

impl Default for SetsSection {
    fn default() -> Self {
        Self {
            agent: None,
            default_half_width: 1.0,
            projection_tol: 1e-10,
            projection_max_sweeps: crate::sets::DEFAULT_MAX_SWEEPS,
        }
    }
}

/// Declarative form of a convex set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex { scale: f64, #[serde(default)] dim: Option<usize> },
    FullSpace { #[serde(default)] dim: Option<usize> },
}

impl SetSpec {
    pub fn to_set(&self, default_dim: usize) -> Result<ConvexSet> {
        let set = match self {
            SetSpec::Box { lower, upper } => ConvexSet::Box {
                lower: Vector::from_vec(lower.clone()),
                upper: Vector::from_vec(upper.clone()),
            },
            SetSpec::Ball { center, radius } => ConvexSet::Ball {
                center: Vector::from_vec(center.clone()),
                radius: *radius,
            },
            SetSpec::Simplex { scale, dim } => ConvexSet::Simplex {
                scale: *scale,
                dim: dim.unwrap_or(default_dim),
            },
            SetSpec::FullSpace { dim } => ConvexSet::FullSpace { dim: dim.unwrap_or(default_dim) },
        };
        set.validate()?;
        Ok(set)
    }

    pub fn from_set(set: &ConvexSet) -> SetSpec {
        match set {
            ConvexSet::Box { lower, upper } => SetSpec::Box {
                lower: lower.iter().copied().collect(),
                upper: upper.iter().copied().collect(),
            },
            ConvexSet::Ball { center, radius } => SetSpec::Ball {
                center: center.iter().copied().collect(),
                radius: *radius,
            },
            ConvexSet::Simplex { scale, dim } => {
                SetSpec::Simplex { scale: *scale, dim: Some(*dim) }
            }
            ConvexSet::FullSpace { dim } => SetSpec::FullSpace { dim: Some(*dim) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub x: NoiseModel,
    pub theta: NoiseModel,
}

fn matrix_from_rows(rows: &[Vec<f64>], context: &str) -> Result<Matrix> {
    if rows.is_empty() {
        return Err(Error::Config(format!("{context}: matrix must have at least one row")));
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err(Error::Config(format!("{context}: matrix must have at least one column")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Config(format!(
                "{context}: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn matrix_to_rows(matrix: &Matrix) -> Vec<Vec<f64>> {
    (0..matrix.nrows())
        .map(|i| (0..matrix.ncols()).map(|j| matrix[(i, j)]).collect())
        .collect()
}

/// Load a configuration document from disk.
pub fn load(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parse a configuration document from a string.
pub fn parse_str(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(format!("schema violation: {e}")))
}

/// Serialize a configuration document; `parse_str` of the output yields an
/// equal document.
pub fn emit(file: &ConfigFile) -> Result<String> {
    toml::to_string_pretty(file)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

/// Parse and fully resolve a config file into a validated run description.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    resolve(&load(path)?)
}

/// Resolve a configuration document: generate family-defined data, build
/// every domain object, and run all component validations.
pub fn resolve(file: &ConfigFile) -> Result<RunConfig> {
    let master_seed = file.run.master_seed;

    // Agent count and decision dimension.
    let explicit_agents = file.problem.agent.as_deref();
    let m = match (explicit_agents, file.problem.agents) {
        (Some(list), declared) => {
            if list.is_empty() {
                return Err(Error::Config("[problem] agent list must not be empty".into()));
            }
            if let Some(declared) = declared {
                if declared != list.len() {
                    return Err(Error::Config(format!(
                        "[problem] agents = {declared} but {} explicit agents are listed",
                        list.len()
                    )));
                }
            }
            list.len()
        }
        (None, Some(declared)) => {
            if declared == 0 {
                return Err(Error::Config("[problem] agents must be at least 1".into()));
            }
            declared
        }
        (None, None) => {
            return Err(Error::Config(
                "[problem] agents is required (or list explicit [[problem.agent]] entries)".into(),
            ))
        }
    };

    let n = match explicit_agents {
        Some(list) => {
            let n = list[0].quadratic.len();
            if let Some(declared) = file.problem.dimension {
                if declared != n {
                    return Err(Error::Config(format!(
                        "[problem] dimension = {declared} but explicit quadratic terms are {n}x{n}"
                    )));
                }
            }
            n
        }
        None => file.problem.dimension.unwrap_or(2),
    };
    if n == 0 {
        return Err(Error::Config("[problem] dimension must be at least 1".into()));
    }

    // Parameter dimension: an explicit design matrix fixes it, else explicit
    // coupling terms, else the declared value, else 2.
    let p = if let Some(design) = &file.learning.design {
        let p = design.first().map(Vec::len).unwrap_or(0);
        if let Some(declared) = file.learning.parameter_dimension {
            if declared != p {
                return Err(Error::Config(format!(
                    "[learning] parameter_dimension = {declared} but the explicit design has {p} columns"
                )));
            }
        }
        p
    } else if let Some(first_coupling) = explicit_agents
        .and_then(|list| list.first())
        .and_then(|a| a.coupling.as_ref())
    {
        let p = first_coupling.first().map(Vec::len).unwrap_or(0);
        if let Some(declared) = file.learning.parameter_dimension {
            if declared != p {
                return Err(Error::Config(format!(
                    "[learning] parameter_dimension = {declared} but explicit coupling terms have {p} columns"
                )));
            }
        }
        p
    } else {
        file.learning.parameter_dimension.unwrap_or(2)
    };
    if p == 0 {
        return Err(Error::Config("[learning] parameter_dimension must be at least 1".into()));
    }

    // Objectives: explicit matrices or a named family.
    let objectives: Vec<AgentObjective> = match explicit_agents {
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let quadratic =
                    matrix_from_rows(&spec.quadratic, &format!("[problem] agent {i} quadratic"))?;
                let coupling = match &spec.coupling {
                    Some(rows) => {
                        matrix_from_rows(rows, &format!("[problem] agent {i} coupling"))?
                    }
                    None => Matrix::zeros(n, p),
                };
                let linear = match &spec.linear {
                    Some(values) => Vector::from_vec(values.clone()),
                    None => Vector::zeros(n),
                };
                AgentObjective::new(quadratic, coupling, linear)
                    .map_err(|e| Error::Config(format!("[problem] agent {i}: {e}")))
            })
            .collect::<Result<_>>()?,
        None => {
            let seed = file
                .problem
                .family_seed
                .unwrap_or_else(|| rng::derive_seed(master_seed, &[rng::STREAM_PROBLEM_FAMILY]));
            match file.problem.family.as_deref().unwrap_or("random_pd") {
                "random_pd" => families::objectives_random_pd(m, n, p, seed)?,
                "random_singular" => families::objectives_random_singular(m, n, p, seed)?,
                other => {
                    return Err(Error::Config(format!(
                        "[problem] unknown family '{other}'; expected random_pd or random_singular"
                    )))
                }
            }
        }
    };

    // Learning problem: explicit design/target or a named family.
    let theta_set = file
        .learning
        .theta_set
        .to_set(p)
        .map_err(|e| Error::Config(format!("[learning] theta_set: {e}")))?;
    if theta_set.dim() != p {
        return Err(Error::Config(format!(
            "[learning] theta_set has dimension {}, parameter dimension is {p}",
            theta_set.dim()
        )));
    }
    let learning = match (&file.learning.design, &file.learning.target) {
        (Some(design), Some(target)) => {
            let design = matrix_from_rows(design, "[learning] design")?;
            LearningSpec::new(design, Vector::from_vec(target.clone()), theta_set)
                .map_err(|e| Error::Config(format!("[learning] {e}")))?
        }
        (Some(_), None) | (None, Some(_)) => {
            return Err(Error::Config(
                "[learning] design and target must be given together".into(),
            ))
        }
        (None, None) => {
            let rows = file.learning.rows.unwrap_or(p);
            if rows < p {
                return Err(Error::Config(format!(
                    "[learning] rows = {rows} must be at least the parameter dimension {p} \
                     for a full-column-rank design"
                )));
            }
            let seed = file
                .learning
                .family_seed
                .unwrap_or_else(|| rng::derive_seed(master_seed, &[rng::STREAM_LEARNING_FAMILY]));
            match file.learning.family.as_deref().unwrap_or("random_full_rank") {
                "random_full_rank" => {
                    families::learning_random_full_rank(p, rows, theta_set, seed)?
                }
                other => {
                    return Err(Error::Config(format!(
                        "[learning] unknown family '{other}'; expected random_full_rank"
                    )))
                }
            }
        }
    };

    // Constraint sets.
    let sets = match &file.sets.agent {
        Some(specs) => {
            if specs.len() != m {
                return Err(Error::Config(format!(
                    "[sets] {} sets listed for {m} agents; one per agent is required",
                    specs.len()
                )));
            }
            let sets: Vec<ConvexSet> = specs
                .iter()
                .enumerate()
                .map(|(i, spec)| {
                    spec.to_set(n).map_err(|e| Error::Config(format!("[sets] agent {i}: {e}")))
                })
                .collect::<Result<_>>()?;
            SetFamily::new(sets).map_err(|e| Error::Config(format!("[sets] {e}")))?
        }
        None => {
            let w = file.sets.default_half_width;
            if !(w > 0.0) {
                return Err(Error::Config(format!(
                    "[sets] default_half_width = {w} must be positive"
                )));
            }
            let boxes = (0..m)
                .map(|_| ConvexSet::Box {
                    lower: Vector::from_element(n, -w),
                    upper: Vector::from_element(n, w),
                })
                .collect();
            SetFamily::new(boxes).map_err(|e| Error::Config(format!("[sets] {e}")))?
        }
    };

    let mode = match file.run.mode {
        ModeName::MisspecifiedStochastic => RunMode::MisspecifiedStochastic,
        ModeName::Deterministic => RunMode::Deterministic,
        ModeName::CorrectlySpecified => RunMode::CorrectlySpecified,
        ModeName::SequentialBaseline => {
            RunMode::SequentialBaseline { learn_iters: file.run.learn_iters }
        }
    };

    let config = RunConfig {
        objectives,
        sets,
        learning,
        noise_x: file.noise.x.clone(),
        noise_theta: file.noise.theta.clone(),
        schedule: file.schedule.clone(),
        graph: file.graph.to_settings()?,
        mode,
        iterations: file.run.iterations,
        master_seed,
        trace_stride: file.run.trace_stride,
        audit: file.run.audit,
        oracle_tol: file.run.oracle_tol,
        init: file.init.clone(),
        projection_tol: file.sets.projection_tol,
        projection_max_sweeps: file.sets.projection_max_sweeps,
    };
    config.validate()?;
    Ok(config)
}

/// Echo a resolved run back into a fully explicit document: family-generated
/// matrices and default sets are materialized so the file re-parses into the
/// identical instance.
pub fn resolved_file(file: &ConfigFile, config: &RunConfig) -> ConfigFile {
    let mut resolved = file.clone();
    resolved.problem.agents = Some(config.agent_count());
    resolved.problem.dimension = Some(config.decision_dim());
    resolved.problem.family = None;
    resolved.problem.family_seed = None;
    resolved.problem.agent = Some(
        config
            .objectives
            .iter()
            .map(|o| AgentMatrices {
                quadratic: matrix_to_rows(o.quadratic()),
                coupling: Some(matrix_to_rows(o.coupling())),
                linear: Some(o.linear().iter().copied().collect()),
            })
            .collect(),
    );
    resolved.learning.parameter_dimension = Some(config.parameter_dim());
    resolved.learning.rows = Some(config.learning.design().nrows());
    resolved.learning.family = None;
    resolved.learning.family_seed = None;
    resolved.learning.design = Some(matrix_to_rows(config.learning.design()));
    resolved.learning.target = Some(config.learning.target().iter().copied().collect());
    resolved.learning.theta_set = SetSpec::from_set(config.learning.theta_set());
    resolved.sets.agent = Some(config.sets.sets().iter().map(SetSpec::from_set).collect());
    resolved
}

/// Everything needed to bit-reproduce a run on the same tool version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub mode: String,
    /// Fully explicit configuration (families expanded).
    pub config: ConfigFile,
    pub constants: ProblemConstants,
    pub reference: ReferenceSummary,
    /// The aggregate quadratic term is singular: the solution set may be
    /// non-singleton, so only value-based gaps identify convergence.
    pub singular_aggregate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub x_star: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub f_star: f64,
    pub tol: f64,
}

impl Manifest {
    pub fn new(file: &ConfigFile, simulation: &Simulation) -> Manifest {
        let reference = simulation.reference();
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: simulation.config().master_seed,
            mode: simulation.config().mode.name().to_string(),
            config: resolved_file(file, simulation.config()),
            constants: simulation.constants().clone(),
            reference: ReferenceSummary {
                x_star: reference.x_star.iter().copied().collect(),
                theta_star: reference.theta_star.iter().copied().collect(),
                f_star: reference.f_star,
                tol: reference.tol,
            },
            singular_aggregate: simulation.singular_aggregate(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Manifest> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("cannot parse manifest: {e}")))
    }
}

//! Acceptance suite: one test per acceptance criterion, each ending with a
//! single pass line (run with `--nocapture` to see them). Criteria combine
//! property checks over seeded instances with desk-scale realizations of the
//! convergence guarantees.

use std::time::Instant;

use rand::Rng;

use distopt::config::{self, ConfigFile};
use distopt::engine::{self, RunMode, Simulation};
use distopt::graph::{Topology, TopologyKind};
use distopt::metrics::{self, CheckOutcome};
use distopt::output;
use distopt::problem::{
    aggregate_grad, families, AgentObjective, NoiseModel, ReferenceSolver,
};
use distopt::rng;
use distopt::schedule::StepsizeSchedule;
use distopt::sets::{ConvexSet, SetFamily};
use distopt::{Matrix, Vector};

fn pass(criterion: &str, started: Instant) {
    println!("acceptance {criterion}: PASS ({:.2?})", started.elapsed());
}

fn temp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("distopt_acceptance_{name}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// The shared geometry of the decision-convergence criteria: five agents on
/// the plane, overlapping boxes with a fat interior, positive definite
/// quadratics with mild parameter coupling.
fn convergence_instance(singular_first_agent: bool) -> ConfigFile {
    let mut text = String::from(
        r#"
[run]
mode = "deterministic"
iterations = 100000
trace_stride = 500
master_seed = 424242
audit = false

[graph]
kind = "random_connected"
edge_prob = 0.5

[problem]
agents = 5
dimension = 2

[learning]
parameter_dimension = 2
design = [[1.0, 0.0], [0.0, 1.0]]
target = [0.4, -0.7]
"#,
    );
    for i in 0..5 {
        let fi = i as f64;
        let quadratic = if singular_first_agent && i == 0 {
            // Rank-one quadratic: this agent is merely convex.
            "quadratic = [[0.8, 0.8], [0.8, 0.8]]".to_string()
        } else {
            format!(
                "quadratic = [[{}, 0.1], [0.1, {}]]",
                1.0 + 0.1 * fi,
                1.2 - 0.05 * fi
            )
        };
        text.push_str(&format!(
            r#"
[[problem.agent]]
{quadratic}
coupling = [[{}, 0.1], [0.1, {}]]
linear = [{}, {}]
"#,
            0.2 + 0.02 * fi,
            0.15,
            0.3 - 0.15 * fi,
            -0.25 + 0.1 * fi,
        ));
        let lo = -(1.2 + 0.05 * fi);
        let hi = 1.2 + 0.03 * fi;
        text.push_str(&format!(
            r#"
[[sets.agent]]
kind = "box"
lower = [{lo}, {lo}]
upper = [{hi}, {hi}]
"#,
        ));
    }
    config::parse_str(&text).expect("instance config parses")
}

#[test]
fn c01_assumption_enforcement_suite() {
    let started = Instant::now();
    let mut seeder = rng::stream(1001, &[0xacc, 1]);
    for instance in 0..100u64 {
        let m = seeder.random_range(1..=8usize);
        let n = seeder.random_range(1..=4usize);
        let p = seeder.random_range(1..=4usize);
        let text = format!(
            "[run]\nmaster_seed = {instance}\n\n[graph]\nkind = \"random_connected\"\nedge_prob = 0.4\n\n\
             [problem]\nagents = {m}\ndimension = {n}\n\n[learning]\nparameter_dimension = {p}\nrows = {}\n",
            p + 1
        );
        let file = config::parse_str(&text).unwrap();
        // Resolution enforces strong convexity (kappa > 0) and a nonempty
        // intersection; it fails loudly otherwise.
        let run_config = config::resolve(&file).unwrap();
        assert!(run_config.learning.kappa() > 0.0);
        assert!(run_config.schedule.validate().is_empty());

        // Every generated epoch topology is connected with a fully valid
        // doubly stochastic weight matrix.
        for epoch in 0..3 {
            let topology =
                Topology::generate(&run_config.graph.kind, m, epoch, instance).unwrap();
            assert!(topology.is_connected());
            let weights = topology.metropolis_weights().unwrap();
            let report = weights.validate(&topology).unwrap();
            assert!(report.is_empty(), "instance {instance}: {report}");
        }
    }

    // The canonical stepsize triple validates; targeted mutations are
    // rejected with the violated condition named.
    assert!(StepsizeSchedule::default().validate().is_empty());
    let rejected = [
        (StepsizeSchedule::with_exponents(0.4, 0.9, 0.75), "a1-gt-half"),
        (StepsizeSchedule::with_exponents(0.9, 0.51, 0.75), "a2-gt-a1"),
        (StepsizeSchedule::with_exponents(0.51, 1.1, 0.95), "a2-lt-1"),
        (StepsizeSchedule::with_exponents(0.51, 0.9, 1.9), "alpha-summable"),
        (StepsizeSchedule::with_exponents(0.51, 0.9, 0.5), "ratio-decay"),
        (StepsizeSchedule::with_exponents(0.51, 0.9, 2.5), "tau-range"),
    ];
    for (mutated, code) in rejected {
        let report = mutated.validate();
        assert!(report.contains(code), "expected {code} in: {report}");
    }

    assert!(started.elapsed().as_secs_f64() < 10.0, "criterion runtime exceeded");
    pass("c01 assumption enforcement suite", started);
}

#[test]
fn c02_weighted_average_identity() {
    let started = Instant::now();
    let mut rng = rng::stream(1002, &[0xacc, 2]);
    for instance in 0..1000u64 {
        // m = 1 must be covered: every 10th instance is degenerate.
        let m = if instance % 10 == 0 { 1 } else { rng.random_range(2..=8usize) };
        let dim = rng.random_range(1..=4usize);
        let topology = Topology::generate(
            &TopologyKind::RandomConnected { extra_edge_prob: 0.4 },
            m,
            instance,
            instance.wrapping_mul(31).wrapping_add(7),
        )
        .unwrap();
        let weights = topology.metropolis_weights().unwrap();
        let points: Vec<Vector> = (0..m)
            .map(|_| Vector::from_fn(dim, |_, _| rng.random_range(-5.0..5.0)))
            .collect();
        let averaged: Vec<Vector> = (0..m)
            .map(|i| {
                let mut avg = Vector::zeros(dim);
                for (j, xj) in points.iter().enumerate() {
                    avg += weights.entry(i, j) * xj;
                }
                avg
            })
            .collect();
        let probe = Vector::from_fn(dim, |_, _| rng.random_range(-5.0..5.0));
        let outcome = metrics::check_averaging_identity(&weights, &points, &averaged, &probe);
        assert!(outcome.passed(), "instance {instance}: {outcome:?}");
    }
    assert!(started.elapsed().as_secs_f64() < 5.0, "criterion runtime exceeded");
    pass("c02 weighted-average identity (1000 instances)", started);
}

#[test]
fn c03_noiseless_learning_descent_per_step() {
    let started = Instant::now();
    let text = r#"
[run]
mode = "deterministic"
iterations = 10000
trace_stride = 1
master_seed = 77
audit = true

[problem]
agents = 3
dimension = 2
family = "random_pd"
family_seed = 5

[learning]
parameter_dimension = 3
design = [[1.0, 0.0, 0.0], [0.0, 1.2, 0.0], [0.0, 0.0, 2.0]]
target = [0.3, -0.4, 0.8]
theta_set = { kind = "box", lower = [-5.0, -5.0, -5.0], upper = [5.0, 5.0, 5.0] }

[init]
theta_half_width = 4.0
"#;
    let file = config::parse_str(text).unwrap();
    let run_config = config::resolve(&file).unwrap();

    // kappa = 1, R = 4: the contraction condition activates at a schedule
    // index computable in closed form.
    let kappa = run_config.learning.kappa();
    let lipschitz = run_config.learning.grad_lipschitz();
    assert!((kappa - 1.0).abs() < 1e-12);
    assert!((lipschitz - 4.0).abs() < 1e-12);
    let k0 = run_config
        .schedule
        .first_k_with_gamma_at_most(kappa / (lipschitz * lipschitz));
    assert!(k0 > 0 && k0 < 1000, "k0 = {k0}");

    let trace = engine::run(run_config).unwrap();
    let mut checked = 0usize;
    for record in &trace.records {
        let Some(audit) = &record.audit else { continue };
        if record.k >= k0 {
            assert!(
                audit.learning_descent.passed(),
                "descent violated at k = {}: {:?}",
                record.k,
                audit.learning_descent
            );
            checked += 1;
        } else {
            assert!(
                matches!(audit.learning_descent, CheckOutcome::Skipped { .. }),
                "expected skip below k0 at k = {}",
                record.k
            );
        }
    }
    assert_eq!(checked as u64, 10_000 - k0);

    // Corollary: the learning error is nonincreasing once the contraction
    // factor drops below one.
    for pair in trace.records.windows(2) {
        if pair[0].k >= k0 {
            assert!(
                pair[1].theta_error <= pair[0].theta_error + 1e-15,
                "learning error increased at k = {}",
                pair[0].k
            );
        }
    }
    assert!(started.elapsed().as_secs_f64() < 5.0, "criterion runtime exceeded");
    pass(
        &format!("c03 noiseless learning descent (every step k >= {k0})"),
        started,
    );
}

#[test]
fn c04_learning_converges_under_noise_across_seeds() {
    let started = Instant::now();
    let text = r#"
[run]
mode = "misspecified_stochastic"
iterations = 200000
trace_stride = 20000
master_seed = 9000

[problem]
agents = 5
dimension = 2
family = "random_pd"
family_seed = 14

[learning]
parameter_dimension = 2
design = [[1.0, 0.0], [0.0, 1.0]]
target = [0.4, -0.7]

[noise]
x = { kind = "gaussian", sigma = 0.1 }
theta = { kind = "gaussian", sigma = 0.1 }

[init]
theta_half_width = 3.0
"#;
    let file = config::parse_str(text).unwrap();
    let dir = temp_dir("c04");
    let artifacts = output::execute_sweep(&file, 8, &dir).unwrap();
    for summary in &artifacts.summary.per_seed {
        assert!(
            summary.final_theta_error <= 1e-2,
            "seed exceeded 1e-2: {}",
            summary.final_theta_error
        );
    }
    let mean = artifacts.summary.final_row.theta_error_mean;
    assert!(mean <= 1e-3, "seed-mean learning error {mean} exceeds 1e-3");
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(started.elapsed().as_secs_f64() < 60.0, "criterion runtime exceeded");
    pass(
        &format!("c04 stochastic learning convergence (8 seeds, mean {mean:.2e})"),
        started,
    );
}

#[test]
fn c05_c08_deterministic_decision_convergence_with_audit() {
    let started = Instant::now();
    let mut file = convergence_instance(false);
    file.run.audit = true;

    let run_config = config::resolve(&file).unwrap();
    let mut simulation = Simulation::new(run_config).unwrap();
    assert!(!simulation.singular_aggregate());
    assert!(simulation.interior_ball().is_some(), "instance must have an interior ball");
    let x_star = simulation.reference().x_star.clone();

    let trace = engine::run_prepared(&mut simulation).unwrap();
    let summary = &trace.summary;
    assert!(
        summary.final_consensus_gap <= 1e-4,
        "consensus gap {} exceeds 1e-4",
        summary.final_consensus_gap
    );
    assert!(
        summary.final_opt_gap <= 1e-4,
        "optimality gap {} exceeds 1e-4",
        summary.final_opt_gap
    );
    for (i, xi) in simulation.state().x.iter().enumerate() {
        let distance = (xi - &x_star).norm();
        assert!(distance <= 1e-2, "agent {i} ended {distance} from the reference");
    }

    // The joint distance function vanishes along the run, and the
    // optimality gap is monotone after burn-in (slack 1e-9 per step).
    assert!(
        summary.final_lyapunov <= 1e-4,
        "joint distance {} did not vanish",
        summary.final_lyapunov
    );
    for pair in trace.records.windows(2) {
        if pair[0].k >= 100 {
            assert!(
                pair[1].opt_gap <= pair[0].opt_gap + 1e-9,
                "gap increased between k = {} and k = {}",
                pair[0].k,
                pair[1].k
            );
        }
    }

    // Criterion 8: the intersection-distance bound holds at every traced
    // iteration, with zero violations of any audited check.
    let mut bound_checks = 0usize;
    for record in &trace.records {
        let Some(audit) = &record.audit else { continue };
        assert!(
            audit.intersection_bound.passed(),
            "intersection bound violated at k = {}: {:?}",
            record.k,
            audit.intersection_bound
        );
        bound_checks += 1;
        assert!(audit.all_passed_or_skipped(), "audit failure at k = {}", record.k);
    }
    assert!(bound_checks >= 200, "expected the bound audited at every traced iteration");
    assert_eq!(summary.audit_failures, 0);

    assert!(started.elapsed().as_secs_f64() < 60.0, "criterion runtime exceeded");
    pass(
        &format!(
            "c05 deterministic decision convergence (consensus {:.2e}, gap {:.2e})",
            summary.final_consensus_gap, summary.final_opt_gap
        ),
        started,
    );
    pass(&format!("c08 intersection bound audit ({bound_checks} traced iterations)"), started);
}

#[test]
fn c06_stochastic_merely_convex_convergence() {
    let started = Instant::now();
    let mut file = convergence_instance(true);
    file.run.mode = config::ModeName::MisspecifiedStochastic;
    file.run.iterations = 200_000;
    file.run.trace_stride = 20_000;
    file.noise.x = NoiseModel::Gaussian { sigma: 0.05 };
    file.noise.theta = NoiseModel::Gaussian { sigma: 0.05 };

    // The first agent's quadratic term is singular: merely convex.
    let run_config = config::resolve(&file).unwrap();
    let (min_eig, _) =
        distopt::problem::symmetric_eigen_bounds(run_config.objectives[0].quadratic());
    assert!(min_eig.abs() < 1e-9, "first agent must be merely convex");

    let dir = temp_dir("c06");
    let artifacts = output::execute_sweep(&file, 8, &dir).unwrap();
    let gap_mean = artifacts.summary.final_row.opt_gap_mean;
    let consensus_mean = artifacts.summary.final_row.consensus_gap_mean;
    assert!(gap_mean <= 1e-2, "seed-mean optimality gap {gap_mean} exceeds 1e-2");
    assert!(
        consensus_mean <= 1e-2,
        "seed-mean consensus gap {consensus_mean} exceeds 1e-2"
    );
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(started.elapsed().as_secs_f64() < 180.0, "criterion runtime exceeded");
    pass(
        &format!(
            "c06 stochastic merely convex convergence (gap mean {gap_mean:.2e}, consensus mean {consensus_mean:.2e})"
        ),
        started,
    );
}

#[test]
fn c07_reduced_scheme_equivalence_is_bitwise() {
    let started = Instant::now();
    let base = r#"
[run]
iterations = 20000
trace_stride = 500
master_seed = 1234

[problem]
agents = 4
dimension = 2
family = "random_pd"
family_seed = 99

[learning]
parameter_dimension = 2
design = [[1.0, 0.0], [0.0, 1.0]]
target = [0.5, -0.25]

[noise]
x = { kind = "gaussian", sigma = 0.1 }
theta = { kind = "none" }
"#;
    let dir = temp_dir("c07");

    let mut reduced = config::parse_str(base).unwrap();
    reduced.run.mode = config::ModeName::CorrectlySpecified;
    let reduced_artifacts = output::execute_run(&reduced, &dir, "reduced").unwrap();

    let mut full = config::parse_str(base).unwrap();
    full.run.mode = config::ModeName::MisspecifiedStochastic;
    full.init.theta_at_star = true;
    let full_artifacts = output::execute_run(&full, &dir, "full").unwrap();

    // Bit-identical traces: the shared master seed drives identical noise
    // streams and the learning step is a no-op at its fixed point.
    let reduced_bytes = std::fs::read(&reduced_artifacts.trace_path).unwrap();
    let full_bytes = std::fs::read(&full_artifacts.trace_path).unwrap();
    assert_eq!(reduced_bytes, full_bytes, "trace files must be byte-identical");

    for (a, b) in reduced_artifacts
        .trace
        .records
        .iter()
        .zip(&full_artifacts.trace.records)
    {
        for (xa, xb) in a.mean_x.iter().zip(b.mean_x.iter()) {
            assert_eq!(xa.to_bits(), xb.to_bits());
        }
    }
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(started.elapsed().as_secs_f64() < 10.0, "criterion runtime exceeded");
    pass("c07 reduced-scheme equivalence (byte-identical traces)", started);
}

#[test]
fn c09_reference_oracle_cross_checks() {
    let started = Instant::now();

    // Closed form vs iterative learning solve on 50 random instances.
    let mut rng = rng::stream(1009, &[0xacc, 9]);
    for instance in 0..50u64 {
        let p = rng.random_range(1..=4usize);
        let rows = p + rng.random_range(0..=2usize);
        let learning = families::learning_random_full_rank(
            p,
            rows,
            ConvexSet::FullSpace { dim: p },
            rng::derive_seed(7000, &[instance]),
        )
        .unwrap();
        let closed = learning.theta_star_closed_form().unwrap();
        let iterative = learning.theta_star_projected_gradient(1e-11, 10_000_000).unwrap();
        let gap = (closed - iterative).norm();
        assert!(gap < 1e-8, "instance {instance}: solves disagree by {gap}");
    }

    // Sampled variational inequality at the reference decision.
    let n = 3;
    let p = 2;
    let mut objectives = Vec::new();
    for _ in 0..4 {
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        objectives.push(
            AgentObjective::new(
                a.transpose() * &a / n as f64 + Matrix::identity(n, n) * 0.25,
                Matrix::from_fn(n, p, |_, _| rng.random_range(-0.5..0.5)),
                Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            )
            .unwrap(),
        );
    }
    let sets = SetFamily::new(
        (0..4)
            .map(|_| ConvexSet::Box {
                lower: Vector::from_fn(n, |_, _| rng.random_range(-1.6..=-0.3)),
                upper: Vector::from_fn(n, |_, _| rng.random_range(0.3..=1.6)),
            })
            .collect(),
    )
    .unwrap();
    let learning =
        families::learning_random_full_rank(p, p + 1, ConvexSet::FullSpace { dim: p }, 4242)
            .unwrap();
    let tol = 1e-8;
    let reference = ReferenceSolver::with_tol(tol).solve(&objectives, &sets, &learning).unwrap();
    let gradient = aggregate_grad(&objectives, &reference.x_star, &reference.theta_star).unwrap();
    let (lower, upper) = sets.intersection_box().unwrap();
    for _ in 0..10_000 {
        let y = Vector::from_fn(n, |i, _| rng.random_range(lower[i]..=upper[i]));
        let inner = gradient.dot(&(&y - &reference.x_star));
        assert!(inner >= -tol, "variational inequality violated: {inner}");
    }

    assert!(started.elapsed().as_secs_f64() < 10.0, "criterion runtime exceeded");
    pass("c09 reference oracle cross-checks (50 instances + sampled optimality)", started);
}

#[test]
fn c10_sequential_baseline_is_dominated() {
    let started = Instant::now();
    let base = r#"
[run]
iterations = 100000
trace_stride = 10000
master_seed = 3131

[problem]
agents = 4
dimension = 2
family = "random_pd"
family_seed = 3

# A weakly identified second parameter coordinate: fifty learning
# iterations cannot resolve it, so the frozen estimate stays biased.
[learning]
parameter_dimension = 2
design = [[1.0, 0.0], [0.0, 0.15]]
target = [1.1, -0.9]

[init]
theta_half_width = 4.0

[noise]
x = { kind = "gaussian", sigma = 0.05 }
theta = { kind = "gaussian", sigma = 0.1 }
"#;
    let mut joint_file = config::parse_str(base).unwrap();
    joint_file.run.mode = config::ModeName::MisspecifiedStochastic;
    let joint = engine::run(config::resolve(&joint_file).unwrap()).unwrap();

    let mut baseline_file = config::parse_str(base).unwrap();
    baseline_file.run.mode = config::ModeName::SequentialBaseline;
    baseline_file.run.learn_iters = 50;
    let baseline_config = config::resolve(&baseline_file).unwrap();
    assert_eq!(baseline_config.mode, RunMode::SequentialBaseline { learn_iters: 50 });
    let baseline = engine::run(baseline_config).unwrap();

    let handoff = baseline.summary.theta_hat_residual.unwrap();
    let joint_rms = (joint.summary.final_theta_error / 4.0).sqrt();
    assert!(
        handoff > 10.0 * joint_rms,
        "handoff residual {handoff} not 10x the joint rms error {joint_rms}"
    );
    assert!(
        baseline.summary.final_opt_gap > joint.summary.final_opt_gap,
        "baseline gap {} should exceed joint gap {}",
        baseline.summary.final_opt_gap,
        joint.summary.final_opt_gap
    );
    assert!(started.elapsed().as_secs_f64() < 60.0, "criterion runtime exceeded");
    pass(
        &format!(
            "c10 sequential baseline dominated (handoff {handoff:.2e} vs joint rms {joint_rms:.2e})"
        ),
        started,
    );
}

#[test]
fn c11_repeated_runs_are_byte_identical() {
    let started = Instant::now();
    let text = r#"
[run]
mode = "misspecified_stochastic"
iterations = 5000
trace_stride = 100
master_seed = 60606
audit = true

[problem]
agents = 6
dimension = 3
family = "random_pd"
family_seed = 61

[learning]
parameter_dimension = 2
rows = 3

[noise]
x = { kind = "gaussian", sigma = 0.1 }
theta = { kind = "uniform", half_width = 0.2 }
"#;
    let file = config::parse_str(text).unwrap();
    let dir = temp_dir("c11");
    let first = output::execute_run(&file, &dir, "first").unwrap();
    let second = output::execute_run(&file, &dir, "second").unwrap();
    let bytes_first = std::fs::read(&first.trace_path).unwrap();
    let bytes_second = std::fs::read(&second.trace_path).unwrap();
    assert_eq!(bytes_first, bytes_second);
    // Manifests agree except for nothing: identical config, identical bytes.
    let manifest_first = std::fs::read(&first.manifest_path).unwrap();
    let manifest_second = std::fs::read(&second.manifest_path).unwrap();
    assert_eq!(manifest_first, manifest_second);
    std::fs::remove_dir_all(&dir).unwrap();
    pass("c11 determinism (byte-identical traces and manifests)", started);
}

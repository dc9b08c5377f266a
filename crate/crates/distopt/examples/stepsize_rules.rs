//! Stepsize admissibility: validate the canonical exponent triple, show how
//! each broken condition is reported, and tabulate the decay diagnostics.
//!
//! ```bash
//! cargo run -p distopt --example stepsize_rules
//! ```

use distopt::schedule::StepsizeSchedule;

fn main() {
    let canonical = StepsizeSchedule::default();
    println!(
        "canonical triple (a1, a2, tau) = ({}, {}, {}): {}",
        canonical.a1,
        canonical.a2,
        canonical.tau,
        canonical.validate()
    );

    for (a1, a2, tau) in [(0.9, 0.51, 0.75), (0.4, 0.9, 0.75), (0.51, 0.9, 1.9), (0.51, 0.9, 0.5)]
    {
        let schedule = StepsizeSchedule::with_exponents(a1, a2, tau);
        println!("({a1}, {a2}, {tau}): {}", schedule.validate());
    }

    println!("\nfirst stepsizes of the canonical schedule:");
    for k in [0, 1, 3, 10, 100, 10_000] {
        println!(
            "  k = {k:>6}: alpha = {:.6}, gamma = {:.6}, alpha^tau/gamma = {:.6}",
            canonical.alpha(k),
            canonical.gamma(k),
            canonical.alpha(k).powf(canonical.tau) / canonical.gamma(k)
        );
    }

    let report = canonical.check_asymptotics(10_000);
    println!("\ndecay diagnostics over {} iterations:", report.horizon);
    println!("  tail ratio decreasing : {}", report.tail_ratio_decreasing);
    println!("  sum gamma             = {:.3} (diverges)", report.sum_gamma);
    println!("  sum gamma^2           = {:.3} (bounded)", report.sum_gamma_sq);
    println!("  sum alpha^(2 - tau)   = {:.3} (bounded)", report.sum_alpha_2_minus_tau);

    // An inadmissible coupling exponent makes the ratio grow instead.
    let bad = StepsizeSchedule::with_exponents(0.51, 0.9, 0.5);
    let report = bad.check_asymptotics(10_000);
    println!(
        "\n(0.51, 0.9, 0.5): tail ratio decreasing = {}, first increase at k = {:?}",
        report.tail_ratio_decreasing, report.first_tail_increase
    );
}

//! Diminishing stepsize sequences for the optimization and learning updates,
//! with admissibility validation.
//!
//! The optimization steps `alpha_k = scale_alpha * (k + offset)^(-a2)` must
//! decay faster than the learning steps `gamma_k = scale_gamma *
//! (k + offset)^(-a1)`; the exponent conditions below couple the two decays
//! and keep both sequences non-summable while `gamma_k^2` and
//! `alpha_k^(2 - tau)` stay summable and `alpha_k^tau / gamma_k` vanishes.

use serde::{Deserialize, Serialize};

use crate::error::ValidationReport;

/// Power-law stepsize pair. The offset shifts the power so the `k = 0` step
/// is defined; the scale factors default to one, reproducing the raw
/// sequences exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepsizeSchedule {
    /// Learning decay exponent.
    pub a1: f64,
    /// Optimization decay exponent.
    pub a2: f64,
    /// Coupling exponent in (0, 2).
    pub tau: f64,
    pub scale_alpha: f64,
    pub scale_gamma: f64,
    pub offset: u64,
}

impl Default for StepsizeSchedule {
    fn default() -> Self {
        // The canonical admissible triple.
        Self {
            a1: 0.51,
            a2: 0.9,
            tau: 0.75,
            scale_alpha: 1.0,
            scale_gamma: 1.0,
            offset: 1,
        }
    }
}

impl StepsizeSchedule {
    pub fn with_exponents(a1: f64, a2: f64, tau: f64) -> Self {
        Self { a1, a2, tau, ..Self::default() }
    }

    /// Optimization stepsize at iteration `k`.
    pub fn alpha(&self, k: u64) -> f64 {
        self.scale_alpha * ((k + self.offset) as f64).powf(-self.a2)
    }

    /// Learning stepsize at iteration `k`.
    pub fn gamma(&self, k: u64) -> f64 {
        self.scale_gamma * ((k + self.offset) as f64).powf(-self.a1)
    }

    /// Check every admissibility condition; the report is empty iff all hold:
    /// `1 > a2 > a1 > 1/2`, `a2 (2 - tau) > 1`, `a1 < tau a2`, `tau in (0,2)`,
    /// positive scales, positive offset.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if !(self.a1 > 0.5) {
            report.push("a1-gt-half", format!("a1 = {} violates a1 > 1/2", self.a1));
        }
        if !(self.a2 > self.a1) {
            report.push(
                "a2-gt-a1",
                format!("a2 = {} and a1 = {} violate a2 > a1", self.a2, self.a1),
            );
        }
        if !(self.a2 < 1.0) {
            report.push("a2-lt-1", format!("a2 = {} violates a2 < 1", self.a2));
        }
        if !(self.tau > 0.0 && self.tau < 2.0) {
            report.push("tau-range", format!("tau = {} violates tau in (0, 2)", self.tau));
        }
        if !(self.a2 * (2.0 - self.tau) > 1.0) {
            report.push(
                "alpha-summable",
                format!(
                    "a2 (2 - tau) = {} violates a2 (2 - tau) > 1",
                    self.a2 * (2.0 - self.tau)
                ),
            );
        }
        if !(self.a1 < self.tau * self.a2) {
            report.push(
                "ratio-decay",
                format!(
                    "a1 = {} and tau a2 = {} violate a1 < tau a2",
                    self.a1,
                    self.tau * self.a2
                ),
            );
        }
        if !(self.scale_alpha > 0.0) {
            report.push(
                "scale-positive",
                format!("scale_alpha = {} must be positive", self.scale_alpha),
            );
        }
        if !(self.scale_gamma > 0.0) {
            report.push(
                "scale-positive",
                format!("scale_gamma = {} must be positive", self.scale_gamma),
            );
        }
        if self.offset == 0 {
            report.push("offset-positive", "offset must be at least 1".to_string());
        }
        report
    }

    /// First iteration at which `gamma_k` drops to `bound` or below.
    pub fn first_k_with_gamma_at_most(&self, bound: f64) -> u64 {
        if bound <= 0.0 {
            return u64::MAX;
        }
        if self.gamma(0) <= bound {
            return 0;
        }
        // gamma(k) <= bound  <=>  (k + offset) >= (scale_gamma / bound)^(1/a1)
        let threshold = (self.scale_gamma / bound).powf(1.0 / self.a1);
        let k = (threshold.ceil() as u64).saturating_sub(self.offset);
        // Power evaluation rounding can make the analytic index off by one.
        let mut k = k;
        while k > 0 && self.gamma(k - 1) <= bound {
            k -= 1;
        }
        while self.gamma(k) > bound {
            k += 1;
        }
        k
    }

    /// Tabulate the decay diagnostics over a finite horizon: monotonicity of
    /// `alpha_k^tau / gamma_k` over the tail `[K/2, K]` and the partial sums
    /// the admissibility conditions control. A numerical illustration, not a
    /// proof.
    pub fn check_asymptotics(&self, horizon: u64) -> AsymptoticsReport {
        let horizon = horizon.max(10);
        let mut sum_gamma = 0.0;
        let mut sum_gamma_sq = 0.0;
        let mut sum_alpha = 0.0;
        let mut sum_alpha_2_minus_tau = 0.0;
        for k in 0..=horizon {
            let alpha = self.alpha(k);
            let gamma = self.gamma(k);
            sum_gamma += gamma;
            sum_gamma_sq += gamma * gamma;
            sum_alpha += alpha;
            sum_alpha_2_minus_tau += alpha.powf(2.0 - self.tau);
        }
        let mut tail_ratio_decreasing = true;
        let mut first_tail_increase = None;
        let mut previous = f64::INFINITY;
        for k in (horizon / 2)..=horizon {
            let ratio = self.alpha(k).powf(self.tau) / self.gamma(k);
            if ratio >= previous {
                tail_ratio_decreasing = false;
                if first_tail_increase.is_none() {
                    first_tail_increase = Some(k);
                }
            }
            previous = ratio;
        }
        AsymptoticsReport {
            horizon,
            tail_ratio_decreasing,
            first_tail_increase,
            final_ratio: self.alpha(horizon).powf(self.tau) / self.gamma(horizon),
            sum_gamma,
            sum_gamma_sq,
            sum_alpha,
            sum_alpha_2_minus_tau,
        }
    }
}

/// Finite-horizon decay diagnostics for a stepsize pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub horizon: u64,
    /// Whether `alpha_k^tau / gamma_k` decreased monotonically over the tail.
    pub tail_ratio_decreasing: bool,
    pub first_tail_increase: Option<u64>,
    pub final_ratio: f64,
    pub sum_gamma: f64,
    pub sum_gamma_sq: f64,
    pub sum_alpha: f64,
    pub sum_alpha_2_minus_tau: f64,
}

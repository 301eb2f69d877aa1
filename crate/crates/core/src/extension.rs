//! Extending a bounded-interval strategy to arbitrary drifts.
//!
//! The extended strategy runs the inner strategy (clamped to the polynomial
//! envelope `C₀(1 + a_max^{n₀})(1 + |q|)`) while the running confidence
//! interval `â ± c/√ζ₂` still meets `[−(1+ε)a_max, (1+ε)a_max]`. Once the
//! interval clears that band by the hysteresis margin, and `ζ₂` has reached a
//! small minimum so that a single early increment cannot trigger it, the
//! strategy switches for the rest of the path to certainty-equivalent control
//! `−κ(T − t, â)·q` with `â` re-estimated at every step.

use serde::{Deserialize, Serialize};

use crate::bayes::SufficientStats;
use crate::error::{domain, Result};
use crate::lqr::{known_a_expected_cost, ProblemSpec};
use crate::sim::{estimate_cost, Partition, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionParams {
    pub a_max: f64,
    pub epsilon: f64,
    pub confidence_c: f64,
    pub n0: i32,
    pub c0: f64,
    pub hysteresis_margin: f64,
    /// Switching is suppressed until `ζ₂` reaches this value.
    pub min_information: f64,
}

impl ExtensionParams {
    /// Defaults: `c = 3`, margin `0.1·a_max`, `n₀ = 1`, `C₀ = 3`, and no
    /// switching before `ζ₂ ≥ 0.05`.
    pub fn new(a_max: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            a_max,
            epsilon,
            confidence_c: 3.0,
            n0: 1,
            c0: 3.0,
            hysteresis_margin: 0.1 * a_max,
            min_information: 0.05,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_confidence(mut self, c: f64) -> Result<Self> {
        self.confidence_c = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return domain(format!("a_max must be positive, got {}", self.a_max));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return domain(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.confidence_c > 0.0 && self.c0 > 0.0 && self.hysteresis_margin >= 0.0) {
            return domain("confidence multiplier, C0 and margin must be positive");
        }
        if !(self.min_information >= 0.0 && self.min_information.is_finite()) {
            return domain("minimum information must be a nonnegative number");
        }
        if self.n0 < 0 {
            return domain("n0 must be nonnegative");
        }
        Ok(())
    }

    /// `C₀·(1 + a_max^{n₀})`.
    pub fn envelope(&self) -> f64 {
        self.c0 * (1.0 + self.a_max.powi(self.n0))
    }

    /// True when the confidence interval has left the widened band by the margin.
    pub fn separated(&self, stats: SufficientStats) -> bool {
        if stats.zeta2 < self.min_information {
            return false;
        }
        let (a_hat, half) = running_drift_estimate(stats, self.confidence_c);
        let edge = (1.0 + self.epsilon) * self.a_max + self.hysteresis_margin;
        a_hat - half > edge || a_hat + half < -edge
    }
}

/// Maximum-likelihood drift `ζ₁/ζ₂` and the half-width `c/√ζ₂`.
pub fn running_drift_estimate(stats: SufficientStats, confidence_c: f64) -> (f64, f64) {
    if stats.zeta2 <= 0.0 {
        return (0.0, f64::INFINITY);
    }
    (stats.zeta1 / stats.zeta2, confidence_c / stats.zeta2.sqrt())
}

/// Wraps `inner` into a strategy usable for every real drift.
pub fn extend_strategy(inner: Strategy, params: ExtensionParams) -> Result<Strategy> {
    params.validate()?;
    Ok(Strategy::Extended {
        inner: Box::new(inner),
        params,
    })
}

/// Drifts used to evaluate `sup{ECost(σ, a′) : |a′ − a| ≤ ε|a|}`: five evenly
/// spaced points across the window (a single point when `a = 0`).
pub fn contract_window(a: f64, epsilon: f64) -> Vec<f64> {
    let r = epsilon * a.abs();
    if r == 0.0 {
        return vec![a];
    }
    (0..5).map(|i| a - r + 0.5 * r * i as f64).collect()
}

/// Right-hand side of the inside-interval contract:
/// `ε + (1 + ε)·max over the window of ECost(inner, a′; T + ε, q0)`.
#[allow(clippy::too_many_arguments)]
pub fn inside_contract_bound(
    inner: &Strategy,
    a: f64,
    horizon: f64,
    q0: f64,
    epsilon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    let partition = Partition::with_step(horizon + epsilon, dt)?;
    let mut worst = f64::NEG_INFINITY;
    for a_prime in contract_window(a, epsilon) {
        worst = worst.max(estimate_cost(inner, a_prime, &partition, q0, n_paths, seed)?.mean);
    }
    Ok(epsilon + (1.0 + epsilon) * worst)
}

/// Right-hand side of the outside-interval contract:
/// `ε + (1 + ε)·ECost(σ_opt(a), a; T, q0)`.
pub fn outside_contract_bound(a: f64, horizon: f64, q0: f64, epsilon: f64) -> Result<f64> {
    let known = known_a_expected_cost(&ProblemSpec::new(a, horizon, q0)?)?;
    Ok(epsilon + (1.0 + epsilon) * known)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_paths, simulate_path};

    #[test]
    fn estimate_examples() {
        let (a, h) = running_drift_estimate(SufficientStats::default(), 3.0);
        assert_eq!(a, 0.0);
        assert!(h.is_infinite());
        let (a, h) = running_drift_estimate(SufficientStats::new(4.0, 2.0).unwrap(), 2.0);
        assert_eq!(a, 2.0);
        assert!((h - 2f64.sqrt()).abs() < 1e-15);
        let (a, h) = running_drift_estimate(SufficientStats::new(-3.0, 9.0).unwrap(), 3.0);
        assert!((a + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(h, 1.0);
    }

    #[test]
    fn params_validate() {
        assert!(ExtensionParams::new(1.0, 0.0).is_err());
        assert!(ExtensionParams::new(1.0, 1.0).is_err());
        assert!(ExtensionParams::new(-1.0, 0.5).is_err());
        let p = ExtensionParams::new(2.0, 0.5).unwrap();
        assert_eq!(p.envelope(), 9.0);
        assert!((p.hysteresis_margin - 0.2).abs() < 1e-15);
        assert!(p.with_confidence(0.0).is_err());
    }

    #[test]
    fn separation_rule() {
        let p = ExtensionParams::new(1.0, 0.5).unwrap();
        // edge = 1.6; â = 3, half-width 3/√9 = 1 → lower bound 2 > 1.6.
        assert!(p.separated(SufficientStats::new(27.0, 9.0).unwrap()));
        assert!(p.separated(SufficientStats::new(-27.0, 9.0).unwrap()));
        // lower bound 1.5 < 1.6.
        assert!(!p.separated(SufficientStats::new(22.5, 9.0).unwrap()));
        assert!(!p.separated(SufficientStats::default()));
        // Far outside the band, but with too little information yet.
        assert!(!p.separated(SufficientStats::new(0.4, 0.04).unwrap()));
    }

    #[test]
    fn switches_are_permanent_and_detect_large_drift() {
        let p = ExtensionParams::new(1.0, 0.5).unwrap();
        let s = extend_strategy(Strategy::KnownA(1.0), p).unwrap();
        let part = Partition::uniform(1.0, 1000).unwrap();
        let batch = run_paths(&s, 6.0, &part, 1.0, 200, 3).unwrap();
        assert_eq!(batch.multi_switch_paths, 0);
        assert!(batch.switched_paths > 150, "{}", batch.switched_paths);
        let one = simulate_path(&s, 6.0, &part, 1.0, 3).unwrap();
        assert!(one.switches <= 1);
    }

    #[test]
    fn contract_window_points() {
        assert_eq!(contract_window(0.0, 0.3), vec![0.0]);
        let w = contract_window(1.0, 0.3);
        assert_eq!(w.len(), 5);
        assert!((w[0] - 0.7).abs() < 1e-15 && (w[4] - 1.3).abs() < 1e-15);
    }
}

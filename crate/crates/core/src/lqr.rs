//! Known-parameter optimal control.
//!
//! For a known drift `a`, the optimal feedback on `dq = (aq + u)dt + dW` with
//! running cost `q² + u²` is `u = -κ(T - t, a)·q`, where
//!
//! ```text
//! κ(s, a) = tanh(s√(a²+1)) / (√(a²+1) − a·tanh(s√(a²+1)))
//! ```
//!
//! and the expected cost from `q0` is `κ(T, a)·q0² + ∫₀ᵀ κ(s, a) ds`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quadrature::adaptive_simpson;

/// Relative tolerance used for the noise-cost integral.
pub const COST_QUADRATURE_TOL: f64 = 1e-8;

/// Problem data shared by every variant: drift, horizon and start position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub a: f64,
    pub horizon: f64,
    pub q0: f64,
}

impl ProblemSpec {
    pub fn new(a: f64, horizon: f64, q0: f64) -> Result<Self> {
        let spec = Self { a, horizon, q0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.q0.is_finite()) {
            return domain("drift and start position must be finite");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return domain(format!("horizon must be positive, got {}", self.horizon));
        }
        Ok(())
    }
}

/// A gain value together with the arguments it was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrGain {
    pub s: f64,
    pub a: f64,
    pub value: f64,
}

impl LqrGain {
    pub fn evaluate(s: f64, a: f64) -> Result<Self> {
        Ok(Self {
            s,
            a,
            value: riccati_gain(s, a)?,
        })
    }
}

/// `κ(s, a)`, the optimal feedback gain with `s` time remaining.
pub fn riccati_gain(s: f64, a: f64) -> Result<f64> {
    if !(s.is_finite() && a.is_finite()) {
        return domain(format!("riccati_gain needs finite inputs, got s={s}, a={a}"));
    }
    if s < 0.0 {
        return domain(format!("remaining time must be nonnegative, got {s}"));
    }
    Ok(gain_unchecked(s, a))
}

/// Gain evaluation without argument checks; callers guarantee `s >= 0`.
#[inline]
pub(crate) fn gain_unchecked(s: f64, a: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let r = a.hypot(1.0);
    let x = s * r;
    // tanh saturates to 1 long before exp(2x) overflows; 1 - tanh is kept
    // separately so that r - a·tanh does not cancel for large positive a.
    let th = x.tanh();
    let one_minus_th = 2.0 / ((2.0 * x).exp() + 1.0);
    let denom = if a > 0.0 {
        1.0 / (r + a) + a * one_minus_th
    } else {
        r - a * th
    };
    th / denom
}

/// Optimal known-`a` control `u = -κ(T - t, a)·q`.
pub fn known_a_control(q: f64, t: f64, spec: &ProblemSpec) -> Result<f64> {
    spec.validate()?;
    if !(0.0..=spec.horizon).contains(&t) {
        return domain(format!("t = {t} outside [0, {}]", spec.horizon));
    }
    let u = -riccati_gain(spec.horizon - t, spec.a)? * q;
    debug_assert!(u.abs() <= tame_bound_factor(spec.a) * q.abs() + 1e-12);
    Ok(u)
}

/// The constant in `|u| ≤ 3·max{|a|, 1}·|q|`, valid for every known-`a` control.
pub fn tame_bound_factor(a: f64) -> f64 {
    3.0 * a.abs().max(1.0)
}

/// Expected cost of the optimal known-`a` strategy over `[0, T]` from `q0`.
pub fn known_a_expected_cost(spec: &ProblemSpec) -> Result<f64> {
    spec.validate()?;
    let a = spec.a;
    let noise_cost = adaptive_simpson(
        |s| gain_unchecked(s, a),
        0.0,
        spec.horizon,
        COST_QUADRATURE_TOL,
    );
    Ok(gain_unchecked(spec.horizon, a) * spec.q0 * spec.q0 + noise_cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form antiderivative of κ, used only as an oracle:
    /// `∫₀ˢ κ = a·s + ln(cosh(rs) − (a/r)·sinh(rs))`.
    fn gain_integral_oracle(s: f64, a: f64) -> f64 {
        let r = (a * a + 1.0).sqrt();
        a * s + ((r * s).cosh() - a / r * (r * s).sinh()).ln()
    }

    #[test]
    fn gain_examples() {
        assert_eq!(riccati_gain(0.0, 5.0).unwrap(), 0.0);
        assert!((riccati_gain(1.0, 0.0).unwrap() - 1f64.tanh()).abs() < 1e-15);
        let limit = 2f64.sqrt() + 1.0;
        assert!((riccati_gain(50.0, 1.0).unwrap() - limit).abs() < 1e-12);
    }

    #[test]
    fn gain_rejects_bad_inputs() {
        assert!(riccati_gain(f64::NAN, 0.0).is_err());
        assert!(riccati_gain(1.0, f64::INFINITY).is_err());
        assert!(riccati_gain(-0.1, 0.0).is_err());
    }

    #[test]
    fn gain_matches_tanh_at_zero_drift() {
        for i in 0..=200 {
            let s = i as f64 * 0.05;
            let k = riccati_gain(s, 0.0).unwrap();
            assert!((k - s.tanh()).abs() <= 2.0 * f64::EPSILON, "s={s}");
        }
    }

    #[test]
    fn gain_stays_finite_for_large_drift() {
        let k = riccati_gain(10.0, 1e6).unwrap();
        // limit √(a²+1) + a
        assert!((k / 2e6 - 1.0).abs() < 1e-9);
        assert!(riccati_gain(10.0, -1e6).unwrap() > 0.0);
    }

    #[test]
    fn control_examples() {
        let spec = ProblemSpec::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(known_a_control(0.0, 0.3, &spec).unwrap(), 0.0);
        assert_eq!(known_a_control(1.0, 1.0, &spec).unwrap(), 0.0);
        let u = known_a_control(2.0, 0.0, &spec).unwrap();
        assert!((u + 1.523188).abs() < 1e-6);
        assert!((u + 2.0 * 1f64.tanh()).abs() < 1e-15);
        assert!(known_a_control(1.0, 1.5, &spec).is_err());
        assert!(known_a_control(1.0, -0.1, &spec).is_err());
    }

    #[test]
    fn expected_cost_examples() {
        let c0 = known_a_expected_cost(&ProblemSpec::new(0.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((c0 - 1f64.cosh().ln()).abs() < 1e-9);
        assert!((c0 - 0.433781).abs() < 1e-6);
        let c1 = known_a_expected_cost(&ProblemSpec::new(0.0, 1.0, 1.0).unwrap()).unwrap();
        assert!((c1 - (1f64.tanh() + 1f64.cosh().ln())).abs() < 1e-9);
        assert!((c1 - 1.195375).abs() < 1e-6);
        let tiny = known_a_expected_cost(&ProblemSpec::new(3.0, 1e-12, 2.0).unwrap()).unwrap();
        assert!(tiny.abs() < 1e-10);
        assert!(ProblemSpec::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn expected_cost_quadrature_matches_antiderivative() {
        for &a in &[-5.0, -2.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            for &t in &[0.1, 1.0, 3.0] {
                let spec = ProblemSpec::new(a, t, 0.0).unwrap();
                let got = known_a_expected_cost(&spec).unwrap();
                let want = gain_integral_oracle(t, a);
                assert!(
                    ((got - want) / want).abs() <= 1e-8,
                    "a={a} T={t}: {got} vs {want}"
                );
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gain_is_nonnegative_and_monotone(a in -10.0f64..10.0, s in 0.0f64..10.0, ds in 0.0f64..1.0) {
                let k = riccati_gain(s, a).unwrap();
                prop_assert!(k >= 0.0);
                prop_assert_eq!(riccati_gain(0.0, a).unwrap(), 0.0);
                prop_assert!(riccati_gain(s + ds, a).unwrap() >= k * (1.0 - 1e-14));
            }

            #[test]
            fn control_obeys_tame_bound(a in -10.0f64..10.0, q in -50.0f64..50.0, frac in 0.0f64..=1.0, horizon in 0.01f64..5.0) {
                let spec = ProblemSpec::new(a, horizon, 0.0).unwrap();
                let u = known_a_control(q, frac * horizon, &spec).unwrap();
                prop_assert!(u.abs() <= tame_bound_factor(a) * q.abs() * (1.0 + 1e-12));
            }
        }
    }
}

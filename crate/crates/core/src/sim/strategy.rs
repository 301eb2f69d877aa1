use std::sync::Arc;

use rand::Rng;

use crate::bayes::{posterior_mean, DiscretePrior, SufficientStats};
use crate::bellman::ValueField;
use crate::error::{domain, Result};
use crate::extension::{running_drift_estimate, ExtensionParams};
use crate::lqr::gain_unchecked;

/// An executable control law. Each kind maps the current position, clock,
/// sufficient statistics and (through [`Strategy::Mixed`]) coin flips to a
/// control held constant until the next partition time.
#[derive(Debug, Clone)]
pub enum Strategy {
    /// `u ≡ 0`.
    Zero,
    /// `u ≡ c`.
    Constant(f64),
    /// The optimal known-`a` feedback `−κ(T − t, a)·q`.
    KnownA(f64),
    /// `−scale·κ(T − t, a)·q`; used to probe optimality of the known-`a` gain.
    ScaledGain { a: f64, scale: f64 },
    /// `−κ(T − t, ā)·q` with `ā` the posterior mean under the given prior.
    CertaintyEquivalent(Arc<DiscretePrior>),
    /// Optimal Bayesian control read from a solved value field.
    BayesField(Arc<ValueField>),
    /// Inner control plus a constant offset.
    Offset { inner: Box<Strategy>, offset: f64 },
    /// One coin flip at `t = 0` picks `right` with probability `theta`, else `left`.
    Mixed {
        left: Box<Strategy>,
        right: Box<Strategy>,
        theta: f64,
    },
    /// Inner control clamped to `±c_tame·(1 + |q|)`.
    Clamped { inner: Box<Strategy>, c_tame: f64 },
    /// Bounded-interval strategy extended to all drifts; see [`crate::extension`].
    Extended {
        inner: Box<Strategy>,
        params: ExtensionParams,
    },
}

impl Strategy {
    pub fn known_a(a: f64) -> Self {
        Strategy::KnownA(a)
    }

    pub fn certainty_equivalent(prior: DiscretePrior) -> Self {
        Strategy::CertaintyEquivalent(Arc::new(prior))
    }

    pub fn bayes(field: Arc<ValueField>) -> Self {
        Strategy::BayesField(field)
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self {
            Strategy::Zero => "zero".into(),
            Strategy::Constant(c) => format!("constant({c})"),
            Strategy::KnownA(a) => format!("known_a({a})"),
            Strategy::ScaledGain { a, scale } => format!("scaled_gain({a}, {scale})"),
            Strategy::CertaintyEquivalent(_) => "certainty_equivalent".into(),
            Strategy::BayesField(_) => "bayes_field".into(),
            Strategy::Offset { inner, offset } => format!("offset({}, {offset})", inner.label()),
            Strategy::Mixed { left, right, theta } => {
                format!("mix({}, {}, {theta})", left.label(), right.label())
            }
            Strategy::Clamped { inner, c_tame } => format!("clamp({}, {c_tame})", inner.label()),
            Strategy::Extended { inner, .. } => format!("extend({})", inner.label()),
        }
    }
}

/// `σ_θ`: plays `right` with probability `theta` and `left` otherwise.
pub fn mix(left: Strategy, right: Strategy, theta: f64) -> Result<Strategy> {
    if !(0.0..=1.0).contains(&theta) {
        return domain(format!("mixing probability {theta} outside [0, 1]"));
    }
    Ok(Strategy::Mixed {
        left: Box::new(left),
        right: Box::new(right),
        theta,
    })
}

/// Clamps `inner` to the tame envelope `±c·(1 + |q|)`.
pub fn tame_clamp(inner: Strategy, c: f64) -> Result<Strategy> {
    if !(c > 0.0 && c.is_finite()) {
        return domain(format!("tame constant must be positive, got {c}"));
    }
    Ok(Strategy::Clamped {
        inner: Box::new(inner),
        c_tame: c,
    })
}

/// What a strategy sees at a partition time.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub q: f64,
    pub t: f64,
    pub horizon: f64,
    pub stats: SufficientStats,
}

/// Per-path event counters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PathEvents {
    pub clamp_events: u64,
    pub out_of_domain: u64,
    pub switches: u32,
    pub switched_at: Option<f64>,
}

/// A strategy instantiated for one path: coin flips resolved, per-path state attached.
pub(crate) enum Policy<'s> {
    Leaf(&'s Strategy),
    Offset(Box<Policy<'s>>, f64),
    Clamped(Box<Policy<'s>>, f64),
    Extended {
        inner: Box<Policy<'s>>,
        params: &'s ExtensionParams,
        switched: bool,
    },
}

impl<'s> Policy<'s> {
    pub fn instantiate<R: Rng>(strategy: &'s Strategy, coins: &mut R) -> Self {
        match strategy {
            Strategy::Mixed { left, right, theta } => {
                let flip: f64 = coins.random();
                if flip < *theta {
                    Self::instantiate(right, coins)
                } else {
                    Self::instantiate(left, coins)
                }
            }
            Strategy::Offset { inner, offset } => {
                Policy::Offset(Box::new(Self::instantiate(inner, coins)), *offset)
            }
            Strategy::Clamped { inner, c_tame } => {
                Policy::Clamped(Box::new(Self::instantiate(inner, coins)), *c_tame)
            }
            Strategy::Extended { inner, params } => Policy::Extended {
                inner: Box::new(Self::instantiate(inner, coins)),
                params,
                switched: false,
            },
            leaf => Policy::Leaf(leaf),
        }
    }

    pub fn control(&mut self, obs: &Observation, events: &mut PathEvents) -> f64 {
        match self {
            Policy::Leaf(s) => leaf_control(s, obs, events),
            Policy::Offset(inner, offset) => inner.control(obs, events) + *offset,
            Policy::Clamped(inner, c) => {
                let u = inner.control(obs, events);
                clamp_counted(u, *c * (1.0 + obs.q.abs()), events)
            }
            Policy::Extended {
                inner,
                params,
                switched,
            } => {
                if !*switched && params.separated(obs.stats) {
                    *switched = true;
                    events.switches += 1;
                    events.switched_at.get_or_insert(obs.t);
                }
                if *switched {
                    let (a_hat, _) = running_drift_estimate(obs.stats, params.confidence_c);
                    -gain_unchecked((obs.horizon - obs.t).max(0.0), a_hat) * obs.q
                } else {
                    let u = inner.control(obs, events);
                    clamp_counted(u, params.envelope() * (1.0 + obs.q.abs()), events)
                }
            }
        }
    }
}

#[inline]
fn clamp_counted(u: f64, bound: f64, events: &mut PathEvents) -> f64 {
    if u.abs() > bound {
        events.clamp_events += 1;
        u.clamp(-bound, bound)
    } else {
        u
    }
}

#[inline]
fn leaf_control(s: &Strategy, obs: &Observation, events: &mut PathEvents) -> f64 {
    let remaining = (obs.horizon - obs.t).max(0.0);
    match s {
        Strategy::Zero => 0.0,
        Strategy::Constant(c) => *c,
        Strategy::KnownA(a) => -gain_unchecked(remaining, *a) * obs.q,
        Strategy::ScaledGain { a, scale } => -scale * gain_unchecked(remaining, *a) * obs.q,
        Strategy::CertaintyEquivalent(prior) => {
            let abar = posterior_mean(prior, obs.stats);
            -gain_unchecked(remaining, abar) * obs.q
        }
        Strategy::BayesField(field) => {
            let (u, clamped) = field.control_checked(obs.q, obs.t, obs.stats);
            if clamped {
                events.out_of_domain += 1;
            }
            u
        }
        Strategy::Offset { .. } | Strategy::Mixed { .. } | Strategy::Clamped { .. } | Strategy::Extended { .. } => {
            unreachable!("composite strategies are expanded by Policy::instantiate")
        }
    }
}

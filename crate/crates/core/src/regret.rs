//! Regret functionals, worst-case regret over finite nets, ε-efficiency and
//! the least-favorable prior search.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{Atom, DiscretePrior};
use crate::bellman::{solve_bellman_shared, SolverGrid};
use crate::error::{domain, Result};
use crate::lqr::{known_a_expected_cost, ProblemSpec};
use crate::sim::{estimate_cost, CostEstimate, Partition, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegretKind {
    Additive,
    Multiplicative,
    Hybrid(f64),
}

impl RegretKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegretKind::Hybrid(g) if !(g > 0.0 && g.is_finite()) => {
                domain(format!("hybrid regret needs a positive gamma, got {g}"))
            }
            _ => Ok(()),
        }
    }

    /// Maps `(ECost(σ, a), ECost(σ_opt(a), a))` to `(regret, scale)`, where
    /// `scale` converts a cost standard error into a regret standard error.
    fn apply(&self, cost: f64, known: f64) -> (f64, f64) {
        match *self {
            RegretKind::Additive => (cost - known, 1.0),
            RegretKind::Multiplicative => (cost / known, 1.0 / known),
            RegretKind::Hybrid(g) => (cost / (known + g), 1.0 / (known + g)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            RegretKind::Additive => "additive".into(),
            RegretKind::Multiplicative => "multiplicative".into(),
            RegretKind::Hybrid(g) => format!("hybrid({g})"),
        }
    }
}

/// Horizon and start position shared by every drift in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: f64,
    pub q0: f64,
}

impl Scenario {
    pub fn new(horizon: f64, q0: f64) -> Result<Self> {
        ProblemSpec::new(0.0, horizon, q0)?;
        Ok(Self { horizon, q0 })
    }

    pub fn known_cost(&self, a: f64) -> Result<f64> {
        known_a_expected_cost(&ProblemSpec::new(a, self.horizon, self.q0)?)
    }
}

/// Monte Carlo settings: path count, time step and master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl McParams {
    pub fn partition(&self, horizon: f64) -> Result<Partition> {
        Partition::with_step(horizon, self.dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretEstimate {
    pub a: f64,
    pub regret: f64,
    pub std_error: f64,
    pub cost: CostEstimate,
    pub known_cost: f64,
}

impl RegretEstimate {
    pub fn reliable(&self) -> bool {
        self.cost.reliable()
    }
}

/// `Regret(σ, a)` with the known-drift cost taken from the closed form.
pub fn regret(strategy: &Strategy, a: f64, kind: RegretKind, scenario: &Scenario, mc: &McParams) -> Result<RegretEstimate> {
    kind.validate()?;
    let partition = mc.partition(scenario.horizon)?;
    let cost = estimate_cost(strategy, a, &partition, scenario.q0, mc.n_paths, mc.seed)?;
    let known_cost = scenario.known_cost(a)?;
    let (value, scale) = kind.apply(cost.mean, known_cost);
    Ok(RegretEstimate {
        a,
        regret: value,
        std_error: cost.std_error * scale,
        cost,
        known_cost,
    })
}

/// Regret over every point of a net, evaluated in parallel.
pub fn regret_profile(
    strategy: &Strategy,
    net: &[f64],
    kind: RegretKind,
    scenario: &Scenario,
    mc: &McParams,
) -> Result<Vec<RegretEstimate>> {
    validate_net(net)?;
    net.par_iter()
        .map(|&a| regret(strategy, a, kind, scenario, mc))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub sup: f64,
    pub sup_std_error: f64,
    pub argmax: Vec<f64>,
    pub profile: Vec<RegretEstimate>,
}

/// Net points whose regret is within two joint standard errors of the largest.
pub fn statistical_argmax(profile: &[RegretEstimate]) -> (usize, Vec<f64>) {
    let top = profile
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.regret.total_cmp(&y.1.regret))
        .map(|(i, _)| i)
        .expect("nonempty profile");
    let best = &profile[top];
    let set = profile
        .iter()
        .filter(|r| {
            let tol = 2.0 * (r.std_error.powi(2) + best.std_error.powi(2)).sqrt();
            r.regret >= best.regret - tol
        })
        .map(|r| r.a)
        .collect();
    (top, set)
}

pub fn worst_case_regret(
    strategy: &Strategy,
    net: &[f64],
    kind: RegretKind,
    scenario: &Scenario,
    mc: &McParams,
) -> Result<WorstCase> {
    let profile = regret_profile(strategy, net, kind, scenario, mc)?;
    Ok(summarize(profile))
}

fn summarize(profile: Vec<RegretEstimate>) -> WorstCase {
    let (top, argmax) = statistical_argmax(&profile);
    WorstCase {
        sup: profile[top].regret,
        sup_std_error: profile[top].std_error,
        argmax,
        profile,
    }
}

fn validate_net(net: &[f64]) -> Result<()> {
    if net.is_empty() {
        return domain("net must contain at least one drift");
    }
    if net.iter().any(|a| !a.is_finite()) || net.windows(2).any(|w| !(w[0] < w[1])) {
        return domain("net must be finite and strictly increasing");
    }
    Ok(())
}

/// `[−a_max, a_max] ∩ 2⁻ⁿℤ`.
pub fn dyadic_net(a_max: f64, n: u32) -> Result<Vec<f64>> {
    if !(a_max > 0.0 && a_max.is_finite()) || n > 20 {
        return domain(format!("invalid dyadic net ({a_max}, {n})"));
    }
    let h = 0.5f64.powi(n as i32);
    let k = (a_max / h + 1e-9).floor() as i64;
    Ok((-k..=k).map(|i| i as f64 * h).collect())
}

/// `(ECost(σ, a))_{a ∈ A}` with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector {
    net: Vec<f64>,
    values: Vec<CostEstimate>,
}

impl CostVector {
    pub fn new(net: Vec<f64>, values: Vec<CostEstimate>) -> Result<Self> {
        validate_net(&net)?;
        if net.len() != values.len() {
            return domain("cost vector length does not match its net");
        }
        if values.iter().any(|v| !(v.mean >= 0.0)) {
            return domain("expected costs must be nonnegative");
        }
        Ok(Self { net, values })
    }

    pub fn measure(strategy: &Strategy, net: &[f64], scenario: &Scenario, mc: &McParams) -> Result<Self> {
        validate_net(net)?;
        let partition = mc.partition(scenario.horizon)?;
        let values = net
            .par_iter()
            .map(|&a| estimate_cost(strategy, a, &partition, scenario.q0, mc.n_paths, mc.seed))
            .collect::<Result<Vec<_>>>()?;
        Self::new(net.to_vec(), values)
    }

    pub fn net(&self) -> &[f64] {
        &self.net
    }

    pub fn values(&self) -> &[CostEstimate] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EfficiencyVerdict {
    Unfalsified,
    /// The challenger at this index beats the candidate by more than ε everywhere.
    Violated { challenger: usize },
}

/// Checks whether any challenger beats `candidate` by more than `ε` at every
/// net point, each comparison significant at two joint standard errors.
pub fn epsilon_efficiency_certificate(
    candidate: &CostVector,
    challengers: &[CostVector],
    epsilon: f64,
) -> Result<EfficiencyVerdict> {
    if !(epsilon > 0.0) {
        return domain(format!("epsilon must be positive, got {epsilon}"));
    }
    for (idx, ch) in challengers.iter().enumerate() {
        if ch.net != candidate.net {
            return domain("cost vectors are defined on different nets");
        }
        let dominated = candidate.values.iter().zip(&ch.values).all(|(c, o)| {
            let se = (c.std_error.powi(2) + o.std_error.powi(2)).sqrt();
            c.mean - o.mean - epsilon > 2.0 * se
        });
        if dominated {
            return Ok(EfficiencyVerdict::Violated { challenger: idx });
        }
    }
    Ok(EfficiencyVerdict::Unfalsified)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxConfig {
    pub epsilon: f64,
    pub max_rounds: usize,
    pub a_max: f64,
    pub grid: SolverGrid,
    pub mc: McParams,
    pub weight_floor: f64,
    pub initial_step: f64,
}

impl MinimaxConfig {
    pub fn new(epsilon: f64, a_max: f64, grid: SolverGrid, mc: McParams) -> Self {
        Self {
            epsilon,
            max_rounds: 60,
            a_max,
            grid,
            mc,
            weight_floor: 1e-4,
            initial_step: 0.5,
        }
    }

    fn validate(&self, net: &[f64]) -> Result<()> {
        validate_net(net)?;
        if !(self.epsilon > 0.0) || self.max_rounds == 0 {
            return domain("epsilon and max_rounds must be positive");
        }
        if !(self.weight_floor > 0.0 && self.weight_floor < 1.0 / net.len() as f64) {
            return domain(format!("weight floor {} too large for the net", self.weight_floor));
        }
        if !(self.initial_step > 0.0) {
            return domain("initial step must be positive");
        }
        if net.iter().any(|a| a.abs() > self.a_max) {
            return domain("net leaves [-a_max, a_max]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxSolution {
    pub kind: RegretKind,
    pub net: Vec<f64>,
    /// Support `E` of the returned prior.
    pub support: Vec<f64>,
    pub prior: DiscretePrior,
    pub strategy: Strategy,
    pub profile: Vec<RegretEstimate>,
    pub sup_regret: f64,
    pub argmax: Vec<f64>,
    /// Max regret over the net minus min regret over `E`.
    pub equalization_gap: f64,
    pub gap_std_error: f64,
    pub epsilon: f64,
    pub certified: bool,
    pub rounds: usize,
}

impl MinimaxSolution {
    /// Smallest regret over the support.
    pub fn support_min_regret(&self) -> f64 {
        self.profile
            .iter()
            .filter(|r| self.support.contains(&r.a))
            .map(|r| r.regret)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn report_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "regret kind: {}", self.kind.label());
        let _ = writeln!(s, "net: {:?}", self.net);
        let _ = writeln!(s, "support: {:?}", self.support);
        let _ = writeln!(s, "prior:");
        for atom in self.prior.atoms() {
            let _ = writeln!(s, "  {} {}", atom.a, atom.p);
        }
        let _ = writeln!(s, "strategy: {}", self.strategy.label());
        let _ = writeln!(s, "sup regret: {} (argmax {:?})", self.sup_regret, self.argmax);
        let _ = writeln!(
            s,
            "equalization gap: {} ± {} (epsilon {})",
            self.equalization_gap, self.gap_std_error, self.epsilon
        );
        let _ = writeln!(s, "certified: {} after {} rounds", self.certified, self.rounds);
        s
    }

    pub fn write_profile_csv<W: Write>(&self, w: W) -> Result<()> {
        write_profile_csv(&self.profile, &self.argmax, w)
    }
}

/// Writes `a,regret,stderr,is_argmax` rows sorted by `a`.
pub fn write_profile_csv<W: Write>(profile: &[RegretEstimate], argmax: &[f64], mut w: W) -> Result<()> {
    let mut rows: Vec<&RegretEstimate> = profile.iter().collect();
    rows.sort_by(|x, y| x.a.total_cmp(&y.a));
    writeln!(w, "a,regret,stderr,is_argmax")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.a, r.regret, r.std_error, argmax.contains(&r.a))?;
    }
    Ok(())
}

/// Bayes-optimal strategy for a prior: the known-drift law for a point mass,
/// otherwise the control read from a solved value field.
pub fn bayes_strategy(prior: &DiscretePrior, grid: &SolverGrid) -> Result<Strategy> {
    match prior.atoms() {
        [only] => Ok(Strategy::KnownA(only.a)),
        _ => Ok(Strategy::bayes(solve_bellman_shared(prior, grid)?)),
    }
}

struct Iterate {
    support: Vec<f64>,
    prior: DiscretePrior,
    strategy: Strategy,
    worst: WorstCase,
    gap: f64,
    gap_se: f64,
}

impl Iterate {
    fn certified(&self, epsilon: f64) -> bool {
        self.gap <= epsilon + 2.0 * self.gap_se
    }
}

fn evaluate_prior(
    net: &[f64],
    log_w: &[f64],
    kind: RegretKind,
    scenario: &Scenario,
    cfg: &MinimaxConfig,
) -> Result<Iterate> {
    let weights = softmax(log_w);
    let atoms: Vec<Atom> = net
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w >= cfg.weight_floor)
        .map(|(&a, &p)| Atom { a, p })
        .collect();
    let prior = DiscretePrior::normalized(atoms, cfg.a_max)?;
    let strategy = bayes_strategy(&prior, &cfg.grid)?;
    let worst = worst_case_regret(&strategy, net, kind, scenario, &cfg.mc)?;
    let support: Vec<f64> = prior.atoms().iter().map(|x| x.a).collect();
    let low = worst
        .profile
        .iter()
        .filter(|r| support.contains(&r.a))
        .min_by(|x, y| x.regret.total_cmp(&y.regret))
        .expect("support lies in the net");
    let gap = worst.sup - low.regret;
    let gap_se = (worst.sup_std_error.powi(2) + low.std_error.powi(2)).sqrt();
    Ok(Iterate {
        support,
        prior,
        strategy,
        worst,
        gap,
        gap_se,
    })
}

fn softmax(log_w: &[f64]) -> Vec<f64> {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Multiplicative-weights search for a prior whose Bayes strategy equalizes
/// regret over its support and dominates it elsewhere on the net.
///
/// Each round solves the Bayes problem for the current prior (atoms below the
/// weight floor are dropped from the solve but keep their internal weight so
/// they can return), measures the regret profile with the same seed every
/// round, and moves weight toward atoms with above-average regret. The step
/// is halved whenever the update direction reverses.
pub fn minimax_prior_search(
    net: &[f64],
    kind: RegretKind,
    scenario: &Scenario,
    cfg: &MinimaxConfig,
) -> Result<MinimaxSolution> {
    kind.validate()?;
    cfg.validate(net)?;
    let finish = |it: Iterate, rounds: usize| MinimaxSolution {
        kind,
        net: net.to_vec(),
        certified: it.certified(cfg.epsilon),
        support: it.support,
        prior: it.prior,
        strategy: it.strategy,
        sup_regret: it.worst.sup,
        argmax: it.worst.argmax,
        profile: it.worst.profile,
        equalization_gap: it.gap,
        gap_std_error: it.gap_se,
        epsilon: cfg.epsilon,
        rounds,
    };

    let mut log_w = vec![0.0; net.len()];
    let mut step = cfg.initial_step;
    let mut previous_direction: Option<Vec<f64>> = None;
    let mut best: Option<Iterate> = None;

    for round in 1..=cfg.max_rounds {
        let it = evaluate_prior(net, &log_w, kind, scenario, cfg)?;
        log::info!(
            "round {round}: support {:?} gap {:.5} ± {:.5} sup {:.5}",
            it.support,
            it.gap,
            it.gap_se,
            it.worst.sup
        );
        if it.certified(cfg.epsilon) {
            return Ok(finish(it, round));
        }

        let weights = softmax(&log_w);
        let regrets: Vec<f64> = it.worst.profile.iter().map(|r| r.regret).collect();
        let mean: f64 = weights.iter().zip(&regrets).map(|(w, r)| w * r).sum();
        let direction: Vec<f64> = regrets.iter().map(|r| r - mean).collect();
        let range = regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - regrets.iter().copied().fold(f64::INFINITY, f64::min);
        if let Some(prev) = &previous_direction {
            let alignment: f64 = prev.iter().zip(&direction).zip(&weights).map(|((p, d), w)| p * d * w).sum();
            if alignment < 0.0 {
                step *= 0.5;
            }
        }
        if range > 0.0 {
            let eta = step / range;
            for (l, d) in log_w.iter_mut().zip(&direction) {
                *l = (*l + eta * d).max(-700.0);
            }
        }
        previous_direction = Some(direction);

        if best.as_ref().is_none_or(|b| it.gap < b.gap) {
            best = Some(it);
        }
        if range == 0.0 {
            break;
        }
    }
    let best = best.expect("at least one round ran");
    log::warn!("minimax search not certified; best gap {}", best.gap);
    Ok(finish(best, cfg.max_rounds))
}

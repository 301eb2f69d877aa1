//! Euler–Maruyama execution of partition strategies and Monte Carlo cost estimates.
//!
//! On each partition interval `[t_ν, t_{ν+1})` the control is held at
//! `u(t_ν)`, the state advances by `(a·q + u)Δt + √Δt·ξ`, the statistics by
//! the left-endpoint rule, and the cost by `(q² + u²)Δt`.
//!
//! Path `i` of an estimate with master seed `s` draws its noise from ChaCha8
//! stream `2i` and its coin flips from stream `2i + 1`, both keyed by `s`. Two
//! strategies evaluated with the same seed therefore see the same Brownian
//! increments (common random numbers), and results do not depend on how paths
//! are scheduled across threads.

mod strategy;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{DiscretePrior, SufficientStats};
use crate::error::{domain, ControlError, Result};
use crate::quadrature::mean_and_variance;

pub use strategy::{mix, tame_clamp, Observation, PathEvents, Strategy};
pub(crate) use strategy::Policy;

/// Paths with `|q|` above this are aborted as blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// `0 = t₀ < t₁ < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
    uniform: bool,
}

/// Compact description of a partition for provenance records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub horizon: f64,
    pub steps: usize,
    pub uniform: bool,
}

impl Partition {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) || steps == 0 {
            return domain(format!("invalid uniform partition ({horizon}, {steps})"));
        }
        let mut times: Vec<f64> = (0..steps).map(|i| horizon * i as f64 / steps as f64).collect();
        times.push(horizon);
        Ok(Self { times, uniform: true })
    }

    /// Uniform partition whose step is at most `dt`.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return domain(format!("step must be positive, got {dt}"));
        }
        Self::uniform(horizon, (horizon / dt - 1e-9).ceil().max(1.0) as usize)
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return domain("partition must start at 0 and contain at least two times");
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return domain("partition times must be finite and strictly increasing");
        }
        Ok(Self { times, uniform: false })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Partition with every interval split in two.
    pub fn refined(&self) -> Self {
        let mut times = Vec::with_capacity(2 * self.times.len() - 1);
        for w in self.times.windows(2) {
            times.push(w[0]);
            times.push(0.5 * (w[0] + w[1]));
        }
        times.push(self.horizon());
        Self {
            times,
            uniform: self.uniform,
        }
    }

    pub fn spec(&self) -> PartitionSpec {
        PartitionSpec {
            horizon: self.horizon(),
            steps: self.steps(),
            uniform: self.uniform,
        }
    }
}

/// Whether Brownian increments are drawn or replaced by zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Brownian,
    Zero,
}

/// One simulated path recorded at the partition times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub times: Vec<f64>,
    pub q_path: Vec<f64>,
    /// Control on each interval; one shorter than `q_path`.
    pub u_path: Vec<f64>,
    pub stats_path: Vec<SufficientStats>,
    pub cost: f64,
    pub clamp_events: u64,
    pub out_of_domain: u64,
    pub switches: u32,
    pub switched_at: Option<f64>,
}

/// Monte Carlo estimate of an expected cost (or of a paired difference).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Paths aborted by blow-up; they are excluded from `mean`.
    pub blowups: usize,
    pub partition: PartitionSpec,
}

impl CostEstimate {
    pub fn reliable(&self) -> bool {
        self.blowups == 0
    }

    pub fn blowup_fraction(&self) -> f64 {
        self.blowups as f64 / self.n_paths as f64
    }

    fn from_samples(samples: &[f64], n_paths: usize, blowups: usize, seed: u64, partition: PartitionSpec) -> Self {
        let (mean, var) = mean_and_variance(samples);
        let std_error = if samples.len() > 1 {
            (var / samples.len() as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            mean,
            std_error,
            n_paths,
            seed,
            blowups,
            partition,
        }
    }
}

/// Per-path outcomes of a batch, in path-index order.
#[derive(Debug, Clone)]
pub struct PathBatch {
    /// Realized cost per path; `None` for blown-up paths.
    pub costs: Vec<Option<f64>>,
    pub clamp_events: u64,
    pub out_of_domain: u64,
    /// Paths with more than one switch event (must stay zero).
    pub multi_switch_paths: usize,
    pub switched_paths: usize,
    /// Switch times of the paths that switched, in path order.
    pub switch_times: Vec<f64>,
    pub seed: u64,
    pub partition: PartitionSpec,
}

impl PathBatch {
    pub fn estimate(&self) -> CostEstimate {
        let ok: Vec<f64> = self.costs.iter().flatten().copied().collect();
        CostEstimate::from_samples(&ok, self.costs.len(), self.costs.len() - ok.len(), self.seed, self.partition)
    }

    pub fn blowups(&self) -> usize {
        self.costs.iter().filter(|c| c.is_none()).count()
    }
}

/// Key bytes for the master seed, expanded with SplitMix64.
fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        chunk.copy_from_slice(&(z ^ (z >> 31)).to_le_bytes());
    }
    key
}

/// Independent noise and coin streams for path `index`.
pub(crate) fn path_rngs(seed: u64, index: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let key = key_from_seed(seed);
    let mut noise = ChaCha8Rng::from_seed(key);
    noise.set_stream(2 * index);
    let mut coins = ChaCha8Rng::from_seed(key);
    coins.set_stream(2 * index + 1);
    (noise, coins)
}

struct PathOutcome {
    cost: f64,
    events: PathEvents,
    blowup: Option<usize>,
}

/// Runs one path, calling `record(t, q, u, stats_before)` at each partition time
/// before the step (with `u = NaN` at the final time).
#[allow(clippy::too_many_arguments)]
fn run_path<F: FnMut(f64, f64, f64, SufficientStats)>(
    strategy: &Strategy,
    a: f64,
    partition: &Partition,
    q0: f64,
    seed: u64,
    index: u64,
    noise: NoiseMode,
    mut record: F,
) -> PathOutcome {
    let (mut rng, mut coins) = path_rngs(seed, index);
    let mut policy = Policy::instantiate(strategy, &mut coins);
    let mut events = PathEvents::default();
    let horizon = partition.horizon();
    let times = partition.times();
    let mut q = q0;
    let mut stats = SufficientStats::default();
    let mut cost = 0.0;

    for (step, w) in times.windows(2).enumerate() {
        let (t, dt) = (w[0], w[1] - w[0]);
        let obs = Observation { q, t, horizon, stats };
        let u = policy.control(&obs, &mut events);
        record(t, q, u, stats);
        cost += (q * q + u * u) * dt;
        let xi: f64 = match noise {
            NoiseMode::Brownian => StandardNormal.sample(&mut rng),
            NoiseMode::Zero => 0.0,
        };
        let dq = (a * q + u) * dt + dt.sqrt() * xi;
        stats = stats.advance(q, u, dq, dt);
        q += dq;
        if !(q.abs() <= BLOWUP_THRESHOLD) || !u.is_finite() || !stats.zeta1.is_finite() {
            return PathOutcome {
                cost,
                events,
                blowup: Some(step),
            };
        }
    }
    record(horizon, q, f64::NAN, stats);
    PathOutcome {
        cost,
        events,
        blowup: None,
    }
}

/// Simulates one path (path index 0 of `seed`).
pub fn simulate_path(strategy: &Strategy, a: f64, partition: &Partition, q0: f64, seed: u64) -> Result<TrajectorySample> {
    simulate_path_with(strategy, a, partition, q0, seed, NoiseMode::Brownian)
}

pub fn simulate_path_with(
    strategy: &Strategy,
    a: f64,
    partition: &Partition,
    q0: f64,
    seed: u64,
    noise: NoiseMode,
) -> Result<TrajectorySample> {
    let n = partition.steps() + 1;
    let mut sample = TrajectorySample {
        times: Vec::with_capacity(n),
        q_path: Vec::with_capacity(n),
        u_path: Vec::with_capacity(n - 1),
        stats_path: Vec::with_capacity(n),
        cost: 0.0,
        clamp_events: 0,
        out_of_domain: 0,
        switches: 0,
        switched_at: None,
    };
    let out = run_path(strategy, a, partition, q0, seed, 0, noise, |t, q, u, s| {
        sample.times.push(t);
        sample.q_path.push(q);
        if u.is_finite() {
            sample.u_path.push(u);
        }
        sample.stats_path.push(s);
    });
    if let Some(step) = out.blowup {
        return Err(ControlError::BlowUp { step });
    }
    sample.cost = out.cost;
    sample.clamp_events = out.events.clamp_events;
    sample.out_of_domain = out.events.out_of_domain;
    sample.switches = out.events.switches;
    sample.switched_at = out.events.switched_at;
    Ok(sample)
}

/// Runs `n_paths` independent paths and keeps per-path outcomes.
pub fn run_paths(
    strategy: &Strategy,
    a: f64,
    partition: &Partition,
    q0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    if n_paths < 2 {
        return domain(format!("need at least 2 paths, got {n_paths}"));
    }
    if !(a.is_finite() && q0.is_finite()) {
        return domain("drift and start position must be finite");
    }
    let outcomes: Vec<PathOutcome> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(strategy, a, partition, q0, seed, i, NoiseMode::Brownian, |_, _, _, _| {}))
        .collect();
    let mut batch = PathBatch {
        costs: Vec::with_capacity(n_paths),
        clamp_events: 0,
        out_of_domain: 0,
        multi_switch_paths: 0,
        switched_paths: 0,
        switch_times: Vec::new(),
        seed,
        partition: partition.spec(),
    };
    for o in outcomes {
        batch.costs.push(o.blowup.is_none().then_some(o.cost));
        batch.clamp_events += o.events.clamp_events;
        batch.out_of_domain += o.events.out_of_domain;
        if o.events.switches > 1 {
            batch.multi_switch_paths += 1;
        }
        if let Some(t) = o.events.switched_at {
            batch.switched_paths += 1;
            batch.switch_times.push(t);
        }
    }
    if batch.blowups() > 0 {
        log::warn!(
            "{} of {n_paths} paths blew up for {} at a = {a}",
            batch.blowups(),
            strategy.label()
        );
    }
    Ok(batch)
}

/// `ECost(σ, a; T, q0)` by Monte Carlo.
pub fn estimate_cost(
    strategy: &Strategy,
    a: f64,
    partition: &Partition,
    q0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<CostEstimate> {
    Ok(run_paths(strategy, a, partition, q0, n_paths, seed)?.estimate())
}

/// `ECost(σ, prior) = Σ p(a)·ECost(σ, a)`, every atom using the same seed.
pub fn estimate_cost_under_prior(
    strategy: &Strategy,
    prior: &DiscretePrior,
    partition: &Partition,
    q0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<CostEstimate> {
    let mut parts = Vec::new();
    for atom in prior.atoms().iter().filter(|x| x.p > 0.0) {
        parts.push((atom.p, estimate_cost(strategy, atom.a, partition, q0, n_paths, seed)?));
    }
    Ok(combine_weighted(&parts))
}

/// Weighted combination of estimates; standard errors add in quadrature.
pub fn combine_weighted(parts: &[(f64, CostEstimate)]) -> CostEstimate {
    let mean = parts.iter().map(|(w, e)| w * e.mean).sum();
    let var: f64 = parts.iter().map(|(w, e)| (w * e.std_error).powi(2)).sum();
    let first = &parts[0].1;
    CostEstimate {
        mean,
        std_error: var.sqrt(),
        n_paths: first.n_paths,
        seed: first.seed,
        blowups: parts.iter().map(|(_, e)| e.blowups).sum(),
        partition: first.partition,
    }
}

/// Paired estimate of `ECost(σ₁, a) − ECost(σ₂, a)` over common random numbers.
/// Paths where either strategy blew up are dropped from the difference.
pub fn paired_difference(
    first: &Strategy,
    second: &Strategy,
    a: f64,
    partition: &Partition,
    q0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<CostEstimate> {
    let x = run_paths(first, a, partition, q0, n_paths, seed)?;
    let y = run_paths(second, a, partition, q0, n_paths, seed)?;
    Ok(paired_from_batches(&x, &y))
}

pub fn paired_from_batches(x: &PathBatch, y: &PathBatch) -> CostEstimate {
    let diffs: Vec<f64> = x
        .costs
        .iter()
        .zip(&y.costs)
        .filter_map(|(a, b)| Some((*a)? - (*b)?))
        .collect();
    let n = x.costs.len();
    CostEstimate::from_samples(&diffs, n, n - diffs.len(), x.seed, x.partition)
}

/// Prior-weighted paired difference of two strategies.
pub fn paired_difference_under_prior(
    first: &Strategy,
    second: &Strategy,
    prior: &DiscretePrior,
    partition: &Partition,
    q0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<CostEstimate> {
    let mut parts = Vec::new();
    for atom in prior.atoms().iter().filter(|x| x.p > 0.0) {
        parts.push((
            atom.p,
            paired_difference(first, second, atom.a, partition, q0, n_paths, seed)?,
        ));
    }
    Ok(combine_weighted(&parts))
}

/// Writes `t,q,u,zeta1,zeta2,switched_at` rows for one trajectory.
pub fn write_trajectory_csv<W: Write>(sample: &TrajectorySample, mut w: W) -> Result<()> {
    writeln!(w, "t,q,u,zeta1,zeta2,switched_at")?;
    let switched = sample.switched_at.map(|t| t.to_string()).unwrap_or_default();
    for (i, t) in sample.times.iter().enumerate() {
        let u = sample.u_path.get(i).map(|u| u.to_string()).unwrap_or_default();
        let s = sample.stats_path[i];
        writeln!(w, "{t},{},{u},{},{},{switched}", sample.q_path[i], s.zeta1, s.zeta2)?;
    }
    Ok(())
}

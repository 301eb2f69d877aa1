//! Backward solution of the Bellman equation for the Bayesian problem.
//!
//! The cost-to-go `S(q, t, ζ₁, ζ₂)` satisfies
//!
//! ```text
//! 0 = ∂ₜS + (āq + ũ)∂_qS + āq²∂_{ζ₁}S + q²∂_{ζ₂}S
//!     + ½∂_q²S + q∂_{qζ₁}S + ½q²∂_{ζ₁}²S + q² + ũ²,      ũ = −½∂_qS
//! ```
//!
//! with `S(·, T, ·, ·) = 0` and `S ≥ 0`, where `ā(ζ₁, ζ₂)` is the posterior mean.
//! The sweep is explicit in time. Second derivatives (including the cross term)
//! are central; first derivatives are central where the local cell Péclet
//! number allows it and upwind otherwise; `∂_{ζ₂}` is always a forward
//! difference since `q² ≥ 0` transports information from larger `ζ₂`.

mod diagnostics;
mod grid;
mod interp;
mod io;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{posterior_mean, DiscretePrior, SufficientStats};
use crate::error::{config, domain, ControlError, Result};

pub use diagnostics::{pde_diagnostics, PdeDiagnostics};
pub use grid::{default_c_tame, Axis, SolverGrid, DEFAULT_STABILITY_FACTOR};
pub use io::{load_field, read_field, save_field, write_field, SCHEME_VERSION};
pub(crate) use interp::Stencil;

/// Quality metrics gathered during a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Interior node updates that went negative and were floored at zero.
    pub floored_interior: u64,
    /// Total interior node updates performed.
    pub interior_updates: u64,
    /// Boundary nodes floored after extrapolation.
    pub floored_boundary: u64,
    /// Largest discrete-equation residual introduced by flooring.
    pub max_residual: f64,
    /// Stored control nodes where `−½∂_qS` left the tame envelope.
    pub clamped_controls: u64,
}

impl SolveReport {
    pub fn floored_fraction(&self) -> f64 {
        if self.interior_updates == 0 {
            0.0
        } else {
            self.floored_interior as f64 / self.interior_updates as f64
        }
    }
}

/// Gridded cost-to-go and control. Arrays are stored with axis order
/// `(t, ζ₂, ζ₁, q)`, `q` fastest.
#[derive(Debug, Clone)]
pub struct ValueField {
    grid: SolverGrid,
    prior: DiscretePrior,
    s: Vec<f64>,
    u: Vec<f64>,
    report: SolveReport,
}

impl ValueField {
    pub(crate) fn from_parts(
        grid: SolverGrid,
        prior: DiscretePrior,
        s: Vec<f64>,
        u: Vec<f64>,
        report: SolveReport,
    ) -> Result<Self> {
        let n = grid.nodes_per_slice() * grid.t.len;
        if s.len() != n || u.len() != n {
            return Err(ControlError::Corrupt(format!(
                "expected {n} values per array, got {} and {}",
                s.len(),
                u.len()
            )));
        }
        Ok(Self { grid, prior, s, u, report })
    }

    pub fn grid(&self) -> &SolverGrid {
        &self.grid
    }

    pub fn prior(&self) -> &DiscretePrior {
        &self.prior
    }

    pub fn report(&self) -> &SolveReport {
        &self.report
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }

    pub fn controls(&self) -> &[f64] {
        &self.u
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    #[inline]
    pub fn index(&self, iq: usize, it: usize, j: usize, k: usize) -> usize {
        let g = &self.grid;
        ((it * g.zeta2.len + k) * g.zeta1.len + j) * g.q.len + iq
    }

    /// Stored value at a node given as `(q, t, ζ₁, ζ₂)` indices.
    pub fn value_at(&self, iq: usize, it: usize, j: usize, k: usize) -> f64 {
        self.s[self.index(iq, it, j, k)]
    }

    pub fn control_at(&self, iq: usize, it: usize, j: usize, k: usize) -> f64 {
        self.u[self.index(iq, it, j, k)]
    }

    /// Interpolated cost-to-go; arguments outside the grid are clamped.
    pub fn interpolate_value(&self, q: f64, t: f64, stats: SufficientStats) -> f64 {
        Stencil::new(&self.grid, q, t, stats.zeta1, stats.zeta2).eval(&self.grid, &self.s)
    }

    /// Interpolated control and whether the query had to be clamped into the grid.
    #[inline]
    pub fn control_checked(&self, q: f64, t: f64, stats: SufficientStats) -> (f64, bool) {
        let st = Stencil::new(&self.grid, q, t, stats.zeta1, stats.zeta2);
        let env = self.grid.c_tame * (1.0 + q.abs());
        (st.eval(&self.grid, &self.u).clamp(-env, env), st.clamped)
    }
}

/// Posterior mean `ā(ζ₁, ζ₂)` as used by the PDE coefficients.
pub fn posterior_drift(prior: &DiscretePrior, zeta1: f64, zeta2: f64) -> f64 {
    posterior_mean(prior, SufficientStats { zeta1, zeta2 })
}

/// Optimal Bayesian control `ũ(q, t, ζ₁, ζ₂)` by multilinear interpolation.
/// Out-of-domain queries are clamped to the grid boundary.
pub fn extract_control(field: &ValueField, q: f64, t: f64, stats: SufficientStats) -> f64 {
    field.control_checked(q, t, stats).0
}

/// `ECost(σ_Bayes, prior) = S(q0, 0, 0, 0)`.
pub fn bayes_value(field: &ValueField, q0: f64) -> Result<f64> {
    let g = &field.grid;
    if !q0.is_finite() || q0 < g.q.min || q0 > g.q.max {
        return domain(format!("q0 = {q0} outside [{}, {}]", g.q.min, g.q.max));
    }
    Ok(field.interpolate_value(q0, 0.0, SufficientStats::default()))
}

/// Solves the Bellman equation backward from `S(·, T) = 0`.
pub fn solve_bellman(prior: &DiscretePrior, grid: &SolverGrid) -> Result<ValueField> {
    grid.validate(prior.support_radius().max(prior.a_max()))?;
    if prior.atoms().iter().any(|x| x.a.abs() > prior.a_max()) {
        return config("prior atoms exceed a_max");
    }
    let g = *grid;
    let (nq, nz1, nz2, nt) = (g.q.len, g.zeta1.len, g.zeta2.len, g.t.len);
    let slab = nq * nz1;
    let slice = slab * nz2;

    let mut abar = vec![0.0; nz2 * nz1];
    for k in 0..nz2 {
        for j in 0..nz1 {
            abar[k * nz1 + j] = posterior_drift(prior, g.zeta1.value(j), g.zeta2.value(k));
        }
    }
    let qs: Vec<f64> = (0..nq).map(|i| g.q.value(i)).collect();

    let mut s_all = vec![0.0; slice * nt];
    let mut u_all = vec![0.0; slice * nt];
    let mut cur = vec![0.0; slice];
    let mut next = vec![0.0; slice];
    let mut report = SolveReport::default();
    let kernel = Kernel::new(&g, &qs, &abar);

    for it in (0..nt - 1).rev() {
        for _ in 0..g.substeps {
            let totals = next
                .par_chunks_mut(slab)
                .enumerate()
                .map(|(k, out)| kernel.step_slab(&cur, k, out))
                .reduce(StepTotals::default, StepTotals::merge);
            if let Some(bad) = totals.non_finite {
                return Err(ControlError::Divergence {
                    slice: it,
                    t: g.t.value(it),
                    detail: format!("non-finite value at node {bad}"),
                });
            }
            report.floored_interior += totals.floored_interior;
            report.floored_boundary += totals.floored_boundary;
            report.interior_updates += totals.interior;
            report.max_residual = report.max_residual.max(totals.max_residual);
            std::mem::swap(&mut cur, &mut next);
        }
        s_all[it * slice..(it + 1) * slice].copy_from_slice(&cur);
        report.clamped_controls +=
            kernel.controls_from_values(&cur, &mut u_all[it * slice..(it + 1) * slice]);
    }

    log::debug!(
        "bellman solve: {} steps, floored {} of {} interior updates",
        g.total_steps(),
        report.floored_interior,
        report.interior_updates
    );
    ValueField::from_parts(g, prior.clone(), s_all, u_all, report)
}

/// Convenience wrapper returning a shareable field.
pub fn solve_bellman_shared(prior: &DiscretePrior, grid: &SolverGrid) -> Result<Arc<ValueField>> {
    solve_bellman(prior, grid).map(Arc::new)
}

#[derive(Debug, Default, Clone, Copy)]
struct StepTotals {
    floored_interior: u64,
    floored_boundary: u64,
    interior: u64,
    max_residual: f64,
    non_finite: Option<usize>,
}

impl StepTotals {
    fn merge(a: Self, b: Self) -> Self {
        Self {
            floored_interior: a.floored_interior + b.floored_interior,
            floored_boundary: a.floored_boundary + b.floored_boundary,
            interior: a.interior + b.interior,
            max_residual: a.max_residual.max(b.max_residual),
            non_finite: match (a.non_finite, b.non_finite) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            },
        }
    }
}

struct Kernel<'a> {
    g: &'a SolverGrid,
    qs: &'a [f64],
    abar: &'a [f64],
    dt: f64,
}

impl<'a> Kernel<'a> {
    fn new(g: &'a SolverGrid, qs: &'a [f64], abar: &'a [f64]) -> Self {
        Self { g, qs, abar, dt: g.dt() }
    }

    /// Advances the `ζ₂`-slab `k` one step backward in time, reading the
    /// previous slice `cur` and writing `out`.
    fn step_slab(&self, cur: &[f64], k: usize, out: &mut [f64]) -> StepTotals {
        let g = self.g;
        let (nq, nz1, nz2) = (g.q.len, g.zeta1.len, g.zeta2.len);
        let slab = nq * nz1;
        let (dq, dz1, dz2) = (g.q.step(), g.zeta1.step(), g.zeta2.step());
        let (inv_dq, inv_2dq, inv_dq2) = (1.0 / dq, 0.5 / dq, 1.0 / (dq * dq));
        let (inv_dz1, inv_2dz1, inv_dz12) = (1.0 / dz1, 0.5 / dz1, 1.0 / (dz1 * dz1));
        let inv_4dqdz1 = 0.25 / (dq * dz1);
        let inv_dz2 = 1.0 / dz2;
        let dt = self.dt;
        let s = &cur[k * slab..(k + 1) * slab];
        let above = (k + 1 < nz2).then(|| &cur[(k + 1) * slab..(k + 2) * slab]);
        let mut totals = StepTotals::default();

        for j in 1..nz1 - 1 {
            let abar = self.abar[k * nz1 + j];
            let row = j * nq;
            for i in 1..nq - 1 {
                let q = self.qs[i];
                let q2 = q * q;
                let n = row + i;
                let c = s[n];
                let (sp, sm) = (s[n + 1], s[n - 1]);
                let sq_c = (sp - sm) * inv_2dq;
                let env = g.c_tame * (1.0 + q.abs());
                let u = (-0.5 * sq_c).clamp(-env, env);
                let b = abar * q + u;
                // Central in q is monotone while |b|Δq ≤ 2·(½).
                let sq = if b.abs() * dq <= 1.0 {
                    sq_c
                } else if b > 0.0 {
                    (sp - c) * inv_dq
                } else {
                    (c - sm) * inv_dq
                };
                let sqq = (sp - 2.0 * c + sm) * inv_dq2;
                let (zp, zm) = (s[n + nq], s[n - nq]);
                let bz = abar * q2;
                let sz = if bz.abs() * dz1 <= q2 {
                    (zp - zm) * inv_2dz1
                } else if bz > 0.0 {
                    (zp - c) * inv_dz1
                } else {
                    (c - zm) * inv_dz1
                };
                let szz = (zp - 2.0 * c + zm) * inv_dz12;
                let sqz = (s[n + nq + 1] - s[n - nq + 1] - s[n + nq - 1] + s[n - nq - 1]) * inv_4dqdz1;
                let sz2 = match above {
                    Some(up) => (up[n] - c) * inv_dz2,
                    None => 0.0,
                };
                let rhs = b * sq + bz * sz + q2 * sz2 + 0.5 * sqq + q * sqz + 0.5 * q2 * szz + q2 + u * u;
                let v = c + dt * rhs;
                if !v.is_finite() {
                    totals.non_finite.get_or_insert(k * slab + n);
                }
                out[n] = if v < 0.0 {
                    totals.floored_interior += 1;
                    totals.max_residual = totals.max_residual.max(-v / dt);
                    0.0
                } else {
                    v
                };
            }
        }
        totals.interior = ((nq - 2) * (nz1 - 2)) as u64;

        // Linear extrapolation (zero second normal derivative) at |q| = Q, then |ζ₁| = Z₁.
        let mut floor = |x: f64| {
            if x < 0.0 {
                totals.floored_boundary += 1;
                0.0
            } else {
                x
            }
        };
        for j in 1..nz1 - 1 {
            let r = j * nq;
            out[r] = floor(2.0 * out[r + 1] - out[r + 2]);
            out[r + nq - 1] = floor(2.0 * out[r + nq - 2] - out[r + nq - 3]);
        }
        let last = (nz1 - 1) * nq;
        for i in 0..nq {
            out[i] = floor(2.0 * out[nq + i] - out[2 * nq + i]);
            out[last + i] = floor(2.0 * out[last - nq + i] - out[last - 2 * nq + i]);
        }
        totals
    }

    /// Fills `u` with the clamped `−½∂_qS` of slice `s`; returns the clamp count.
    fn controls_from_values(&self, s: &[f64], u: &mut [f64]) -> u64 {
        let g = self.g;
        let nq = g.q.len;
        let dq = g.q.step();
        let mut clamped = 0;
        for (row_s, row_u) in s.chunks(nq).zip(u.chunks_mut(nq)) {
            for i in 0..nq {
                let d = if i == 0 {
                    (-3.0 * row_s[0] + 4.0 * row_s[1] - row_s[2]) / (2.0 * dq)
                } else if i == nq - 1 {
                    (3.0 * row_s[i] - 4.0 * row_s[i - 1] + row_s[i - 2]) / (2.0 * dq)
                } else {
                    (row_s[i + 1] - row_s[i - 1]) / (2.0 * dq)
                };
                let env = g.c_tame * (1.0 + self.qs[i].abs());
                let raw = -0.5 * d;
                if raw.abs() > env {
                    clamped += 1;
                }
                row_u[i] = raw.clamp(-env, env);
            }
        }
        clamped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::Atom;
    use crate::lqr::{known_a_expected_cost, riccati_gain, ProblemSpec};

    fn small_grid(horizon: f64, a_max: f64) -> SolverGrid {
        SolverGrid::with_cfl(4.0, 81, 6.0, 21, 6.0, 11, horizon, 11, a_max, default_c_tame(a_max)).unwrap()
    }

    fn known_cost_to_go(a: f64, remaining: f64, q: f64) -> f64 {
        if remaining <= 0.0 {
            return 0.0;
        }
        known_a_expected_cost(&ProblemSpec::new(a, remaining, q).unwrap()).unwrap()
    }

    #[test]
    fn posterior_drift_examples() {
        let point = DiscretePrior::point_mass(0.4, 1.0).unwrap();
        assert_eq!(posterior_drift(&point, 3.0, 2.0), 0.4);
        let sym = DiscretePrior::new(vec![Atom { a: -1.0, p: 0.5 }, Atom { a: 1.0, p: 0.5 }], 1.0).unwrap();
        assert_eq!(posterior_drift(&sym, 0.0, 5.0), 0.0);
        assert!((posterior_drift(&sym, 2.0, 7.0) - 2f64.tanh()).abs() < 1e-15);
        assert!((posterior_drift(&sym, 2.0, 7.0) - 0.964028).abs() < 1e-6);
    }

    #[test]
    fn terminal_slice_is_zero_and_values_nonnegative() {
        let prior = DiscretePrior::new(vec![Atom { a: -1.0, p: 0.3 }, Atom { a: 1.0, p: 0.7 }], 1.0).unwrap();
        let g = small_grid(0.5, 1.0);
        let f = solve_bellman(&prior, &g).unwrap();
        let it = g.t.len - 1;
        for k in 0..g.zeta2.len {
            for j in 0..g.zeta1.len {
                for i in 0..g.q.len {
                    assert_eq!(f.value_at(i, it, j, k), 0.0);
                    assert_eq!(f.control_at(i, it, j, k), 0.0);
                }
            }
        }
        assert!(f.values().iter().all(|&v| v >= 0.0));
        assert_eq!(extract_control(&f, 0.7, 0.5, SufficientStats::new(0.3, 0.2).unwrap()), 0.0);
    }

    #[test]
    fn point_mass_collapses_to_known_drift() {
        let a = 0.5;
        let prior = DiscretePrior::point_mass(a, 1.0).unwrap();
        let g = small_grid(1.0, 1.0);
        let f = solve_bellman(&prior, &g).unwrap();
        for it in 0..6 {
            let t = g.t.value(it);
            for &q in &[-1.0, 0.0, 0.5, 1.5] {
                let iq = g.q.node_index(q).unwrap();
                let want = known_cost_to_go(a, 1.0 - t, q);
                let got = f.value_at(iq, it, 10, 3);
                assert!(((got - want) / want).abs() < 0.02, "t={t} q={q}: {got} vs {want}");
                let u = extract_control(&f, q, t, SufficientStats::new(1.0, 2.0).unwrap());
                let u_want = -riccati_gain(1.0 - t, a).unwrap() * q;
                assert!((u - u_want).abs() <= 0.02 * u_want.abs() + 1e-3, "u {u} vs {u_want}");
            }
        }
    }

    #[test]
    fn symmetric_prior_gives_zero_control_at_origin() {
        let sym = DiscretePrior::new(vec![Atom { a: -1.0, p: 0.5 }, Atom { a: 1.0, p: 0.5 }], 1.0).unwrap();
        let g = small_grid(1.0, 1.0);
        let f = solve_bellman(&sym, &g).unwrap();
        for &t in &[0.0, 0.3, 0.75] {
            for &z2 in &[0.0, 1.3, 4.0] {
                let u = extract_control(&f, 0.0, t, SufficientStats::new(0.0, z2).unwrap());
                assert!(u.abs() < 1e-9, "u({t}, {z2}) = {u}");
            }
        }
    }

    #[test]
    fn bayes_value_reads_nodes_exactly_and_rejects_outside() {
        let prior = DiscretePrior::point_mass(0.0, 1.0).unwrap();
        let g = SolverGrid::with_cfl(3.0, 61, 4.0, 11, 4.0, 5, 0.2, 2, 1.0, 3.0).unwrap();
        let f = solve_bellman(&prior, &g).unwrap();
        let iq = g.q.node_index(1.0).unwrap();
        let v = bayes_value(&f, 1.0).unwrap();
        assert_eq!(v, f.value_at(iq, 0, g.zeta1.node_index(0.0).unwrap(), 0));
        assert!(bayes_value(&f, 3.5).is_err());
    }

    #[test]
    fn shorter_horizon_gives_smaller_cost_to_go() {
        let prior = DiscretePrior::new(vec![Atom { a: -1.0, p: 0.5 }, Atom { a: 1.0, p: 0.5 }], 1.0).unwrap();
        let long = solve_bellman(&prior, &small_grid(1.0, 1.0)).unwrap();
        let short_grid = SolverGrid::with_cfl(4.0, 81, 6.0, 21, 6.0, 11, 0.5, 6, 1.0, 3.0).unwrap();
        let short = solve_bellman(&prior, &short_grid).unwrap();
        // Align by remaining time: short slice m has T' − t = 0.5 − 0.1m; the long
        // field has the same remaining time at slice m + 5.
        for m in 0..6 {
            for k in 0..11 {
                for j in 0..21 {
                    for i in 0..81 {
                        let rem_short = short.value_at(i, m, j, k);
                        let same_remaining = long.value_at(i, m + 5, j, k);
                        let same_clock = long.value_at(i, m, j, k);
                        assert!((rem_short - same_remaining).abs() <= 1e-9 * (1.0 + same_remaining));
                        assert!(rem_short <= same_clock + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn stability_violation_is_reported() {
        let prior = DiscretePrior::point_mass(0.0, 1.0).unwrap();
        let mut g = small_grid(1.0, 1.0);
        g.substeps = 1;
        assert!(matches!(solve_bellman(&prior, &g), Err(ControlError::Config(_))));
    }
}

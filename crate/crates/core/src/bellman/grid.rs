use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Uniform axis `min, min + h, …, max` with `len` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return config(format!("axis needs at least 2 points, got {len}"));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return config(format!("axis bounds [{min}, {max}] are not increasing"));
        }
        Ok(Self { min, max, len })
    }

    pub fn symmetric(half_width: f64, len: usize) -> Result<Self> {
        Self::new(-half_width, half_width, len)
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.len - 1) as f64
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.len {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }

    /// Cell index and fractional offset for `x`, clamped to the axis.
    /// The flag is true when `x` had to be clamped.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64, bool) {
        let h = self.step();
        let mut pos = (x - self.min) / h;
        // Snap to nodes so that queries at grid points read stored values exactly.
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            pos = nearest;
        }
        if !(pos > 0.0) {
            return (0, 0.0, x < self.min || x.is_nan());
        }
        let last = (self.len - 1) as f64;
        if pos >= last {
            return (self.len - 2, 1.0, x > self.max);
        }
        let i = pos.floor() as usize;
        (i, pos - i as f64, false)
    }

    /// Index of the node equal to `x`, if any (within a relative 1e-12 of a step).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let pos = (x - self.min) / self.step();
        let i = pos.round();
        ((pos - i).abs() <= 1e-12 && i >= 0.0 && i <= (self.len - 1) as f64).then_some(i as usize)
    }
}

/// Truncated computational domain for the Bellman equation.
///
/// `t` holds the stored time slices; each interval between them is advanced with
/// `substeps` explicit steps. `c_tame` bounds the extracted control and enters
/// the stability estimate through the drift in `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverGrid {
    pub q: Axis,
    pub zeta1: Axis,
    pub zeta2: Axis,
    pub t: Axis,
    pub substeps: usize,
    pub stability_factor: f64,
    pub c_tame: f64,
}

/// Default stability factor applied to the explicit time-step bound.
pub const DEFAULT_STABILITY_FACTOR: f64 = 0.9;

impl SolverGrid {
    /// Grid with the internal step chosen as the largest one allowed by the
    /// stability bound for drifts up to `a_max`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_cfl(
        q_bound: f64,
        n_q: usize,
        zeta1_bound: f64,
        n_z1: usize,
        zeta2_bound: f64,
        n_z2: usize,
        horizon: f64,
        n_t: usize,
        a_max: f64,
        c_tame: f64,
    ) -> Result<Self> {
        let mut grid = Self {
            q: Axis::symmetric(q_bound, n_q)?,
            zeta1: Axis::symmetric(zeta1_bound, n_z1)?,
            zeta2: Axis::new(0.0, zeta2_bound, n_z2)?,
            t: Axis::new(0.0, horizon, n_t)?,
            substeps: 1,
            stability_factor: DEFAULT_STABILITY_FACTOR,
            c_tame,
        };
        let dt_max = grid.stability_factor * grid.stable_dt(a_max);
        grid.substeps = (grid.t.step() / dt_max).ceil().max(1.0) as usize;
        grid.validate(a_max)?;
        Ok(grid)
    }

    /// The reference grid: `n_q=201, n_ζ₁=41, n_ζ₂=41`, `Q=5, Z₁=8, Z₂=8`,
    /// 51 stored time slices, `C_TAME = 3·max{a_max, 1}`.
    pub fn desk(horizon: f64, a_max: f64) -> Result<Self> {
        Self::with_cfl(5.0, 201, 8.0, 41, 8.0, 41, horizon, 51, a_max, default_c_tame(a_max))
    }

    pub fn horizon(&self) -> f64 {
        self.t.max
    }

    /// Internal explicit time step.
    pub fn dt(&self) -> f64 {
        self.t.step() / self.substeps as f64
    }

    pub fn total_steps(&self) -> usize {
        (self.t.len - 1) * self.substeps
    }

    /// Largest stable explicit step for drifts bounded by `a_max`.
    ///
    /// The (q, ζ₁) diffusion matrix is `½·[[1, q], [q, q²]]`; for the five-point
    /// plus cross stencil its symbol is bounded by `2·(1/Δq + |q|/Δζ₁)²`. The
    /// transport rates add `|b|/Δ` per direction.
    pub fn stable_dt(&self, a_max: f64) -> f64 {
        let (dq, dz1, dz2) = (self.q.step(), self.zeta1.step(), self.zeta2.step());
        let q = self.q.max.abs().max(self.q.min.abs());
        let diffusion = (1.0 / dq + q / dz1).powi(2);
        let drift_q = (a_max * q + self.c_tame * (1.0 + q)) / dq;
        let drift_z1 = a_max * q * q / dz1;
        let drift_z2 = q * q / dz2;
        1.0 / (diffusion + drift_q + drift_z1 + drift_z2)
    }

    pub fn validate(&self, a_max: f64) -> Result<()> {
        if self.q.min >= 0.0 || self.q.max <= 0.0 {
            return config("q axis must straddle 0");
        }
        if self.zeta1.min >= 0.0 || self.zeta1.max <= 0.0 {
            return config("ζ₁ axis must straddle 0");
        }
        if self.q.len < 3 || self.zeta1.len < 3 {
            return config("q and ζ₁ axes need at least 3 points");
        }
        if self.zeta2.min != 0.0 {
            return config("ζ₂ axis must start at 0");
        }
        if self.t.min != 0.0 {
            return config("time axis must start at 0");
        }
        if self.substeps == 0 {
            return config("substeps must be positive");
        }
        if !(self.c_tame > 0.0 && self.c_tame.is_finite()) {
            return config("c_tame must be positive");
        }
        if !(self.stability_factor > 0.0 && self.stability_factor <= 1.0) {
            return config("stability factor must lie in (0, 1]");
        }
        let limit = self.stability_factor * self.stable_dt(a_max);
        if self.dt() > limit {
            return config(format!(
                "explicit step {} exceeds stability limit {limit} (increase substeps)",
                self.dt()
            ));
        }
        Ok(())
    }

    pub fn nodes_per_slice(&self) -> usize {
        self.q.len * self.zeta1.len * self.zeta2.len
    }
}

/// Tame constant used when none is configured.
pub fn default_c_tame(a_max: f64) -> f64 {
    3.0 * a_max.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_locate() {
        let ax = Axis::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(ax.step(), 0.5);
        assert_eq!(ax.locate(-1.0), (0, 0.0, false));
        assert_eq!(ax.locate(1.0), (3, 1.0, false));
        assert_eq!(ax.locate(2.0), (3, 1.0, true));
        assert_eq!(ax.locate(-3.0), (0, 0.0, true));
        let (i, f, out) = ax.locate(0.25);
        assert_eq!((i, out), (2, false));
        assert!((f - 0.5).abs() < 1e-15);
        assert_eq!(ax.node_index(0.5), Some(3));
        assert_eq!(ax.node_index(0.3), None);
        assert!(Axis::new(0.0, 1.0, 1).is_err());
        assert!(Axis::new(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn desk_grid_is_stable() {
        let g = SolverGrid::desk(1.0, 1.0).unwrap();
        assert!(g.dt() <= g.stability_factor * g.stable_dt(1.0));
        let mut bad = g;
        bad.substeps = 1;
        assert!(bad.validate(1.0).is_err());
    }
}

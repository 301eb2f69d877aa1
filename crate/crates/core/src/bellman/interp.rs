//! Multilinear interpolation on the stored `(t, ζ₂, ζ₁, q)` array.

use super::grid::SolverGrid;

/// Location of a query point in the four stored axes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    idx: [usize; 4],
    frac: [f64; 4],
    pub clamped: bool,
}

impl Stencil {
    /// Axis order is `(t, ζ₂, ζ₁, q)`, matching the storage layout.
    #[inline]
    pub fn new(grid: &SolverGrid, q: f64, t: f64, zeta1: f64, zeta2: f64) -> Self {
        let (it, ft, ct) = grid.t.locate(t);
        let (i2, f2, c2) = grid.zeta2.locate(zeta2);
        let (i1, f1, c1) = grid.zeta1.locate(zeta1);
        let (iq, fq, cq) = grid.q.locate(q);
        Self {
            idx: [it, i2, i1, iq],
            frac: [ft, f2, f1, fq],
            clamped: ct || c2 || c1 || cq,
        }
    }

    #[inline]
    pub fn eval(&self, grid: &SolverGrid, data: &[f64]) -> f64 {
        let nq = grid.q.len;
        let s1 = nq;
        let s2 = nq * grid.zeta1.len;
        let s3 = s2 * grid.zeta2.len;
        let strides = [s3, s2, s1, 1];
        let base: usize = self.idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        let mut acc = 0.0;
        for corner in 0..16u32 {
            let mut w = 1.0;
            let mut off = base;
            for d in 0..4 {
                if corner >> (3 - d) & 1 == 1 {
                    w *= self.frac[d];
                    off += strides[d];
                } else {
                    w *= 1.0 - self.frac[d];
                }
            }
            if w != 0.0 {
                acc += w * data[off];
            }
        }
        acc
    }
}

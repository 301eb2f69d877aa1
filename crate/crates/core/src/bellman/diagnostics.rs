//! Numerical stand-ins for the regularity and tameness assumptions on `S`.

use serde::{Deserialize, Serialize};

use super::ValueField;

/// Measured growth constants for finite-difference derivatives of `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeDiagnostics {
    /// Exponent used in the envelope `(1 + |q| + |ζ₁| + ζ₂)^m0`.
    pub m0: i32,
    /// Smallest `K` that bounds every sampled derivative.
    pub measured_k: f64,
    /// Multi-index `(q, t, ζ₁, ζ₂)` attaining `measured_k`.
    pub worst_multi_index: [u8; 4],
    /// Sampled derivatives exceeding the configured `K`.
    pub derivative_violations: u64,
    /// Stored controls outside `C_TAME·(1 + |q|)`.
    pub tame_violations: u64,
    pub samples: u64,
}

impl PdeDiagnostics {
    pub fn passes(&self) -> bool {
        self.derivative_violations == 0 && self.tame_violations == 0
    }
}

fn stencil(order: u8) -> (&'static [i64], &'static [f64]) {
    match order {
        0 => (&[0], &[1.0]),
        1 => (&[-1, 0, 1], &[-0.5, 0.0, 0.5]),
        2 => (&[-1, 0, 1], &[1.0, -2.0, 1.0]),
        _ => (&[-2, -1, 0, 1, 2], &[-0.5, 1.0, 0.0, -1.0, 0.5]),
    }
}

fn multi_indices() -> Vec<[u8; 4]> {
    let mut out = Vec::new();
    for a in 0..=3u8 {
        for b in 0..=3 - a {
            for c in 0..=3 - a - b {
                for d in 0..=3 - a - b - c {
                    if a + b + c + d > 0 {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

/// Samples finite-difference derivatives of order 1–3 at interior nodes (every
/// `stride`-th node along each axis) and compares them with `K·(1 + |q| + |ζ₁| + ζ₂)^m0`.
pub fn pde_diagnostics(field: &ValueField, k_bound: f64, m0: i32, stride: usize) -> PdeDiagnostics {
    let g = field.grid();
    let stride = stride.max(1);
    let lens = [g.q.len, g.t.len, g.zeta1.len, g.zeta2.len];
    let steps = [g.q.step(), g.t.step(), g.zeta1.step(), g.zeta2.step()];
    let mut diag = PdeDiagnostics {
        m0,
        measured_k: 0.0,
        worst_multi_index: [0; 4],
        derivative_violations: 0,
        tame_violations: 0,
        samples: 0,
    };

    for alpha in multi_indices() {
        let stencils: Vec<_> = alpha.iter().map(|&o| stencil(o)).collect();
        let margin: Vec<usize> = alpha.iter().map(|&o| if o == 3 { 2 } else if o > 0 { 1 } else { 0 }).collect();
        let scale: f64 = alpha.iter().zip(&steps).map(|(&o, h)| h.powi(-(o as i32))).product();
        let ranges: Vec<Vec<usize>> = (0..4)
            .map(|d| (margin[d]..lens[d] - margin[d]).step_by(stride).collect())
            .collect();
        for &iq in &ranges[0] {
            for &it in &ranges[1] {
                for &j in &ranges[2] {
                    for &k in &ranges[3] {
                        let mut acc = 0.0;
                        for (oq, cq) in stencils[0].0.iter().zip(stencils[0].1) {
                            for (ot, ct) in stencils[1].0.iter().zip(stencils[1].1) {
                                for (o1, c1) in stencils[2].0.iter().zip(stencils[2].1) {
                                    for (o2, c2) in stencils[3].0.iter().zip(stencils[3].1) {
                                        let w = cq * ct * c1 * c2;
                                        if w != 0.0 {
                                            acc += w * field.value_at(
                                                (iq as i64 + oq) as usize,
                                                (it as i64 + ot) as usize,
                                                (j as i64 + o1) as usize,
                                                (k as i64 + o2) as usize,
                                            );
                                        }
                                    }
                                }
                            }
                        }
                        let deriv = (acc * scale).abs();
                        let envelope = (1.0 + g.q.value(iq).abs() + g.zeta1.value(j).abs() + g.zeta2.value(k)).powi(m0);
                        let ratio = deriv / envelope;
                        diag.samples += 1;
                        if ratio > diag.measured_k {
                            diag.measured_k = ratio;
                            diag.worst_multi_index = alpha;
                        }
                        if ratio > k_bound {
                            diag.derivative_violations += 1;
                        }
                    }
                }
            }
        }
    }

    let nq = g.q.len;
    for (n, &u) in field.controls().iter().enumerate() {
        let q = g.q.value(n % nq);
        if u.abs() > g.c_tame * (1.0 + q.abs()) * (1.0 + 1e-12) {
            diag.tame_violations += 1;
        }
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_all_multi_indices_up_to_order_three() {
        let all = multi_indices();
        // C(3 + 4, 4) − 1 nonzero multi-indices with |α| ≤ 3.
        assert_eq!(all.len(), 34);
        assert!(all.iter().all(|a| a.iter().sum::<u8>() <= 3));
    }

    #[test]
    fn third_order_stencil_is_exact_on_cubics() {
        let (offs, coef) = stencil(3);
        let f = |x: f64| 2.0 * x * x * x - x + 4.0;
        let d: f64 = offs.iter().zip(coef).map(|(&o, c)| c * f(1.5 + o as f64 * 0.1)).sum::<f64>() / 1e-3;
        assert!((d - 12.0).abs() < 1e-8);
    }
}

//! Sufficient statistics and the posterior over a finitely supported prior.
//!
//! Along a path the likelihood of drift `a` is `exp(-(a²/2)·ζ₂ + a·ζ₁)` with
//! `ζ₁ = ∫ q (dq − u dt)` and `ζ₂ = ∫ q² dt`, so the pair `(ζ₁, ζ₂)` is all the
//! posterior needs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ControlError, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub a: f64,
    pub p: f64,
}

/// Probability measure on `[-a_max, a_max]` with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePrior {
    atoms: Vec<Atom>,
    a_max: f64,
}

impl DiscretePrior {
    /// Builds a prior; weights must already sum to one.
    pub fn new(atoms: Vec<Atom>, a_max: f64) -> Result<Self> {
        if !(a_max.is_finite() && a_max > 0.0) {
            return domain(format!("a_max must be positive, got {a_max}"));
        }
        if atoms.is_empty() {
            return domain("prior needs at least one atom");
        }
        for w in atoms.windows(2) {
            if !(w[0].a < w[1].a) {
                return domain("atom locations must be strictly increasing");
            }
        }
        for atom in &atoms {
            if !atom.a.is_finite() || atom.a.abs() > a_max {
                return domain(format!("atom {} outside [-{a_max}, {a_max}]", atom.a));
            }
            if !(atom.p.is_finite() && atom.p >= 0.0) {
                return domain(format!("negative or non-finite weight {}", atom.p));
            }
        }
        let total: f64 = atoms.iter().map(|x| x.p).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return domain(format!("weights sum to {total}, expected 1"));
        }
        Ok(Self { atoms, a_max })
    }

    /// Builds a prior from unnormalized positive weights, sorting by location.
    pub fn normalized(mut atoms: Vec<Atom>, a_max: f64) -> Result<Self> {
        atoms.sort_by(|x, y| x.a.total_cmp(&y.a));
        let total: f64 = atoms.iter().map(|x| x.p).sum();
        if !(total.is_finite() && total > 0.0) {
            return domain("weights must have a positive finite sum");
        }
        for atom in &mut atoms {
            atom.p /= total;
        }
        // Absorb the last rounding error into the heaviest atom.
        let residual = 1.0 - atoms.iter().map(|x| x.p).sum::<f64>();
        if let Some(heaviest) = atoms.iter_mut().max_by(|x, y| x.p.total_cmp(&y.p)) {
            heaviest.p += residual;
        }
        Self::new(atoms, a_max)
    }

    pub fn point_mass(a: f64, a_max: f64) -> Result<Self> {
        Self::new(vec![Atom { a, p: 1.0 }], a_max)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    /// Largest `|a|` among atoms carrying weight.
    pub fn support_radius(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|x| x.p > 0.0)
            .map(|x| x.a.abs())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|x| x.a * x.p).sum()
    }

    /// Parses whitespace-separated `a p` pairs, one per line; `#` starts a comment.
    /// Without an explicit `a_max` the largest `|a|` is used (1 if all atoms sit at 0).
    pub fn from_text(text: &str, a_max: Option<f64>) -> Result<Self> {
        let mut atoms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| ControlError::Domain(format!("line {}: expected `a p`", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| ControlError::Domain(format!("line {}: {e}", lineno + 1)))
            };
            let a = parse(fields.next())?;
            let p = parse(fields.next())?;
            if fields.next().is_some() {
                return domain(format!("line {}: trailing fields", lineno + 1));
            }
            atoms.push(Atom { a, p });
        }
        let a_max = a_max.unwrap_or_else(|| {
            let r = atoms.iter().map(|x| x.a.abs()).fold(0.0, f64::max);
            if r > 0.0 {
                r
            } else {
                1.0
            }
        });
        Self::new(atoms, a_max)
    }

    /// Inverse of [`DiscretePrior::from_text`]; numbers use round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for atom in &self.atoms {
            let _ = writeln!(out, "{} {}", atom.a, atom.p);
        }
        out
    }
}

/// The path functionals `(ζ₁, ζ₂)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub zeta1: f64,
    pub zeta2: f64,
}

impl SufficientStats {
    pub fn new(zeta1: f64, zeta2: f64) -> Result<Self> {
        if !(zeta1.is_finite() && zeta2.is_finite()) || zeta2 < 0.0 {
            return domain(format!("invalid statistics ({zeta1}, {zeta2})"));
        }
        Ok(Self { zeta1, zeta2 })
    }

    /// Left-endpoint update over one step: `ζ₁ += q·(dq − u·dt)`, `ζ₂ += q²·dt`.
    pub fn update(self, q: f64, u: f64, dq: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return domain(format!("time step must be positive, got {dt}"));
        }
        if !(q.is_finite() && u.is_finite() && dq.is_finite() && dt.is_finite()) {
            return domain("non-finite input to statistics update");
        }
        Ok(self.advance(q, u, dq, dt))
    }

    #[inline]
    pub(crate) fn advance(self, q: f64, u: f64, dq: f64, dt: f64) -> Self {
        Self {
            zeta1: self.zeta1 + q * (dq - u * dt),
            zeta2: self.zeta2 + q * q * dt,
        }
    }
}

/// Free-function form of [`SufficientStats::update`].
pub fn update_stats(stats: SufficientStats, q: f64, u: f64, dq: f64, dt: f64) -> Result<SufficientStats> {
    stats.update(q, u, dq, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub atoms: Vec<Atom>,
    pub mean: f64,
}

impl Posterior {
    /// Atom location with the largest posterior weight.
    pub fn mode(&self) -> f64 {
        self.atoms
            .iter()
            .max_by(|x, y| x.p.total_cmp(&y.p))
            .map(|x| x.a)
            .unwrap_or(f64::NAN)
    }
}

#[inline]
fn log_likelihood(a: f64, stats: SufficientStats) -> f64 {
    -0.5 * a * a * stats.zeta2 + a * stats.zeta1
}

/// Softmax with max subtraction; `None` if every entry is `-inf`.
fn normalize_log_weights(logs: &[f64]) -> Option<Vec<f64>> {
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return None;
    }
    let raw: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = raw.iter().sum();
    Some(raw.into_iter().map(|w| w / total).collect())
}

/// Posterior over the prior's atoms given `(ζ₁, ζ₂)`, normalized in log space.
pub fn posterior(prior: &DiscretePrior, stats: SufficientStats) -> Result<Posterior> {
    let logs: Vec<f64> = prior
        .atoms
        .iter()
        .map(|x| x.p.ln() + log_likelihood(x.a, stats))
        .collect();
    let weights = normalize_log_weights(&logs).ok_or_else(|| {
        ControlError::Internal("every atom has zero posterior likelihood".into())
    })?;
    let atoms: Vec<Atom> = prior
        .atoms
        .iter()
        .zip(&weights)
        .map(|(x, &p)| Atom { a: x.a, p })
        .collect();
    let lo = prior.atoms[0].a;
    let hi = prior.atoms[prior.atoms.len() - 1].a;
    let mean = atoms.iter().map(|x| x.a * x.p).sum::<f64>().clamp(lo, hi);
    Ok(Posterior { atoms, mean })
}

/// Posterior mean `ā(ζ₁, ζ₂)`, allocation-free for use in inner loops.
pub fn posterior_mean(prior: &DiscretePrior, stats: SufficientStats) -> f64 {
    let atoms = &prior.atoms;
    if atoms.len() == 1 {
        return atoms[0].a;
    }
    let mut peak = f64::NEG_INFINITY;
    for x in atoms {
        if x.p > 0.0 {
            peak = peak.max(x.p.ln() + log_likelihood(x.a, stats));
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for x in atoms {
        if x.p > 0.0 {
            let w = (x.p.ln() + log_likelihood(x.a, stats) - peak).exp();
            num += w * x.a;
            den += w;
        }
    }
    (num / den).clamp(atoms[0].a, atoms[atoms.len() - 1].a)
}

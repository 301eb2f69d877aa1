//! Experiment configuration: a TOML file of flat sections.
//!
//! ```toml
//! [problem]
//! horizon = 1.0
//! q0 = 1.0
//! a_max = 1.0
//!
//! [net]
//! points = [-1.0, 1.0]   # or: dyadic = 3
//!
//! [mc]
//! n_paths = 10000
//! dt = 0.001
//! seed = 7
//! ```

use std::path::Path;

use agnostic_core::bellman::{default_c_tame, SolverGrid};
use agnostic_core::extension::ExtensionParams;
use agnostic_core::regret::{dyadic_net, McParams, MinimaxConfig, RegretKind, Scenario};
use agnostic_core::{Atom, DiscretePrior};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub regret: RegretSection,
    #[serde(default)]
    pub net: NetSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub prior: Option<PriorSection>,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub extension: ExtensionSection,
    #[serde(default)]
    pub minimax: MinimaxSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub horizon: f64,
    pub q0: f64,
    pub a_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegretSection {
    /// `additive`, `multiplicative` or `hybrid`.
    pub kind: String,
    pub gamma: Option<f64>,
}

impl Default for RegretSection {
    fn default() -> Self {
        Self {
            kind: "hybrid".into(),
            gamma: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub dyadic: Option<u32>,
    pub points: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub n_q: usize,
    pub n_z1: usize,
    pub n_z2: usize,
    pub n_t: usize,
    pub q_bound: f64,
    pub z1_bound: f64,
    pub z2_bound: f64,
    pub c_tame: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            n_q: 201,
            n_z1: 41,
            n_z2: 41,
            n_t: 51,
            q_bound: 5.0,
            z1_bound: 8.0,
            z2_bound: 8.0,
            c_tame: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            dt: 1e-3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySection {
    /// `bayes`, `known-a`, `certainty-equivalent` or `zero`.
    pub kind: String,
    pub a: Option<f64>,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            kind: "bayes".into(),
            a: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtensionSection {
    pub epsilon: f64,
    pub confidence_c: f64,
    pub n0: i32,
    pub c0: f64,
    pub hysteresis_margin: Option<f64>,
    pub min_information: f64,
}

impl Default for ExtensionSection {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            confidence_c: 3.0,
            n0: 1,
            c0: 3.0,
            hysteresis_margin: None,
            min_information: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimaxSection {
    pub epsilon: f64,
    pub max_rounds: usize,
    pub weight_floor: f64,
    pub initial_step: f64,
}

impl Default for MinimaxSection {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_rounds: 60,
            weight_floor: 1e-4,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

fn bad<T>(msg: impl Into<String>) -> Result<T, AppError> {
    Err(AppError::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        let cfg: Self = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.scenario()?;
        cfg.mc_params()?;
        cfg.regret_kind()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn scenario(&self) -> Result<Scenario, AppError> {
        if !(self.problem.a_max > 0.0 && self.problem.a_max.is_finite()) {
            return bad(format!("problem.a_max must be positive, got {}", self.problem.a_max));
        }
        Scenario::new(self.problem.horizon, self.problem.q0).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn mc_params(&self) -> Result<McParams, AppError> {
        if self.mc.n_paths < 2 {
            return bad("mc.n_paths must be at least 2");
        }
        if !(self.mc.dt > 0.0 && self.mc.dt <= self.problem.horizon) {
            return bad(format!("mc.dt must lie in (0, horizon], got {}", self.mc.dt));
        }
        Ok(McParams {
            n_paths: self.mc.n_paths,
            dt: self.mc.dt,
            seed: self.mc.seed,
        })
    }

    pub fn regret_kind(&self) -> Result<RegretKind, AppError> {
        let kind = match self.regret.kind.as_str() {
            "additive" => RegretKind::Additive,
            "multiplicative" => RegretKind::Multiplicative,
            "hybrid" => match self.regret.gamma {
                Some(g) => RegretKind::Hybrid(g),
                None => return bad("hybrid regret requires regret.gamma"),
            },
            other => return bad(format!("unknown regret kind '{other}'")),
        };
        kind.validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(kind)
    }

    /// Drifts of the evaluation net, sorted.
    pub fn net(&self) -> Result<Vec<f64>, AppError> {
        let net = match (&self.net.dyadic, &self.net.points) {
            (Some(n), None) => dyadic_net(self.problem.a_max, *n).map_err(|e| AppError::Config(e.to_string()))?,
            (None, Some(points)) => {
                let mut p = points.clone();
                p.sort_by(f64::total_cmp);
                p
            }
            (None, None) => return bad("no net configured (set net.points or net.dyadic)"),
            (Some(_), Some(_)) => return bad("set only one of net.points and net.dyadic"),
        };
        if net.is_empty() {
            return bad("the net is empty");
        }
        if net.iter().any(|a| !a.is_finite()) || net.windows(2).any(|w| w[0] == w[1]) {
            return bad("net points must be finite and distinct");
        }
        Ok(net)
    }

    /// Net restricted to the bounded interval.
    pub fn bounded_net(&self) -> Result<Vec<f64>, AppError> {
        let net = self.net()?;
        if let Some(a) = net.iter().find(|a| a.abs() > self.problem.a_max) {
            return bad(format!("net point {a} lies outside [-a_max, a_max]"));
        }
        Ok(net)
    }

    pub fn prior(&self) -> Result<DiscretePrior, AppError> {
        let Some(p) = &self.prior else {
            return bad("this mode needs a [prior] section");
        };
        if p.atoms.len() != p.weights.len() {
            return bad("prior.atoms and prior.weights differ in length");
        }
        let atoms = p.atoms.iter().zip(&p.weights).map(|(&a, &p)| Atom { a, p }).collect();
        DiscretePrior::normalized(atoms, self.problem.a_max).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<SolverGrid, AppError> {
        let s = &self.solver;
        let c_tame = s.c_tame.unwrap_or_else(|| default_c_tame(self.problem.a_max));
        SolverGrid::with_cfl(
            s.q_bound,
            s.n_q,
            s.z1_bound,
            s.n_z1,
            s.z2_bound,
            s.n_z2,
            self.problem.horizon,
            s.n_t,
            self.problem.a_max,
            c_tame,
        )
        .map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn extension_params(&self) -> Result<ExtensionParams, AppError> {
        let e = &self.extension;
        let mut p = ExtensionParams::new(self.problem.a_max, e.epsilon).map_err(|e| AppError::Config(e.to_string()))?;
        p.confidence_c = e.confidence_c;
        p.n0 = e.n0;
        p.c0 = e.c0;
        p.min_information = e.min_information;
        if let Some(m) = e.hysteresis_margin {
            p.hysteresis_margin = m;
        }
        p.validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn minimax_config(&self) -> Result<MinimaxConfig, AppError> {
        let m = &self.minimax;
        let mut cfg = MinimaxConfig::new(m.epsilon, self.problem.a_max, self.grid()?, self.mc_params()?);
        cfg.max_rounds = m.max_rounds;
        cfg.weight_floor = m.weight_floor;
        cfg.initial_step = m.initial_step;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[problem]\nhorizon = 1.0\nq0 = 1.0\na_max = 1.0\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.mc, McSection::default());
        assert_eq!(cfg.regret_kind().unwrap(), RegretKind::Hybrid(1.0));
        assert!(cfg.net().is_err());
        assert!(cfg.prior().is_err());
    }

    #[test]
    fn partial_sections_keep_remaining_defaults() {
        let cfg = ExperimentConfig::from_toml(&format!(
            "{BASE}[minimax]\nepsilon = 0.1\n[mc]\nseed = 4\n[solver]\nn_q = 101\n[regret]\nkind = \"additive\"\n"
        ))
        .unwrap();
        assert_eq!(cfg.minimax.epsilon, 0.1);
        assert_eq!(cfg.minimax.max_rounds, MinimaxSection::default().max_rounds);
        assert_eq!(cfg.mc.n_paths, McSection::default().n_paths);
        assert_eq!(cfg.mc.seed, 4);
        assert_eq!(cfg.solver.n_z1, SolverSection::default().n_z1);
        assert_eq!(cfg.regret_kind().unwrap(), RegretKind::Additive);
    }

    #[test]
    fn nets_and_priors() {
        let cfg = ExperimentConfig::from_toml(&format!(
            "{BASE}[net]\npoints = [1.0, -1.0]\n[prior]\natoms = [-1.0, 1.0]\nweights = [1.0, 3.0]\n"
        ))
        .unwrap();
        assert_eq!(cfg.net().unwrap(), vec![-1.0, 1.0]);
        assert_eq!(cfg.prior().unwrap().atoms()[1].p, 0.75);
        let dy = ExperimentConfig::from_toml(&format!("{BASE}[net]\ndyadic = 3\n")).unwrap();
        assert_eq!(dy.net().unwrap().len(), 17);
        let empty = ExperimentConfig::from_toml(&format!("{BASE}[net]\npoints = []\n")).unwrap();
        assert!(matches!(empty.net(), Err(AppError::Config(_))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml("[problem]\nhorizon = 1.0\n").is_err());
        assert!(ExperimentConfig::from_toml(&format!("{BASE}bogus = 1\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{BASE}[mc]\nn_paths = 1\ndt = 0.01\nseed = 0\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{BASE}[regret]\nkind = \"hybrid\"\ngamma = -1.0\n")).is_err());
        assert!(ExperimentConfig::from_toml("[problem]\nhorizon = -1.0\nq0 = 0.0\na_max = 1.0\n").is_err());
    }
}

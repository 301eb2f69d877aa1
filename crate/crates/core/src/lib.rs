//! Control of the scalar system `dq = (a·q + u)dt + dW` with quadratic cost
//! `∫(q² + u²)dt` when the drift `a` is unknown.
//!
//! The crate covers the known-drift Riccati solution ([`lqr`]), Bayesian
//! filtering on a discrete prior ([`bayes`]), a finite-difference solver for
//! the Bayesian cost-to-go ([`bellman`]), Monte Carlo execution of strategies
//! ([`sim`]), regret and least-favorable prior search ([`regret`]), and the
//! extension of bounded-interval strategies to arbitrary drifts
//! ([`extension`]).

/// Crate version, recorded in experiment provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod bayes;
pub mod bellman;
pub mod error;
pub mod extension;
pub mod lqr;
pub mod quadrature;
pub mod regret;
pub mod sim;

pub use bayes::{posterior, posterior_mean, update_stats, Atom, DiscretePrior, Posterior, SufficientStats};
pub use bellman::{
    bayes_value, extract_control, load_field, save_field, solve_bellman, solve_bellman_shared, SolveReport,
    SolverGrid, ValueField,
};
pub use error::{ControlError, Result};
pub use extension::{extend_strategy, running_drift_estimate, ExtensionParams};
pub use lqr::{known_a_control, known_a_expected_cost, riccati_gain, tame_bound_factor, ProblemSpec};
pub use regret::{
    minimax_prior_search, regret, worst_case_regret, McParams, MinimaxConfig, MinimaxSolution, RegretKind, Scenario,
};
pub use sim::{
    estimate_cost, estimate_cost_under_prior, mix, simulate_path, tame_clamp, CostEstimate, Partition, Strategy,
    TrajectorySample,
};

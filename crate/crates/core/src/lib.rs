//! Robust two-armed bandit experimentation under multiplier preferences.
//!
//! A decision maker splits effort between a safe arm paying `r` and an
//! ambiguous arm whose drift is either `theta_low` or `theta_high`, observed
//! through Brownian noise of volatility `sigma`. Nature distorts that noise,
//! penalised by `alpha` times the discounted relative entropy. In equilibrium
//! the problem collapses to a one-dimensional free-boundary HJB in the
//! posterior belief `p`, solved here three ways:
//!
//! - [`model`]: closed-form value function `v(p)` and cutoff `p̄`;
//! - [`hjb`]: a finite-difference obstacle solver that never looks at the
//!   closed forms;
//! - [`sim`]: Monte-Carlo simulation of the equilibrium belief diffusion.
//!
//! [`expert`] adds an unambiguous expert signal of volatility `gamma`, and
//! [`two_period`] brute-forces the discrete two-period game.

pub mod error;
pub mod expert;
pub mod hjb;
pub mod model;
pub mod sim;
pub mod two_period;

pub use error::ModelError;
pub use expert::{surplus, surplus_argmax, ExpertClosedForm, SurplusPeak};
pub use hjb::{solve_baseline, solve_expert, Grid, GridSolution, SolveMethod, SolverOptions};
pub use model::{optimal_allocation, Belief, ClosedForm, ModelParams};
pub use sim::{
    martingale_check, quadratic_variation_bins, simulate_equilibrium, simulate_forced,
    MartingaleDiagnostic, QvBin, SimConfig, SimResult,
};
pub use two_period::{solve_two_period, TwoPeriodConfig, TwoPeriodResult};

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

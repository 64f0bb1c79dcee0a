//! Value function approximation for network revenue management with
//! dynamically generated exponential ridge basis functions.

pub mod algorithm;
pub mod error;
pub mod exact;
pub mod flow;
pub mod lp;
pub mod master;
pub mod model;
pub mod simulate;
pub mod subproblem;
pub mod vfa;

pub use algorithm::{h2pialg, nlialg, solve_aa, AlgoConfig, Mode, RunResult, RunTrace, StopReason};
pub use error::{NrmError, Result};
pub use exact::{bellman_residual, value_iteration, ValueTable};
pub use model::{Action, Instance, State};
pub use simulate::{ck_met, simulate_policy, Policy, SimOptions, SimResult};
pub use vfa::{decide, eval_approx, eval_basis, project_norm, AffineBaseline, Approximation, Baseline, RidgeBasis};

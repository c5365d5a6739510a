//! Variational EM core: posterior updates with observed-entry index sets,
//! the evidence lower bound, the fit loop and multi-restart selection.

mod context;
mod elbo;
mod fit;
mod state;
mod updates;

pub use context::FitContext;
pub use elbo::elbo;
pub use fit::{fit, fit_restarts, FitResult, RestartRun, RestartSummary, ACTIVE_RVAR_THRESHOLD};
pub use state::{init_state, Hyperparams, LatentCov, ModalityPosterior, VariationalState};
pub use updates::{update_qalpha, update_qtau, update_qw, update_qz};

//! Randomized continuous-time splitting for L1-regularized least squares and
//! the discrete Allen–Cahn classification flow.
//!
//! A binary Markov process switches between two subflows, each solved in
//! closed form. The crate provides the subflows, the switching process,
//! deterministic baselines for the unsplit flows, ensemble diagnostics and
//! an experiment harness.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod allen_cahn;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod flow;
pub mod harness;
pub mod numkit;
pub mod sparse_flow;
pub mod switching;
pub mod trajectory;

pub use allen_cahn::{ClassificationProblem, LinearMode, ObservationMask};
pub use diagnostics::{Coupling, EnsembleStats, WassersteinConfig};
pub use ensemble::ExecPolicy;
pub use error::{Error, Result};
pub use flow::SwitchedFlow;
pub use sparse_flow::SparseProblem;
pub use switching::{Regime, SwitchConfig, SwitchSchedule};
pub use trajectory::{TimeGrid, TrajectorySample};

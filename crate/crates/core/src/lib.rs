//! Approximate dictionary learning by greedy threshold-correlation pursuit.
//!
//! Given signals `X` (d × n) the learner builds a dictionary `A'` one atom at a
//! time. Each atom is the answer to a weighted *threshold correlation* (τ-TC)
//! problem over the current residuals; every residual that correlates with the
//! new atom above the (relaxed) threshold has the atom projected out of it.
//!
//! Modules:
//!
//! * [`matrix`]: dense column storage, the learned [`DictModel`], residual
//!   bookkeeping and the projection step.
//! * [`tc`]: the τ-TC objective, the bi-criteria candidate-scan solver and
//!   brute-force oracles.
//! * [`pursuit`]: the dictionary learner with its per-iteration trace and
//!   executable checks of the inequalities its analysis rests on.
//! * [`outlier`]: the variant that tolerates a ρ fraction of arbitrary columns.
//! * [`norms2p`]: lower bounds for 2→p operator norms via level-set reduction
//!   to τ-TC.
//! * [`synth`]: planted instances with exactly known ground truth.
//! * [`metrics`]: evaluation of a learned model against planted truth.
//! * [`io`]: CSV matrices and JSON records shared by the command line.

pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod norms2p;
pub mod outlier;
pub mod pursuit;
pub mod synth;
pub mod tc;

pub use error::{Error, Result};
pub use matrix::{positive_part, residual_update, DictModel, ResidualState, SignalMatrix};
pub use norms2p::{eval_2_to_p, lower_bound_2_to_p, NormBound, NormInstance};
pub use outlier::{outlier_dict_approx, psi_hat, OutlierConfig, OutlierResult};
pub use pursuit::{dict_approx, LearnConfig, LearnTrace, TerminationReason};
pub use synth::{generate, DictKind, PlantedInstance, SynthParams};
pub use tc::{evaluate, solve_bicriteria, BicriteriaSolver, CandidateScan, TcInstance, TcSolution};

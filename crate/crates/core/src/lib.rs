//! Optimal dividend barrier and proportional reinsurance for a diffusion
//! insurance model, with a constraint on the probability of ruin before a
//! fixed horizon.
//!
//! * [`model`]: parameter sets and their validation.
//! * [`closed_form`]: the explicit value function, optimal retention and barrier.
//! * [`ruin_pde`]: finite-difference ruin probabilities and the constrained barrier.
//! * [`sde_sim`]: Monte Carlo simulation of the controlled reserve.
//! * [`policy`]: the full decision procedure.

pub mod closed_form;
pub mod error;
pub mod model;
pub mod numeric;
pub mod policy;
pub mod ruin_pde;
pub mod sde_sim;

pub use closed_form::{ruin_lower_bound, ClosedForm, Coefficients, HjbResidual, ValueCoeffs};
pub use error::{Error, Result};
pub use model::{CramerLundbergInputs, ModelParams, RawModelInputs};
pub use policy::{solve_policy, value_ratio, PolicySolution};
pub use ruin_pde::{PdeGrid, PdeSettings, Regime};
pub use sde_sim::{McEstimate, SimConfig, SimMode, Simulator};

//! Discrete-velocity solver and verification toolkit for the BGK relaxation
//! model of barotropic gas dynamics.
//!
//! The model evolves a phase-space density `f(t, x, v)` by free transport
//! and relaxation towards a compactly supported power-law equilibrium
//! `M[f]` over a time scale `tau`. Besides the solver, the crate evaluates
//! every constructive estimate attached to the model (moment identities,
//! minimization principle, stability bounds, entropy budgets, tightness and
//! the small-`tau` fluid limit) so they can be checked numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod hydro;
pub mod lifting;
pub mod maxwellian;
pub mod params;
pub mod phase_space;
pub mod scenario;
pub mod solver;
pub mod stability;
pub mod summation;
pub mod verify;

pub use error::{BgkError, Result};
pub use maxwellian::{ExtendedReal, MaxwellianSpec};
pub use params::{lambda_constant, Exponent, ModelParams};
pub use phase_space::{moments, DistributionField, DomainMode, MacroField, PhaseGrid};

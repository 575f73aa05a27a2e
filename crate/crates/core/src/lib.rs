//! Approximate message passing with side information (AMP-SI).
//!
//! The crate provides the pieces needed to run AMP-SI on synthetic compressed-sensing
//! problems and compare it with its state-evolution prediction:
//!
//! * [`prior`]: joint laws of the signal and its side information (GG and BG models).
//! * [`linear_model`]: Gaussian measurement matrices and `y = A·x + w` instances.
//! * [`denoise`]: conditional-MMSE scalar denoisers and their derivatives.
//! * [`amp`]: the AMP iteration with Onsager correction.
//! * [`state_evolution`]: the scalar `λ_t²` recursion (closed form or Monte Carlo).
//! * [`metrics`]: averaged losses paired with their state-evolution limits.
//! * [`experiment`]: multi-trial experiments and CSV/JSON reports.

pub mod amp;
pub mod denoise;
pub mod error;
pub mod experiment;
pub mod linear_model;
pub mod metrics;
pub mod prior;
pub mod state_evolution;

pub use error::{Error, Result};

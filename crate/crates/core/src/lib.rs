//! Numerical laboratory for weak-to-strong generalization.
//!
//! The crate is organised bottom-up:
//!
//! * [`bregman`]: Bregman geometries, dual maps and bias-variance decompositions.
//! * [`losses`]: CE/RCE/KL family on the probability simplex plus composite losses.
//! * [`ridge`]: the random-feature ridge teacher/student simulation and its
//!   closed-form asymptotic misfit bound.
//! * [`harness`]: exact enumeration of finite teacher/student scenarios for the
//!   misfit inequalities and the ensemble bias-variance estimator.
//! * [`trainer`]: desk-scale weak-to-strong training on synthetic Gaussian tasks.

pub mod bregman;
pub mod error;
pub mod harness;
pub mod losses;
pub mod ridge;
pub mod rng;
pub mod simplex;
pub mod trainer;

pub use error::{Error, Result};
pub use simplex::ProbVector;

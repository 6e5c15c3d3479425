//! Exact verification of the misfit inequalities on finite teacher/student
//! scenarios, plus the ensemble bias-variance estimator.
//!
//! Every expectation is a finite sum over inputs and the joint teacher ×
//! student table, so identities can be checked to rounding error.

mod ensemble;
mod scenario;
pub mod suites;
mod theorems;

pub use ensemble::{bias_variance_estimate, ensemble_dual_mean_prediction, BiasVariance};
pub use scenario::{flat_dirichlet, random_point, random_spd, FiniteScenario, ScenarioShape};
pub use theorems::{
    epsilon_decomposition_check, posterior_mean_scenario, verify_corollary1, verify_corollary3, verify_prop1,
    verify_theorem1, verify_theorem_a, Corollary3Report, Direction, Eq10Row, Prop1Report, TheoremReport,
};

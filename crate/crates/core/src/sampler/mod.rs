//! Sampling-based MPC: Gaussian proposals, importance weights, ensemble
//! rollouts with resampling, and the receding-horizon controller.

pub mod controller;
pub mod policy;
pub mod rollouts;
pub mod theory;
pub mod weights;

use thiserror::Error;

pub use controller::{Algorithm, Controller, ControllerSpec, StepDiagnostics};
pub use policy::{stream_rng, GaussianPolicy};
pub use rollouts::{rollout_ensemble, Rewire, RolloutContext, SafetyPredicate, WeightedEnsemble};
pub use weights::{cem_weights, ess, mppi_weights, normalize, snis_estimate};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SamplerError {
    #[error("degenerate ensemble: every weight is zero")]
    DegenerateEnsemble,
    #[error("invalid sampler configuration: {0}")]
    Invalid(String),
}

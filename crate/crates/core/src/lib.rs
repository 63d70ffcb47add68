//! Covariance-driven stochastic subspace identification of innovations-form
//! state-space models, with semidefinite repair of invalid covariance models
//! and confidence-tagged H2/H∞ model-error bounds.

pub mod error;
pub mod linalg;
pub mod model;
pub mod asymptotics;
pub mod sdp;
pub mod sysid;
pub mod repair;
pub mod error_bounds;
pub mod harness;

pub use error::{Error, Result};
pub use model::{CovarianceModel, InnovationsModel};

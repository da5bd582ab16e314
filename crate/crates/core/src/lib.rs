//! Bilinear-spline longitudinal mediation models with unknown knots:
//! model-implied moments, full-information maximum likelihood, effect
//! decomposition with delta-method inference, and a Monte Carlo harness.

pub mod cli;
pub mod data;
pub mod effects;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod model;
pub mod simulation;

pub use data::{Dataset, Individual};
pub use error::{Error, Result};
pub use estimation::{fiml_loglik, fit, FitOptions, FitResult, FitStatus};
pub use model::{ModelKind, Params, Process};

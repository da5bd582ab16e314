//! Maximum-likelihood estimation.

pub mod fit;
pub mod likelihood;
pub mod optimizer;
pub mod start;
pub mod transform;

pub use fit::{fit, natural_hessian, FitOptions, FitResult, FitStatus, ParameterEstimate, StartRecord};
pub use likelihood::{fiml_loglik, FimlEvaluator};
pub use start::starting_values;
pub use transform::{ParameterVector, Transform};

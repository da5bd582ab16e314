//! Data generation and the Monte Carlo evaluation harness.

pub mod design;
pub mod generate;
pub mod metrics;
pub mod runner;

pub use design::{population_params, target_cov, ConditionSpec, Scenario, Shape};
pub use generate::{generate_dataset, generate_schedule, r2_to_coefficient};
pub use metrics::{performance_metrics, PerformanceMetrics};
pub use runner::{
    fit_quantities, quantities, replication_rng, run_condition, run_condition_with_workers, workers_from_env, ConditionResult,
    Estimator, MleEstimator, Quantity, QuantityEstimate, QuantityGroup, ReplicateRecord,
    Replication, TruthEstimator, WORKERS_ENV,
};

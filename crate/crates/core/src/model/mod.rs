//! Domain types and moment structures of the bilinear-spline mediation
//! models.

pub mod loadings;
pub mod moments;
pub mod params;
pub mod schedule;

pub use loadings::{bilinear_loadings, loading_row};
pub use moments::{
    implied_individual_moments, reduced_form, reduced_form_gf_moments_m1,
    reduced_form_gf_moments_m2, ImpliedMoments, JointGrowthMoments,
};
pub use params::{
    layout, CovToGfCoef, GrowthFactorMoments, LowerTriCoef33, ModelKind, Params, ParamsModel1,
    ParamsModel2, ResidualStructure, Role, UnivariateParams, FACTOR_NAMES,
};
pub use schedule::{MeasurementSchedule, Process};

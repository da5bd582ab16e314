//! Monte Carlo conditions and the population values they imply.
//!
//! Population values are declared defaults: target growth-factor means
//! come from a trajectory-shape preset with the knot measurement at 100,
//! target standard deviations are 1, 5 and 1 with within-process
//! correlation 0.3, and path coefficients are set from explained-variance
//! targets. Intercepts are then backed out so that the marginal growth
//! factor means equal the targets.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::generate::r2_to_coefficient;
use crate::error::{Error, Result};
use crate::model::{
    CovToGfCoef, LowerTriCoef33, ModelKind, Params, ParamsModel1, ParamsModel2,
    ResidualStructure,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Deceleration,
    Acceleration,
    RiseThenPlateau,
}

impl Shape {
    /// Target (first slope, knot measurement, second slope) means.
    pub fn means(self) -> Vector3<f64> {
        match self {
            Shape::Deceleration => Vector3::new(5.0, 100.0, 2.6),
            Shape::Acceleration => Vector3::new(2.6, 100.0, 5.0),
            Shape::RiseThenPlateau => Vector3::new(5.0, 100.0, 0.5),
        }
    }
}

/// Share of growth-factor variance explained by the covariate paths that
/// define the mediation route into the mediator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Zero,
    Medium,
    Substantial,
}

impl Scenario {
    pub fn r2(self) -> f64 {
        match self {
            Scenario::Zero => 0.0,
            Scenario::Medium => 0.13,
            Scenario::Substantial => 0.26,
        }
    }
}

/// Explained variance of the same-factor paths that are not varied by
/// the scenario.
pub const FIXED_R2: f64 = 0.13;
/// Explained variance of cross-factor ("delayed") paths.
pub const DELAYED_R2: f64 = 0.02;
pub const TARGET_SD: [f64; 3] = [1.0, 5.0, 1.0];
pub const TARGET_CORR: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub model: u8,
    pub n: usize,
    pub waves: usize,
    /// Knot per process in model order: (m, y) or (x, m, y).
    pub knots: Vec<f64>,
    pub theta: f64,
    #[serde(default = "default_corr")]
    pub residual_correlation: f64,
    pub scenario: Scenario,
    #[serde(default = "default_shape")]
    pub shape: Shape,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Defaults to twice `reps`.
    #[serde(default)]
    pub max_attempts: Option<usize>,
    /// Require the mediator knot to come no later than the outcome knot.
    #[serde(default)]
    pub temporal_order: bool,
}

fn default_corr() -> f64 {
    0.3
}
fn default_shape() -> Shape {
    Shape::Deceleration
}
fn default_jitter() -> f64 {
    0.25
}

impl ConditionSpec {
    pub fn kind(&self) -> Result<ModelKind> {
        match self.model {
            1 => Ok(ModelKind::Model1),
            2 => Ok(ModelKind::Model2),
            m => Err(Error::Config(format!("model must be 1 or 2, got {m}"))),
        }
    }

    pub fn max_attempts(&self) -> usize {
        self.max_attempts.unwrap_or(2 * self.reps)
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.waves < 2 {
            return bad("waves must be at least 2".into());
        }
        if self.n < 2 {
            return bad("n must be at least 2".into());
        }
        if self.reps < 2 {
            return bad("reps must be at least 2".into());
        }
        if self.max_attempts() < self.reps {
            return bad("max_attempts must be at least reps".into());
        }
        let np = kind.processes().len();
        if self.knots.len() != np {
            return bad(format!("model {} needs {np} knots", self.model));
        }
        let last = (self.waves - 1) as f64;
        if let Some(g) = self.knots.iter().find(|&&g| !(g > 0.0 && g < last)) {
            return bad(format!("knot {g} must lie strictly inside (0, {last})"));
        }
        if self.temporal_order && self.knots[np - 2] > self.knots[np - 1] {
            return bad("mediator knot comes after the outcome knot".into());
        }
        // zero gives noise-free data, which can be generated but not fitted
        if !(self.theta >= 0.0) {
            return bad("theta must be non-negative".into());
        }
        if !(self.residual_correlation > -1.0 && self.residual_correlation < 1.0) {
            return bad("residual correlation must lie in (-1, 1)".into());
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return bad("jitter must lie in [0, 0.5)".into());
        }
        Ok(())
    }
}

/// Target covariance of each process's growth factors.
pub fn target_cov() -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| {
        let rho = if r == c { 1.0 } else { TARGET_CORR };
        rho * TARGET_SD[r] * TARGET_SD[c]
    })
}

fn coefficient(r2: f64, from: usize, to: usize) -> f64 {
    let v = TARGET_SD.map(|s| s * s);
    r2_to_coefficient(r2, v[from], v[to]).expect("declared R² levels lie in [0, 1)")
}

/// Lower-triangular path matrix with `diag_r2` on same-factor paths and
/// `off_r2` on cross-factor paths.
fn path_matrix(diag_r2: f64, off_r2: f64) -> LowerTriCoef33 {
    let mut e = [0.0; 6];
    for (slot, &(to, from)) in crate::model::params::LOWER_TRI_INDEX.iter().enumerate() {
        let r2 = if to == from { diag_r2 } else { off_r2 };
        e[slot] = coefficient(r2, from, to);
    }
    LowerTriCoef33::new(e)
}

/// Generating parameters of a condition.
pub fn population_params(spec: &ConditionSpec) -> Result<Params> {
    spec.validate()?;
    let target = spec.shape.means();
    let sigma = target_cov();
    let r2 = spec.scenario.r2();
    let off_r2 = if r2 > 0.0 { DELAYED_R2 } else { 0.0 };
    let np = spec.kind()?.processes().len();
    let residual = ResidualStructure::with_correlation(np, spec.theta, spec.residual_correlation);
    let params = match spec.kind()? {
        ModelKind::Model1 => {
            let (mu_x, phi_x) = (0.0, 1.0);
            let var = TARGET_SD.map(|s| s * s);
            let b_xm = Vector3::from_fn(|k, _| r2_to_coefficient(r2, phi_x, var[k]).expect("declared level"));
            let b_xy =
                Vector3::from_fn(|r, _| r2_to_coefficient(FIXED_R2, phi_x, var[r]).expect("declared level"));
            let b_my = path_matrix(FIXED_R2, DELAYED_R2);
            let alpha_m = target - b_xm * mu_x;
            let alpha_y = target - b_xy * mu_x - b_my.matrix() * target;
            Params::Model1(ParamsModel1 {
                mu_x,
                phi_x,
                knot_m: spec.knots[0],
                knot_y: spec.knots[1],
                alpha_m,
                alpha_y,
                b_xm: CovToGfCoef(b_xm),
                b_xy: CovToGfCoef(b_xy),
                b_my,
                psi_m: sigma * (1.0 - r2),
                psi_y: sigma * (1.0 - FIXED_R2),
                residual,
            })
        }
        _ => {
            let b_xm = path_matrix(r2, off_r2);
            let b_xy = path_matrix(FIXED_R2, DELAYED_R2);
            let b_my = path_matrix(FIXED_R2, DELAYED_R2);
            let alpha_m = target - b_xm.matrix() * target;
            let alpha_y = target - b_xy.matrix() * target - b_my.matrix() * target;
            Params::Model2(ParamsModel2 {
                mu_x: target,
                psi_x: sigma,
                knot_x: spec.knots[0],
                knot_m: spec.knots[1],
                knot_y: spec.knots[2],
                alpha_m,
                alpha_y,
                b_xm,
                b_xy,
                b_my,
                psi_m: sigma * (1.0 - r2),
                psi_y: sigma * (1.0 - FIXED_R2),
                residual,
            })
        }
    };
    Ok(params)
}

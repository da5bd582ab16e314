//! Bijection between natural parameters and the unconstrained space the
//! optimizer works in.
//!
//! * variances: `log`
//! * growth-factor covariance blocks: lower Cholesky factor with a
//!   log-diagonal, stored in the block's own slot order
//! * knots: scaled logistic onto `(t_min + δ, t_max − δ)` of the pooled
//!   occasions of the process, `δ` = 0.1 × the average inter-wave gap
//! * everything else: identity

use nalgebra::Matrix3;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::params::LOWER_TRI_INDEX;
use crate::model::{layout, ModelKind, Params, Process, Role};

#[derive(Clone, Debug)]
pub struct Transform {
    kind: ModelKind,
    roles: Vec<Role>,
    names: Vec<String>,
    knot_bounds: Vec<(Process, f64, f64)>,
}

/// A point in unconstrained space, in the canonical parameter order of the
/// model (see [`crate::model::layout`]).
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
}

fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl Transform {
    /// Knot bounds derived from the pooled occasions in `data`.
    pub fn new(kind: ModelKind, data: &Dataset) -> Result<Self> {
        let waves = data.waves();
        if waves < 2 {
            return Err(Error::InvalidInput("need at least two waves".into()));
        }
        let mut bounds = Vec::new();
        for p in kind.processes() {
            let (lo, hi) = data
                .time_range(p)
                .ok_or_else(|| Error::DimensionMismatch(format!("no times for process {p}")))?;
            let delta = 0.1 * (hi - lo) / (waves - 1) as f64;
            bounds.push((p, lo + delta, hi - delta));
        }
        Self::with_knot_bounds(kind, bounds)
    }

    pub fn with_knot_bounds(kind: ModelKind, knot_bounds: Vec<(Process, f64, f64)>) -> Result<Self> {
        for &(p, lo, hi) in &knot_bounds {
            if !(lo < hi) {
                return Err(Error::InvalidInput(format!("empty knot range for process {p}")));
            }
        }
        let (names, roles) = layout(kind).into_iter().unzip();
        Ok(Self {
            kind,
            roles,
            names,
            knot_bounds,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn knot_bounds(&self, p: Process) -> (f64, f64) {
        let &(_, lo, hi) = self
            .knot_bounds
            .iter()
            .find(|(q, _, _)| *q == p)
            .expect("bounds for every modelled process");
        (lo, hi)
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    /// Natural → unconstrained. Fails on parameters that violate the
    /// type invariants or put a knot outside its allowed range.
    pub fn transform(&self, params: &Params) -> Result<ParameterVector> {
        if params.kind() != self.kind {
            return Err(Error::DimensionMismatch("parameters of another model".into()));
        }
        let nat = params.to_natural();
        let mut out = nat.clone();
        for (i, role) in self.roles.iter().enumerate() {
            match *role {
                Role::Variance => {
                    if !(nat[i] > 0.0) {
                        return Err(Error::InvalidParams(format!("{} must be positive", self.names[i])));
                    }
                    out[i] = nat[i].ln();
                }
                Role::Knot(p) => {
                    let (lo, hi) = self.knot_bounds(p);
                    let g = nat[i];
                    if !(g > lo && g < hi) {
                        return Err(Error::InvalidParams(format!(
                            "{} = {g} outside ({lo}, {hi})",
                            self.names[i]
                        )));
                    }
                    out[i] = ((g - lo) / (hi - g)).ln();
                }
                Role::Psi { start, slot } if slot == 0 => {
                    let mut m = Matrix3::zeros();
                    for (s, &(r, c)) in LOWER_TRI_INDEX.iter().enumerate() {
                        m[(r, c)] = nat[start + s];
                        m[(c, r)] = nat[start + s];
                    }
                    let l = m.cholesky().ok_or_else(|| {
                        Error::InvalidParams(format!("{} block is not positive definite", self.names[i]))
                    })?;
                    let l = l.l();
                    for (s, &(r, c)) in LOWER_TRI_INDEX.iter().enumerate() {
                        out[start + s] = if r == c { l[(r, c)].ln() } else { l[(r, c)] };
                    }
                }
                _ => {}
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        Ok(ParameterVector { values: out })
    }

    /// Unconstrained → natural; defined for every finite input.
    pub fn untransform(&self, v: &[f64]) -> Params {
        assert_eq!(v.len(), self.roles.len(), "parameter vector length");
        let mut nat = v.to_vec();
        for (i, role) in self.roles.iter().enumerate() {
            match *role {
                Role::Variance => nat[i] = v[i].exp(),
                Role::Knot(p) => {
                    let (lo, hi) = self.knot_bounds(p);
                    nat[i] = lo + (hi - lo) * logistic(v[i]);
                }
                Role::Psi { start, slot } if slot == 0 => {
                    let mut l = Matrix3::zeros();
                    for (s, &(r, c)) in LOWER_TRI_INDEX.iter().enumerate() {
                        l[(r, c)] = if r == c { v[start + s].exp() } else { v[start + s] };
                    }
                    let m = l * l.transpose();
                    for (s, &(r, c)) in LOWER_TRI_INDEX.iter().enumerate() {
                        nat[start + s] = m[(r, c)];
                    }
                }
                _ => {}
            }
        }
        Params::from_natural(self.kind, &nat).expect("layout length")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    use crate::model::UnivariateParams;

    fn uni() -> Transform {
        Transform::with_knot_bounds(ModelKind::Univariate(Process::Y), vec![(Process::Y, 1.0, 4.0)])
            .unwrap()
    }

    #[test]
    fn unit_variance_and_midpoint_knot_map_to_zero() {
        let t = uni();
        let p = Params::Univariate(UnivariateParams {
            process: Process::Y,
            knot: 2.5,
            mean: Vector3::new(1.0, 2.0, 3.0),
            psi: Matrix3::identity(),
            theta: 1.0,
        });
        let v = t.transform(&p).unwrap().values;
        assert_eq!(v[0], 0.0); // knot
        assert_eq!(v[10], 0.0); // theta
        assert_eq!(&v[4..10], &[0.0; 6]); // identity Ψ -> identity factor
    }

    #[test]
    fn rejects_knot_outside_range() {
        let t = uni();
        let p = Params::Univariate(UnivariateParams {
            process: Process::Y,
            knot: 4.5,
            mean: Vector3::zeros(),
            psi: Matrix3::identity(),
            theta: 1.0,
        });
        assert!(t.transform(&p).is_err());
    }
}

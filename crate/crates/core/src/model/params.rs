//! Parameter sets of the univariate bilinear growth model and the two
//! mediation models, together with their flat "natural" layout.
//!
//! Growth factors are always ordered (first slope, knot measurement,
//! second slope); names use `1`, `g`, `2` for the three positions.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::schedule::Process;
use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, is_positive_semidefinite};

/// Suffixes for the three growth factors.
pub const FACTOR_NAMES: [&str; 3] = ["1", "g", "2"];

/// Free entries of a lower-triangular 3×3 matrix in column-major order:
/// (1,1), (g,1), (2,1), (g,g), (2,g), (2,2).
pub const LOWER_TRI_INDEX: [(usize, usize); 6] = [(0, 0), (1, 0), (2, 0), (1, 1), (2, 1), (2, 2)];

/// Which of the three model families a parameter set belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// A single bilinear-spline growth process.
    Univariate(Process),
    /// Baseline covariate, longitudinal mediator and outcome.
    Model1,
    /// Longitudinal covariate, mediator and outcome.
    Model2,
}

impl ModelKind {
    pub fn processes(self) -> Vec<Process> {
        match self {
            ModelKind::Univariate(p) => vec![p],
            ModelKind::Model1 => vec![Process::M, Process::Y],
            ModelKind::Model2 => vec![Process::X, Process::M, Process::Y],
        }
    }

    pub fn has_covariate(self) -> bool {
        matches!(self, ModelKind::Model1)
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(ModelKind::Model1),
            2 => Some(ModelKind::Model2),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            ModelKind::Univariate(_) => 0,
            ModelKind::Model1 => 1,
            ModelKind::Model2 => 2,
        }
    }

    /// Number of free parameters.
    pub fn n_free(self) -> usize {
        layout(self).len()
    }
}

/// Mean vector and covariance matrix of one process's growth factors.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFactorMoments {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

/// Regression coefficients between two sets of growth factors. Rows are the
/// predicted factors, columns the predictors; the strict upper triangle is
/// structurally zero.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LowerTriCoef33 {
    /// Column-major lower triangle, see [`LOWER_TRI_INDEX`].
    pub entries: [f64; 6],
}

impl LowerTriCoef33 {
    pub fn new(entries: [f64; 6]) -> Self {
        Self { entries }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn diagonal(d: [f64; 3]) -> Self {
        Self::new([d[0], 0.0, 0.0, d[1], 0.0, d[2]])
    }

    /// Coefficient from predictor factor `from` to predicted factor `to`.
    pub fn get(&self, to: usize, from: usize) -> f64 {
        if from > to {
            return 0.0;
        }
        self.entries[Self::slot(to, from)]
    }

    pub fn slot(to: usize, from: usize) -> usize {
        LOWER_TRI_INDEX
            .iter()
            .position(|&(r, c)| r == to && c == from)
            .expect("entry in lower triangle")
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (k, &(r, c)) in LOWER_TRI_INDEX.iter().enumerate() {
            m[(r, c)] = self.entries[k];
        }
        m
    }
}

/// Paths from a scalar baseline covariate to three growth factors.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CovToGfCoef(pub Vector3<f64>);

impl CovToGfCoef {
    pub fn new(b1: f64, bg: f64, b2: f64) -> Self {
        Self(Vector3::new(b1, bg, b2))
    }
}

/// Residual variances per process and residual covariances between
/// same-occasion residuals of different processes.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualStructure {
    variances: Vec<f64>,
    /// Pairs (0,1), (0,2), (1,2) as available.
    covariances: Vec<f64>,
}

impl ResidualStructure {
    pub fn one(theta: f64) -> Self {
        Self {
            variances: vec![theta],
            covariances: vec![],
        }
    }

    pub fn two(theta_a: f64, theta_b: f64, theta_ab: f64) -> Self {
        Self {
            variances: vec![theta_a, theta_b],
            covariances: vec![theta_ab],
        }
    }

    pub fn three(tx: f64, tm: f64, ty: f64, txm: f64, txy: f64, tmy: f64) -> Self {
        Self {
            variances: vec![tx, tm, ty],
            covariances: vec![txm, txy, tmy],
        }
    }

    pub fn n_processes(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn covariances(&self) -> &[f64] {
        &self.covariances
    }

    pub fn pairs(p: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..p {
            for b in (a + 1)..p {
                out.push((a, b));
            }
        }
        out
    }

    /// Per-occasion residual covariance matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let p = self.variances.len();
        let mut m = DMatrix::zeros(p, p);
        for (i, &v) in self.variances.iter().enumerate() {
            m[(i, i)] = v;
        }
        for ((a, b), &c) in Self::pairs(p).into_iter().zip(&self.covariances) {
            m[(a, b)] = c;
            m[(b, a)] = c;
        }
        m
    }

    /// Builds the structure from a common variance and correlation.
    pub fn with_correlation(p: usize, theta: f64, rho: f64) -> Self {
        Self {
            variances: vec![theta; p],
            covariances: vec![rho * theta; p * (p - 1) / 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnivariateParams {
    pub process: Process,
    pub knot: f64,
    pub mean: Vector3<f64>,
    pub psi: Matrix3<f64>,
    pub theta: f64,
}

/// Baseline covariate → longitudinal mediator → longitudinal outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamsModel1 {
    pub mu_x: f64,
    pub phi_x: f64,
    pub knot_m: f64,
    pub knot_y: f64,
    pub alpha_m: Vector3<f64>,
    pub alpha_y: Vector3<f64>,
    pub b_xm: CovToGfCoef,
    pub b_xy: CovToGfCoef,
    pub b_my: LowerTriCoef33,
    pub psi_m: Matrix3<f64>,
    pub psi_y: Matrix3<f64>,
    /// Processes (m, y).
    pub residual: ResidualStructure,
}

/// Longitudinal covariate → longitudinal mediator → longitudinal outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamsModel2 {
    pub mu_x: Vector3<f64>,
    pub psi_x: Matrix3<f64>,
    pub knot_x: f64,
    pub knot_m: f64,
    pub knot_y: f64,
    pub alpha_m: Vector3<f64>,
    pub alpha_y: Vector3<f64>,
    pub b_xm: LowerTriCoef33,
    pub b_xy: LowerTriCoef33,
    pub b_my: LowerTriCoef33,
    pub psi_m: Matrix3<f64>,
    pub psi_y: Matrix3<f64>,
    /// Processes (x, m, y).
    pub residual: ResidualStructure,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Univariate(UnivariateParams),
    Model1(ParamsModel1),
    Model2(ParamsModel2),
}

/// What a coordinate of the flat parameter vector represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    CovariateMean,
    Variance,
    Knot(Process),
    /// Growth-factor mean or intercept at position 0, 1 or 2.
    GrowthIntercept(usize),
    Coefficient,
    /// Entry `slot` (see [`LOWER_TRI_INDEX`]) of a growth-factor covariance
    /// block starting at `start` in the flat vector.
    Psi { start: usize, slot: usize },
    ResidualCovariance,
}

impl Role {
    pub fn is_diagonal_psi(self) -> bool {
        matches!(self, Role::Psi { slot, .. } if matches!(slot, 0 | 3 | 5))
    }
}

/// Names and roles of every free parameter in canonical order.
pub fn layout(kind: ModelKind) -> Vec<(String, Role)> {
    let mut out: Vec<(String, Role)> = Vec::new();
    let push_vec3 = |out: &mut Vec<(String, Role)>, stem: &str| {
        for (i, s) in FACTOR_NAMES.iter().enumerate() {
            out.push((format!("{stem}{s}"), Role::GrowthIntercept(i)));
        }
    };
    let push_coef3 = |out: &mut Vec<(String, Role)>, stem: &str| {
        for s in FACTOR_NAMES {
            out.push((format!("{stem}{s}"), Role::Coefficient));
        }
    };
    let push_tri = |out: &mut Vec<(String, Role)>, stem: &str| {
        for &(r, c) in LOWER_TRI_INDEX.iter() {
            out.push((
                format!("{stem}{}{}", FACTOR_NAMES[c], FACTOR_NAMES[r]),
                Role::Coefficient,
            ));
        }
    };
    let push_psi = |out: &mut Vec<(String, Role)>, stem: &str| {
        let start = out.len();
        for (slot, &(r, c)) in LOWER_TRI_INDEX.iter().enumerate() {
            out.push((
                format!("{stem}{}{}", FACTOR_NAMES[c], FACTOR_NAMES[r]),
                Role::Psi { start, slot },
            ));
        }
    };
    match kind {
        ModelKind::Univariate(p) => {
            let u = p.label();
            out.push((format!("knot_{u}"), Role::Knot(p)));
            push_vec3(&mut out, &format!("mu_{u}"));
            push_psi(&mut out, &format!("psi_{u}"));
            out.push((format!("theta_{u}"), Role::Variance));
        }
        ModelKind::Model1 => {
            out.push(("mu_x".into(), Role::CovariateMean));
            out.push(("phi_x".into(), Role::Variance));
            out.push(("knot_m".into(), Role::Knot(Process::M)));
            out.push(("knot_y".into(), Role::Knot(Process::Y)));
            push_vec3(&mut out, "alpha_m");
            push_vec3(&mut out, "alpha_y");
            push_coef3(&mut out, "b_xm");
            push_coef3(&mut out, "b_xy");
            push_tri(&mut out, "b_my");
            push_psi(&mut out, "psi_m");
            push_psi(&mut out, "psi_y");
            out.push(("theta_m".into(), Role::Variance));
            out.push(("theta_y".into(), Role::Variance));
            out.push(("theta_my".into(), Role::ResidualCovariance));
        }
        ModelKind::Model2 => {
            push_vec3(&mut out, "mu_x");
            push_psi(&mut out, "psi_x");
            out.push(("knot_x".into(), Role::Knot(Process::X)));
            out.push(("knot_m".into(), Role::Knot(Process::M)));
            out.push(("knot_y".into(), Role::Knot(Process::Y)));
            push_vec3(&mut out, "alpha_m");
            push_vec3(&mut out, "alpha_y");
            push_tri(&mut out, "b_xm");
            push_tri(&mut out, "b_xy");
            push_tri(&mut out, "b_my");
            push_psi(&mut out, "psi_m");
            push_psi(&mut out, "psi_y");
            for u in ["x", "m", "y"] {
                out.push((format!("theta_{u}"), Role::Variance));
            }
            for uv in ["xm", "xy", "my"] {
                out.push((format!("theta_{uv}"), Role::ResidualCovariance));
            }
        }
    }
    out
}

fn sym_entries(m: &Matrix3<f64>) -> [f64; 6] {
    let mut e = [0.0; 6];
    for (k, &(r, c)) in LOWER_TRI_INDEX.iter().enumerate() {
        e[k] = m[(r, c)];
    }
    e
}

fn sym_from_entries(e: &[f64]) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for (k, &(r, c)) in LOWER_TRI_INDEX.iter().enumerate() {
        m[(r, c)] = e[k];
        m[(c, r)] = e[k];
    }
    m
}

struct Reader<'a> {
    v: &'a [f64],
    pos: usize,
}

impl Reader<'_> {
    fn one(&mut self) -> f64 {
        let x = self.v[self.pos];
        self.pos += 1;
        x
    }
    fn vec3(&mut self) -> Vector3<f64> {
        Vector3::new(self.one(), self.one(), self.one())
    }
    fn tri(&mut self) -> LowerTriCoef33 {
        let mut e = [0.0; 6];
        for x in e.iter_mut() {
            *x = self.one();
        }
        LowerTriCoef33::new(e)
    }
    fn sym(&mut self) -> Matrix3<f64> {
        let e: Vec<f64> = (0..6).map(|_| self.one()).collect();
        sym_from_entries(&e)
    }
}

impl Params {
    pub fn kind(&self) -> ModelKind {
        match self {
            Params::Univariate(p) => ModelKind::Univariate(p.process),
            Params::Model1(_) => ModelKind::Model1,
            Params::Model2(_) => ModelKind::Model2,
        }
    }

    pub fn names(&self) -> Vec<String> {
        layout(self.kind()).into_iter().map(|(n, _)| n).collect()
    }

    /// Knot of each modelled process, in [`ModelKind::processes`] order.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            Params::Univariate(p) => vec![p.knot],
            Params::Model1(p) => vec![p.knot_m, p.knot_y],
            Params::Model2(p) => vec![p.knot_x, p.knot_m, p.knot_y],
        }
    }

    pub fn residual(&self) -> ResidualStructure {
        match self {
            Params::Univariate(p) => ResidualStructure::one(p.theta),
            Params::Model1(p) => p.residual.clone(),
            Params::Model2(p) => p.residual.clone(),
        }
    }

    /// Flat natural-space vector in the order of [`layout`].
    pub fn to_natural(&self) -> Vec<f64> {
        let mut v = Vec::new();
        match self {
            Params::Univariate(p) => {
                v.push(p.knot);
                v.extend(p.mean.iter());
                v.extend(sym_entries(&p.psi));
                v.push(p.theta);
            }
            Params::Model1(p) => {
                v.extend([p.mu_x, p.phi_x, p.knot_m, p.knot_y]);
                v.extend(p.alpha_m.iter());
                v.extend(p.alpha_y.iter());
                v.extend(p.b_xm.0.iter());
                v.extend(p.b_xy.0.iter());
                v.extend(p.b_my.entries);
                v.extend(sym_entries(&p.psi_m));
                v.extend(sym_entries(&p.psi_y));
                v.extend(p.residual.variances.iter());
                v.extend(p.residual.covariances.iter());
            }
            Params::Model2(p) => {
                v.extend(p.mu_x.iter());
                v.extend(sym_entries(&p.psi_x));
                v.extend([p.knot_x, p.knot_m, p.knot_y]);
                v.extend(p.alpha_m.iter());
                v.extend(p.alpha_y.iter());
                v.extend(p.b_xm.entries);
                v.extend(p.b_xy.entries);
                v.extend(p.b_my.entries);
                v.extend(sym_entries(&p.psi_m));
                v.extend(sym_entries(&p.psi_y));
                v.extend(p.residual.variances.iter());
                v.extend(p.residual.covariances.iter());
            }
        }
        v
    }

    /// Inverse of [`Params::to_natural`]; performs no validation.
    pub fn from_natural(kind: ModelKind, v: &[f64]) -> Result<Self> {
        let expected = kind.n_free();
        if v.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} parameters, got {}",
                v.len()
            )));
        }
        let mut r = Reader { v, pos: 0 };
        Ok(match kind {
            ModelKind::Univariate(process) => Params::Univariate(UnivariateParams {
                process,
                knot: r.one(),
                mean: r.vec3(),
                psi: r.sym(),
                theta: r.one(),
            }),
            ModelKind::Model1 => {
                let mu_x = r.one();
                let phi_x = r.one();
                let knot_m = r.one();
                let knot_y = r.one();
                let alpha_m = r.vec3();
                let alpha_y = r.vec3();
                let b_xm = CovToGfCoef(r.vec3());
                let b_xy = CovToGfCoef(r.vec3());
                let b_my = r.tri();
                let psi_m = r.sym();
                let psi_y = r.sym();
                let residual = ResidualStructure::two(r.one(), r.one(), r.one());
                Params::Model1(ParamsModel1 {
                    mu_x,
                    phi_x,
                    knot_m,
                    knot_y,
                    alpha_m,
                    alpha_y,
                    b_xm,
                    b_xy,
                    b_my,
                    psi_m,
                    psi_y,
                    residual,
                })
            }
            ModelKind::Model2 => {
                let mu_x = r.vec3();
                let psi_x = r.sym();
                let knot_x = r.one();
                let knot_m = r.one();
                let knot_y = r.one();
                let alpha_m = r.vec3();
                let alpha_y = r.vec3();
                let b_xm = r.tri();
                let b_xy = r.tri();
                let b_my = r.tri();
                let psi_m = r.sym();
                let psi_y = r.sym();
                let residual =
                    ResidualStructure::three(r.one(), r.one(), r.one(), r.one(), r.one(), r.one());
                Params::Model2(ParamsModel2 {
                    mu_x,
                    psi_x,
                    knot_x,
                    knot_m,
                    knot_y,
                    alpha_m,
                    alpha_y,
                    b_xm,
                    b_xy,
                    b_my,
                    psi_m,
                    psi_y,
                    residual,
                })
            }
        })
    }

    /// Growth-factor covariance blocks that must be positive semi-definite.
    pub(crate) fn psi_blocks(&self) -> Vec<Matrix3<f64>> {
        match self {
            Params::Univariate(p) => vec![p.psi],
            Params::Model1(p) => vec![p.psi_m, p.psi_y],
            Params::Model2(p) => vec![p.psi_x, p.psi_m, p.psi_y],
        }
    }

    /// Checks the type invariants (finite entries, Φ_x > 0, Ψ blocks PSD,
    /// positive residual variances with a positive-definite per-occasion
    /// residual matrix).
    pub fn validate(&self) -> Result<()> {
        if self.to_natural().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if let Params::Model1(p) = self {
            if p.phi_x <= 0.0 {
                return Err(Error::InvalidParams("covariate variance must be positive".into()));
            }
        }
        for (i, psi) in self.psi_blocks().iter().enumerate() {
            let m = DMatrix::from_iterator(3, 3, psi.iter().copied());
            if !is_positive_semidefinite(&m) {
                return Err(Error::InvalidParams(format!(
                    "growth-factor covariance block {i} is not positive semi-definite"
                )));
            }
        }
        let res = self.residual();
        if res.variances().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidParams("residual variances must be positive".into()));
        }
        if !is_positive_definite(&res.matrix()) {
            return Err(Error::InvalidParams(
                "residual covariance matrix is not positive definite".into(),
            ));
        }
        Ok(())
    }
}

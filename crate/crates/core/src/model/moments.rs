//! Reduced-form growth-factor moments and model-implied moments of an
//! individual's stacked observations.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::loadings::loading_row;
use super::params::{GrowthFactorMoments, ModelKind, Params, ParamsModel1, ParamsModel2};
use super::schedule::{MeasurementSchedule, Process};
use crate::error::{Error, Result};
use crate::linalg::{psd_factor, symmetrize};

/// Joint mean and covariance of all exogenous and latent quantities of a
/// model. For model 1 the order is (x, η^m, η^y); for model 2
/// (η^x, η^m, η^y); for the univariate model just η.
#[derive(Clone, Debug)]
pub struct JointGrowthMoments {
    pub labels: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl JointGrowthMoments {
    /// Offset of a process's three growth factors, if present.
    pub fn offset(&self, p: Process) -> Option<usize> {
        let first = format!("{}1", p.label());
        self.labels.iter().position(|l| *l == first)
    }

    pub fn process(&self, p: Process) -> Option<GrowthFactorMoments> {
        let o = self.offset(p)?;
        Some(GrowthFactorMoments {
            mean: Vector3::from_iterator(self.mean.rows(o, 3).iter().copied()),
            cov: Matrix3::from_iterator(self.cov.view((o, o), (3, 3)).iter().copied()),
        })
    }
}

fn gf_labels(p: Process) -> [String; 3] {
    let u = p.label();
    [format!("{u}1"), format!("{u}g"), format!("{u}2")]
}

fn put3(m: &mut DMatrix<f64>, r: usize, c: usize, b: &Matrix3<f64>) {
    m.view_mut((r, c), (3, 3)).copy_from(b);
}

/// Solves the recursive system `η = a + Bη + ζ`, `Var ζ = Ψ`, for a strictly
/// lower-triangular `B`.
fn solve_recursive(a: &DVector<f64>, b: &DMatrix<f64>, psi: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.len();
    let i_minus_b = DMatrix::identity(n, n) - b;
    let mean = i_minus_b
        .solve_lower_triangular(a)
        .expect("unit lower-triangular system");
    let inv = i_minus_b
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("unit lower-triangular system");
    let mut cov = &inv * psi * inv.transpose();
    symmetrize(&mut cov);
    (mean, cov)
}

struct Structural {
    labels: Vec<String>,
    intercepts: DVector<f64>,
    coef: DMatrix<f64>,
    psi: DMatrix<f64>,
}

fn structural_m1(p: &ParamsModel1) -> Structural {
    let mut labels = vec!["x".to_string()];
    labels.extend(gf_labels(Process::M));
    labels.extend(gf_labels(Process::Y));
    let mut intercepts = DVector::zeros(7);
    intercepts[0] = p.mu_x;
    intercepts.rows_mut(1, 3).copy_from(&p.alpha_m);
    intercepts.rows_mut(4, 3).copy_from(&p.alpha_y);
    let mut coef = DMatrix::zeros(7, 7);
    coef.view_mut((1, 0), (3, 1)).copy_from(&p.b_xm.0);
    coef.view_mut((4, 0), (3, 1)).copy_from(&p.b_xy.0);
    put3(&mut coef, 4, 1, &p.b_my.matrix());
    let mut psi = DMatrix::zeros(7, 7);
    psi[(0, 0)] = p.phi_x;
    put3(&mut psi, 1, 1, &p.psi_m);
    put3(&mut psi, 4, 4, &p.psi_y);
    Structural { labels, intercepts, coef, psi }
}

fn structural_m2(p: &ParamsModel2) -> Structural {
    let mut labels = Vec::new();
    for u in [Process::X, Process::M, Process::Y] {
        labels.extend(gf_labels(u));
    }
    let mut intercepts = DVector::zeros(9);
    intercepts.rows_mut(0, 3).copy_from(&p.mu_x);
    intercepts.rows_mut(3, 3).copy_from(&p.alpha_m);
    intercepts.rows_mut(6, 3).copy_from(&p.alpha_y);
    let mut coef = DMatrix::zeros(9, 9);
    put3(&mut coef, 3, 0, &p.b_xm.matrix());
    put3(&mut coef, 6, 0, &p.b_xy.matrix());
    put3(&mut coef, 6, 3, &p.b_my.matrix());
    let mut psi = DMatrix::zeros(9, 9);
    put3(&mut psi, 0, 0, &p.psi_x);
    put3(&mut psi, 3, 3, &p.psi_m);
    put3(&mut psi, 6, 6, &p.psi_y);
    Structural { labels, intercepts, coef, psi }
}

/// Joint moments of (x, η^m, η^y) under model 1.
pub fn reduced_form_gf_moments_m1(p: &ParamsModel1) -> JointGrowthMoments {
    let s = structural_m1(p);
    let (mean, cov) = solve_recursive(&s.intercepts, &s.coef, &s.psi);
    JointGrowthMoments { labels: s.labels, mean, cov }
}

/// Joint moments of (η^x, η^m, η^y) under model 2.
pub fn reduced_form_gf_moments_m2(p: &ParamsModel2) -> JointGrowthMoments {
    let s = structural_m2(p);
    let (mean, cov) = solve_recursive(&s.intercepts, &s.coef, &s.psi);
    JointGrowthMoments { labels: s.labels, mean, cov }
}

pub fn reduced_form(params: &Params) -> JointGrowthMoments {
    match params {
        Params::Univariate(p) => JointGrowthMoments {
            labels: gf_labels(p.process).to_vec(),
            mean: DVector::from_iterator(3, p.mean.iter().copied()),
            cov: DMatrix::from_iterator(3, 3, p.psi.iter().copied()),
        },
        Params::Model1(p) => reduced_form_gf_moments_m1(p),
        Params::Model2(p) => reduced_form_gf_moments_m2(p),
    }
}

/// Model-implied mean and covariance of one individual's stacked
/// observations. Model 1 places the covariate first, followed by the J
/// mediator and J outcome occasions; model 2 stacks x, m, y occasions.
#[derive(Clone, Debug)]
pub struct ImpliedMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn check_schedule(kind: ModelKind, schedule: &MeasurementSchedule) -> Result<()> {
    let needed = kind.processes();
    let got: Vec<Process> = schedule.processes().collect();
    if got != needed {
        return Err(Error::DimensionMismatch(format!(
            "model needs processes {:?}, schedule has {:?}",
            needed, got
        )));
    }
    Ok(())
}

pub fn implied_individual_moments(
    params: &Params,
    schedule: &MeasurementSchedule,
) -> Result<ImpliedMoments> {
    let kind = params.kind();
    check_schedule(kind, schedule)?;
    let joint = reduced_form(params);
    let procs = kind.processes();
    let knots = params.knots();
    let j = schedule.waves();
    let lead = usize::from(kind.has_covariate());
    let dim = lead + procs.len() * j;

    // Stacked loading matrix mapping the joint vector onto observations.
    let mut lambda = DMatrix::zeros(dim, joint.mean.len());
    if lead == 1 {
        lambda[(0, 0)] = 1.0;
    }
    for (k, &p) in procs.iter().enumerate() {
        let times = schedule.times(p).expect("checked above");
        let col = joint.offset(p).expect("process in joint moments");
        for (w, &t) in times.iter().enumerate() {
            let row = loading_row(t, knots[k]);
            for f in 0..3 {
                lambda[(lead + k * j + w, col + f)] = row[f];
            }
        }
    }
    let mean = &lambda * &joint.mean;
    let mut cov = &lambda * &joint.cov * lambda.transpose();
    let res = params.residual().matrix();
    for a in 0..procs.len() {
        for b in 0..procs.len() {
            for w in 0..j {
                cov[(lead + a * j + w, lead + b * j + w)] += res[(a, b)];
            }
        }
    }
    symmetrize(&mut cov);
    Ok(ImpliedMoments { mean, cov })
}

/// Latent structure consumed by the likelihood: the growth factors of the
/// modelled processes (conditional on the baseline covariate for model 1)
/// have mean `mean0 + x·mean_x` and covariance `factor·factorᵀ`.
#[derive(Clone, Debug)]
pub(crate) struct LatentForm {
    pub knots: Vec<f64>,
    pub mean0: Vec<f64>,
    pub mean_x: Option<Vec<f64>>,
    pub factor: DMatrix<f64>,
    /// `factor` is lower triangular with a strictly positive diagonal.
    pub factor_invertible: bool,
    pub residual: DMatrix<f64>,
    pub covariate: Option<(f64, f64)>,
}

fn block_factor(blocks: &[Matrix3<f64>]) -> Option<(DMatrix<f64>, bool)> {
    let n = 3 * blocks.len();
    let mut f = DMatrix::zeros(n, n);
    let mut invertible = true;
    for (i, b) in blocks.iter().enumerate() {
        let m = DMatrix::from_iterator(3, 3, b.iter().copied());
        match m.clone().cholesky() {
            Some(ch) => f.view_mut((3 * i, 3 * i), (3, 3)).copy_from(&ch.l()),
            None => {
                invertible = false;
                f.view_mut((3 * i, 3 * i), (3, 3)).copy_from(&psd_factor(&m)?);
            }
        }
    }
    Some((f, invertible))
}

impl Params {
    /// `None` when the parameters are outside the feasible region.
    pub(crate) fn latent_form(&self) -> Option<LatentForm> {
        let residual = self.residual().matrix();
        let knots = self.knots();
        match self {
            Params::Univariate(p) => {
                let (factor, inv) = block_factor(&[p.psi])?;
                Some(LatentForm {
                    knots,
                    mean0: p.mean.iter().copied().collect(),
                    mean_x: None,
                    factor,
                    factor_invertible: inv,
                    residual,
                    covariate: None,
                })
            }
            Params::Model1(p) => {
                if !(p.phi_x > 0.0) {
                    return None;
                }
                let b_my = p.b_my.matrix();
                let mean_m = p.alpha_m;
                let mean_y = p.alpha_y + b_my * p.alpha_m;
                let slope_m = p.b_xm.0;
                let slope_y = p.b_xy.0 + b_my * p.b_xm.0;
                let (blocks, inv) = block_factor(&[p.psi_m, p.psi_y])?;
                // (I - B)^{-1} for B = [[0, 0], [B_my, 0]] is [[I, 0], [B_my, I]].
                let mut lift = DMatrix::identity(6, 6);
                put3(&mut lift, 3, 0, &b_my);
                Some(LatentForm {
                    knots,
                    mean0: mean_m.iter().chain(mean_y.iter()).copied().collect(),
                    mean_x: Some(slope_m.iter().chain(slope_y.iter()).copied().collect()),
                    factor: lift * blocks,
                    factor_invertible: inv,
                    residual,
                    covariate: Some((p.mu_x, p.phi_x)),
                })
            }
            Params::Model2(p) => {
                let s = structural_m2(p);
                let i_minus_b = DMatrix::identity(9, 9) - &s.coef;
                let inv_ib = i_minus_b.solve_lower_triangular(&DMatrix::identity(9, 9))?;
                let mean = &inv_ib * &s.intercepts;
                let (blocks, inv) = block_factor(&[p.psi_x, p.psi_m, p.psi_y])?;
                Some(LatentForm {
                    knots,
                    mean0: mean.iter().copied().collect(),
                    mean_x: None,
                    factor: inv_ib * blocks,
                    factor_invertible: inv,
                    residual,
                    covariate: None,
                })
            }
        }
    }
}

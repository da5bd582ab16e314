//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use blsmed::model::{
    CovToGfCoef, LowerTriCoef33, MeasurementSchedule, ResidualStructure, UnivariateParams,
};
use blsmed::model::{ParamsModel1, ParamsModel2};
use blsmed::{Dataset, Individual, ModelKind, Params, Process};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Branch form of the bilinear loading row.
pub fn branch_loading(t: f64, knot: f64) -> [f64; 3] {
    if t <= knot {
        [t - knot, 1.0, 0.0]
    } else {
        [0.0, 1.0, t - knot]
    }
}

pub fn random_pd(rng: &mut ChaCha8Rng, scale: [f64; 3]) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| 0.5 * normal(rng));
    let d = Matrix3::from_diagonal(&Vector3::new(scale[0], scale[1], scale[2]));
    d * (a * a.transpose() + Matrix3::identity() * 0.5) * d
}

fn vec3(rng: &mut ChaCha8Rng, mean: [f64; 3], sd: f64) -> Vector3<f64> {
    Vector3::new(
        mean[0] + sd * normal(rng),
        mean[1] + sd * normal(rng),
        mean[2] + sd * normal(rng),
    )
}

fn coef(rng: &mut ChaCha8Rng, sd: f64) -> LowerTriCoef33 {
    let mut e = [0.0; 6];
    for v in e.iter_mut() {
        *v = sd * normal(rng);
    }
    LowerTriCoef33::new(e)
}

fn residual(rng: &mut ChaCha8Rng, p: usize) -> ResidualStructure {
    let sd: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..1.5)).collect();
    let rho = rng.random_range(-0.4..0.4);
    let cov = |a: usize, b: usize| rho * sd[a] * sd[b];
    match p {
        1 => ResidualStructure::one(sd[0] * sd[0]),
        2 => ResidualStructure::two(sd[0] * sd[0], sd[1] * sd[1], cov(0, 1)),
        _ => ResidualStructure::three(
            sd[0] * sd[0],
            sd[1] * sd[1],
            sd[2] * sd[2],
            cov(0, 1),
            cov(0, 2),
            cov(1, 2),
        ),
    }
}

/// Random feasible parameters with knots inside `(1, 4)`.
pub fn random_params(kind: ModelKind, rng: &mut ChaCha8Rng) -> Params {
    let mut knot = || rng.random_range(1.2..3.8);
    let (k1, k2, k3) = (knot(), knot(), knot());
    let mean = [3.0, 40.0, 1.0];
    let scale = [1.0, 4.0, 1.0];
    match kind {
        ModelKind::Univariate(process) => Params::Univariate(UnivariateParams {
            process,
            knot: k1,
            mean: vec3(rng, mean, 1.0),
            psi: random_pd(rng, scale),
            theta: rng.random_range(0.5..2.0),
        }),
        ModelKind::Model1 => Params::Model1(ParamsModel1 {
            mu_x: normal(rng),
            phi_x: rng.random_range(0.5..2.0),
            knot_m: k1,
            knot_y: k2,
            alpha_m: vec3(rng, mean, 1.0),
            alpha_y: vec3(rng, mean, 1.0),
            b_xm: CovToGfCoef(vec3(rng, [0.0; 3], 0.5)),
            b_xy: CovToGfCoef(vec3(rng, [0.0; 3], 0.5)),
            b_my: coef(rng, 0.3),
            psi_m: random_pd(rng, scale),
            psi_y: random_pd(rng, scale),
            residual: residual(rng, 2),
        }),
        ModelKind::Model2 => Params::Model2(ParamsModel2 {
            mu_x: vec3(rng, mean, 1.0),
            psi_x: random_pd(rng, scale),
            knot_x: k1,
            knot_m: k2,
            knot_y: k3,
            alpha_m: vec3(rng, [0.0; 3], 1.0),
            alpha_y: vec3(rng, [0.0; 3], 1.0),
            b_xm: coef(rng, 0.3),
            b_xy: coef(rng, 0.3),
            b_my: coef(rng, 0.3),
            psi_m: random_pd(rng, scale),
            psi_y: random_pd(rng, scale),
            residual: residual(rng, 3),
        }),
    }
}

/// `n` individuals with their own occasions around `0..waves` and
/// arbitrary values; the values need not come from the model.
pub fn random_dataset(kind: ModelKind, n: usize, waves: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let procs = kind.processes();
    let rows = (0..n)
        .map(|i| {
            let entries = procs
                .iter()
                .map(|&p| {
                    let t = (0..waves)
                        .map(|w| w as f64 + rng.random_range(-0.3..0.3))
                        .collect();
                    (p, t)
                })
                .collect();
            let values = procs
                .iter()
                .map(|_| (0..waves).map(|w| 5.0 * w as f64 + 3.0 * normal(rng)).collect())
                .collect();
            Individual {
                id: format!("p{i}"),
                covariate: kind.has_covariate().then(|| normal(rng)),
                schedule: MeasurementSchedule::new(entries).unwrap(),
                values,
            }
        })
        .collect();
    Dataset::new(rows).unwrap()
}

fn m3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |r, c| m[(r, c)])
}

fn v3(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_fn(3, |r, _| v[r])
}

/// Joint moments of (x or η^x, η^m, η^y) by forward substitution of the
/// structural equations in terms of the exogenous disturbances.
pub fn sequential_moments(params: &Params) -> (DVector<f64>, DMatrix<f64>) {
    match params {
        Params::Univariate(p) => (v3(&p.mean), m3(&p.psi)),
        Params::Model1(p) => {
            let bxm = v3(&p.b_xm.0);
            let bxy = v3(&p.b_xy.0);
            let bmy = m3(&p.b_my.matrix());
            // exogenous: (x - μx, ζm, ζy)
            let mut a = DMatrix::zeros(7, 7);
            let mut mean = DVector::zeros(7);
            mean[0] = p.mu_x;
            let mm = v3(&p.alpha_m) + &bxm * p.mu_x;
            let my = v3(&p.alpha_y) + &bxy * p.mu_x + &bmy * &mm;
            mean.rows_mut(1, 3).copy_from(&mm);
            mean.rows_mut(4, 3).copy_from(&my);
            a[(0, 0)] = 1.0;
            a.view_mut((1, 0), (3, 1)).copy_from(&bxm);
            a.view_mut((1, 1), (3, 3)).copy_from(&DMatrix::identity(3, 3));
            a.view_mut((4, 0), (3, 1)).copy_from(&(&bxy + &bmy * &bxm));
            a.view_mut((4, 1), (3, 3)).copy_from(&bmy);
            a.view_mut((4, 4), (3, 3)).copy_from(&DMatrix::identity(3, 3));
            let mut d = DMatrix::zeros(7, 7);
            d[(0, 0)] = p.phi_x;
            d.view_mut((1, 1), (3, 3)).copy_from(&m3(&p.psi_m));
            d.view_mut((4, 4), (3, 3)).copy_from(&m3(&p.psi_y));
            (mean, &a * d * a.transpose())
        }
        Params::Model2(p) => {
            let bxm = m3(&p.b_xm.matrix());
            let bxy = m3(&p.b_xy.matrix());
            let bmy = m3(&p.b_my.matrix());
            let i3 = DMatrix::<f64>::identity(3, 3);
            let mx = v3(&p.mu_x);
            let mm = v3(&p.alpha_m) + &bxm * &mx;
            let my = v3(&p.alpha_y) + &bxy * &mx + &bmy * &mm;
            let mut mean = DVector::zeros(9);
            mean.rows_mut(0, 3).copy_from(&mx);
            mean.rows_mut(3, 3).copy_from(&mm);
            mean.rows_mut(6, 3).copy_from(&my);
            let mut a = DMatrix::zeros(9, 9);
            a.view_mut((0, 0), (3, 3)).copy_from(&i3);
            a.view_mut((3, 0), (3, 3)).copy_from(&bxm);
            a.view_mut((3, 3), (3, 3)).copy_from(&i3);
            a.view_mut((6, 0), (3, 3)).copy_from(&(&bxy + &bmy * &bxm));
            a.view_mut((6, 3), (3, 3)).copy_from(&bmy);
            a.view_mut((6, 6), (3, 3)).copy_from(&i3);
            let mut d = DMatrix::zeros(9, 9);
            d.view_mut((0, 0), (3, 3)).copy_from(&m3(&p.psi_x));
            d.view_mut((3, 3), (3, 3)).copy_from(&m3(&p.psi_m));
            d.view_mut((6, 6), (3, 3)).copy_from(&m3(&p.psi_y));
            (mean, &a * d * a.transpose())
        }
    }
}

/// Mean and covariance of one individual's stacked observations
/// (covariate first for model 1, then processes in model order).
pub fn naive_individual_moments(params: &Params, row: &Individual) -> (DVector<f64>, DMatrix<f64>) {
    let kind = params.kind();
    let (jm, jc) = sequential_moments(params);
    let procs = kind.processes();
    let knots = params.knots();
    let lead = usize::from(kind.has_covariate());
    let waves = row.schedule.waves();
    let dim = lead + procs.len() * waves;
    let mut lambda = DMatrix::zeros(dim, jm.len());
    if lead == 1 {
        lambda[(0, 0)] = 1.0;
    }
    for (k, &p) in procs.iter().enumerate() {
        let times = row.schedule.times(p).unwrap();
        for (w, &t) in times.iter().enumerate() {
            let l = branch_loading(t, knots[k]);
            for f in 0..3 {
                lambda[(lead + k * waves + w, lead + 3 * k + f)] = l[f];
            }
        }
    }
    let mean = &lambda * jm;
    let mut cov = &lambda * jc * lambda.transpose();
    let res = params.residual().matrix();
    for a in 0..procs.len() {
        for b in 0..procs.len() {
            for w in 0..waves {
                cov[(lead + a * waves + w, lead + b * waves + w)] += res[(a, b)];
            }
        }
    }
    (mean, cov)
}

fn observation(kind: ModelKind, row: &Individual) -> DVector<f64> {
    let mut v = Vec::new();
    if kind.has_covariate() {
        v.push(row.covariate.unwrap());
    }
    for p in kind.processes() {
        v.extend_from_slice(row.values_of(p).unwrap());
    }
    DVector::from_vec(v)
}

/// Sum of full multivariate normal log-densities, using an LU inverse and
/// determinant of each individual's covariance.
pub fn naive_loglik(params: &Params, data: &Dataset) -> f64 {
    let kind = params.kind();
    data.rows()
        .iter()
        .map(|row| {
            let (mu, sigma) = naive_individual_moments(params, row);
            let y = observation(kind, row) - mu;
            let k = y.len() as f64;
            let det = sigma.clone().lu().determinant();
            let inv = sigma.try_inverse().unwrap();
            -0.5 * (k * (2.0 * std::f64::consts::PI).ln() + det.ln() + (y.transpose() * inv * &y)[(0, 0)])
        })
        .sum()
}

pub fn all_kinds() -> [ModelKind; 3] {
    [ModelKind::Univariate(Process::Y), ModelKind::Model1, ModelKind::Model2]
}

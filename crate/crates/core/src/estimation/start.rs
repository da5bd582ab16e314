//! Data-driven starting values.
//!
//! For every process the knot starts at the median of the pooled occasions.
//! Each individual's pre-knot and post-knot occasions get separate
//! least-squares lines; their slopes are the crude growth-factor slopes and
//! the average of the two lines evaluated at the knot is the crude knot
//! measurement. Means start at the sample means of the crude estimates,
//! growth-factor covariances at their sample covariance shrunk 20% toward
//! its diagonal, residual variances at the pooled residual variance and
//! every path coefficient and residual covariance at zero.
//!
//! When some individual has fewer than two occasions on either side, the
//! knot starts at the midpoint of the time range and both slopes at each
//! individual's end-to-end slope, with the knot measurement interpolated.

use nalgebra::{Matrix3, Vector3};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    CovToGfCoef, LowerTriCoef33, ModelKind, Params, ParamsModel1, ParamsModel2, Process,
    ResidualStructure, UnivariateParams,
};

const SHRINK: f64 = 0.2;

#[derive(Clone, Debug)]
pub(crate) struct ProcessStart {
    pub knot: f64,
    pub mean: Vector3<f64>,
    pub psi: Matrix3<f64>,
    pub theta: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares line; returns (intercept, slope, residual sum of squares).
fn ols(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let icpt = ym - slope * tm;
    let rss = t
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    (icpt, slope, rss)
}

fn interpolate(t: &[f64], y: &[f64], at: f64) -> f64 {
    let j = t.partition_point(|&v| v <= at).clamp(1, t.len() - 1);
    let (t0, t1, y0, y1) = (t[j - 1], t[j], y[j - 1], y[j]);
    y0 + (y1 - y0) * (at - t0) / (t1 - t0)
}

fn sample_moments(rows: &[Vector3<f64>]) -> (Vector3<f64>, Matrix3<f64>) {
    let n = rows.len() as f64;
    let mean = rows.iter().fold(Vector3::zeros(), |a, r| a + r) / n;
    let mut cov = Matrix3::zeros();
    for r in rows {
        let d = r - mean;
        cov += d * d.transpose();
    }
    (mean, cov / (n - 1.0).max(1.0))
}

pub(crate) fn process_start(data: &Dataset, p: Process) -> Result<ProcessStart> {
    let rows = data.rows();
    let missing = || Error::DimensionMismatch(format!("dataset has no process {p}"));
    let mut pooled: Vec<f64> = Vec::new();
    let mut all_values: Vec<f64> = Vec::new();
    for r in rows {
        pooled.extend_from_slice(r.schedule.times(p).ok_or_else(missing)?);
        all_values.extend_from_slice(r.values_of(p).ok_or_else(missing)?);
    }
    let nv = all_values.len() as f64;
    let vm = all_values.iter().sum::<f64>() / nv;
    let total_var = all_values.iter().map(|v| (v - vm).powi(2)).sum::<f64>() / nv;
    let floor = 1e-6 * (1.0 + total_var);
    let (lo, hi) = data.time_range(p).ok_or_else(missing)?;

    let knot = median(&mut pooled);
    let split_ok = rows.iter().all(|r| {
        let t = r.schedule.times(p).expect("checked");
        let pre = t.iter().filter(|&&v| v <= knot).count();
        pre >= 2 && t.len() - pre >= 2
    });

    let mut crude = Vec::with_capacity(rows.len());
    let (knot, theta) = if split_ok {
        let mut rss = 0.0;
        let mut dof = 0usize;
        for r in rows {
            let t = r.schedule.times(p).expect("checked");
            let y = r.values_of(p).expect("checked");
            let pre = t.iter().filter(|&&v| v <= knot).count();
            let (a1, s1, r1) = ols(&t[..pre], &y[..pre]);
            let (a2, s2, r2) = ols(&t[pre..], &y[pre..]);
            let at_knot = 0.5 * (a1 + s1 * knot + a2 + s2 * knot);
            crude.push(Vector3::new(s1, at_knot, s2));
            rss += r1 + r2;
            dof += t.len() - 4;
        }
        let theta = if dof > 0 { rss / dof as f64 } else { 0.1 * total_var };
        (knot, theta)
    } else {
        let knot = 0.5 * (lo + hi);
        for r in rows {
            let t = r.schedule.times(p).expect("checked");
            let y = r.values_of(p).expect("checked");
            let j = t.len() - 1;
            let s = (y[j] - y[0]) / (t[j] - t[0]);
            crude.push(Vector3::new(s, interpolate(t, y, knot), s));
        }
        (knot, 0.1 * total_var)
    };

    let (mean, cov) = sample_moments(&crude);
    let mut psi = cov * (1.0 - SHRINK);
    for k in 0..3 {
        psi[(k, k)] = cov[(k, k)].max(floor);
    }
    if psi.cholesky().is_none() {
        psi = Matrix3::from_diagonal(&psi.diagonal());
    }
    Ok(ProcessStart {
        knot,
        mean,
        psi,
        theta: theta.max(floor),
    })
}

/// Starting values for fitting `kind` to `data`.
pub fn starting_values(data: &Dataset, kind: ModelKind) -> Result<Params> {
    data.check_model(kind)?;
    if data.n() < 2 {
        return Err(Error::InvalidInput("need at least two individuals".into()));
    }
    Ok(match kind {
        ModelKind::Univariate(p) => {
            let s = process_start(data, p)?;
            Params::Univariate(UnivariateParams {
                process: p,
                knot: s.knot,
                mean: s.mean,
                psi: s.psi,
                theta: s.theta,
            })
        }
        ModelKind::Model1 => {
            let xs: Vec<f64> = data.rows().iter().filter_map(|r| r.covariate).collect();
            let n = xs.len() as f64;
            let mu_x = xs.iter().sum::<f64>() / n;
            let phi_x = (xs.iter().map(|x| (x - mu_x).powi(2)).sum::<f64>() / n).max(1e-8);
            let m = process_start(data, Process::M)?;
            let y = process_start(data, Process::Y)?;
            Params::Model1(ParamsModel1 {
                mu_x,
                phi_x,
                knot_m: m.knot,
                knot_y: y.knot,
                alpha_m: m.mean,
                alpha_y: y.mean,
                b_xm: CovToGfCoef::new(0.0, 0.0, 0.0),
                b_xy: CovToGfCoef::new(0.0, 0.0, 0.0),
                b_my: LowerTriCoef33::zero(),
                psi_m: m.psi,
                psi_y: y.psi,
                residual: ResidualStructure::two(m.theta, y.theta, 0.0),
            })
        }
        ModelKind::Model2 => {
            let x = process_start(data, Process::X)?;
            let m = process_start(data, Process::M)?;
            let y = process_start(data, Process::Y)?;
            Params::Model2(ParamsModel2 {
                mu_x: x.mean,
                psi_x: x.psi,
                knot_x: x.knot,
                knot_m: m.knot,
                knot_y: y.knot,
                alpha_m: m.mean,
                alpha_y: y.mean,
                b_xm: LowerTriCoef33::zero(),
                b_xy: LowerTriCoef33::zero(),
                b_my: LowerTriCoef33::zero(),
                psi_m: m.psi,
                psi_y: y.psi,
                residual: ResidualStructure::three(x.theta, m.theta, y.theta, 0.0, 0.0, 0.0),
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Individual;
    use crate::model::MeasurementSchedule;

    fn noise_free(knot: f64, times: &[f64]) -> Dataset {
        let rows = (0..20)
            .map(|i| {
                let s1 = 2.0 + 0.1 * i as f64;
                let lvl = 50.0 + i as f64;
                let v = times
                    .iter()
                    .map(|&t| {
                        let r = crate::model::loading_row(t, knot);
                        s1 * r[0] + lvl * r[1] + 0.5 * r[2]
                    })
                    .collect();
                Individual {
                    id: i.to_string(),
                    covariate: None,
                    schedule: MeasurementSchedule::shared(&[Process::Y], times.to_vec()).unwrap(),
                    values: vec![v],
                }
            })
            .collect();
        Dataset::new(rows).unwrap()
    }

    #[test]
    fn recovers_noise_free_trajectories() {
        let times: Vec<f64> = (0..10).map(f64::from).collect();
        let d = noise_free(4.5, &times);
        let s = process_start(&d, Process::Y).unwrap();
        assert_eq!(s.knot, 4.5);
        assert!((s.mean[0] - 2.95).abs() < 1e-10);
        assert!((s.mean[1] - 59.5).abs() < 1e-10);
        assert!((s.mean[2] - 0.5).abs() < 1e-10);
        assert!(s.theta > 0.0 && s.theta < 1e-2);
        assert!(s.psi.cholesky().is_some());
    }

    #[test]
    fn short_series_uses_fallback() {
        let d = noise_free(1.5, &[0.0, 1.0, 2.0]);
        let s = process_start(&d, Process::Y).unwrap();
        assert_eq!(s.knot, 1.0);
        assert!(s.theta > 0.0);
    }
}

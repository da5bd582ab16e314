//! Synthetic schedules and datasets.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Individual};
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::model::{loading_row, reduced_form, MeasurementSchedule, ModelKind, Params, Process};

/// Occasions jittered uniformly within `±jitter` of the base grid
/// `0, 1, …, waves − 1`, drawn independently for every process.
pub fn generate_schedule<R: Rng + ?Sized>(
    waves: usize,
    jitter: f64,
    processes: &[Process],
    rng: &mut R,
) -> Result<MeasurementSchedule> {
    if waves < 2 {
        return Err(Error::InvalidInput("need at least two waves".into()));
    }
    if !(0.0..0.5).contains(&jitter) {
        return Err(Error::InvalidInput(format!(
            "jitter {jitter} must lie in [0, 0.5) to keep occasions ordered"
        )));
    }
    let entries = processes
        .iter()
        .map(|&p| {
            let times = (0..waves)
                .map(|j| {
                    let t = j as f64;
                    if jitter == 0.0 {
                        t
                    } else {
                        rng.random_range(t - jitter..t + jitter)
                    }
                })
                .collect();
            (p, times)
        })
        .collect();
    MeasurementSchedule::new(entries)
}

fn standard_normal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws `n` individuals from the population `truth`: joint growth factors
/// (and the baseline covariate) from the reduced form, individual
/// schedules, then observations with same-occasion correlated residuals.
pub fn generate_dataset<R: Rng + ?Sized>(
    truth: &Params,
    n: usize,
    waves: usize,
    jitter: f64,
    rng: &mut R,
) -> Result<Dataset> {
    // Degenerate (PSD) populations are allowed here, e.g. noise-free data.
    if truth.to_natural().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("non-finite parameter".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let kind = truth.kind();
    let procs = kind.processes();
    let joint = reduced_form(truth);
    let lf = psd_factor(&joint.cov)
        .ok_or_else(|| Error::InvalidParams("growth-factor covariance is not PSD".into()))?;
    let lr = psd_factor(&truth.residual().matrix())
        .ok_or_else(|| Error::InvalidParams("residual covariance is not PSD".into()))?;
    let knots = truth.knots();
    let offsets: Vec<usize> = procs
        .iter()
        .map(|&p| joint.offset(p).expect("every modelled process has factors"))
        .collect();
    let dim = joint.mean.len();
    let np = procs.len();

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let eta = &joint.mean + &lf * standard_normal(dim, rng);
        let schedule = generate_schedule(waves, jitter, &procs, rng)?;
        let mut values = vec![Vec::with_capacity(waves); np];
        for w in 0..waves {
            let e = &lr * standard_normal(np, rng);
            for (u, &p) in procs.iter().enumerate() {
                let t = schedule.times(p).expect("generated")[w];
                let l = loading_row(t, knots[u]);
                let o = offsets[u];
                let mean = l[0] * eta[o] + l[1] * eta[o + 1] + l[2] * eta[o + 2];
                values[u].push(mean + e[u]);
            }
        }
        let covariate = matches!(kind, ModelKind::Model1).then(|| eta[0]);
        rows.push(Individual {
            id: (i + 1).to_string(),
            covariate,
            schedule,
            values,
        });
    }
    Dataset::new(rows)
}

/// Coefficient that makes a predictor explain `target_r2` of an outcome
/// factor's variance.
pub fn r2_to_coefficient(target_r2: f64, var_predictor: f64, var_outcome: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target_r2) {
        return Err(Error::InvalidInput(format!("target R² {target_r2} outside [0, 1)")));
    }
    if !(var_predictor > 0.0 && var_outcome > 0.0) {
        return Err(Error::InvalidInput("variances must be positive".into()));
    }
    Ok((target_r2 * var_outcome / var_predictor).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::model::UnivariateParams;

    #[test]
    fn zero_jitter_is_base_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = generate_schedule(4, 0.0, &[Process::M, Process::Y], &mut rng).unwrap();
        assert_eq!(s.times(Process::Y).unwrap(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn jittered_occasions_stay_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let s = generate_schedule(6, 0.25, &[Process::Y], &mut rng).unwrap();
            for (j, t) in s.times(Process::Y).unwrap().iter().enumerate() {
                assert!((t - j as f64).abs() <= 0.25);
            }
        }
        assert!(generate_schedule(6, 0.5, &[Process::Y], &mut rng).is_err());
        assert!(generate_schedule(1, 0.1, &[Process::Y], &mut rng).is_err());
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2_to_coefficient(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!((r2_to_coefficient(0.13, 1.0, 1.0).unwrap() - 0.360_555_127_546_398_9).abs() < 1e-15);
        assert!(r2_to_coefficient(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn noise_free_draws_lie_on_the_curve() {
        let truth = Params::Univariate(UnivariateParams {
            process: Process::Y,
            knot: 2.5,
            mean: Vector3::new(5.0, 100.0, 2.6),
            psi: Matrix3::zeros(),
            theta: 0.0,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = generate_dataset(&truth, 5, 6, 0.25, &mut rng).unwrap();
        for r in d.rows() {
            let t = r.schedule.times(Process::Y).unwrap();
            for (tj, v) in t.iter().zip(&r.values[0]) {
                let l = loading_row(*tj, 2.5);
                assert_eq!(*v, l[0] * 5.0 + l[1] * 100.0 + l[2] * 2.6);
            }
        }
    }
}

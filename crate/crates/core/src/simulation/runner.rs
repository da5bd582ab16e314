//! Monte Carlo driver: repeated generation and estimation until the
//! requested number of successful replications is collected.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{population_params, ConditionSpec};
use super::generate::generate_dataset;
use super::metrics::{performance_metrics, PerformanceMetrics};
use crate::data::Dataset;
use crate::effects::{effect_catalog, gf_mean_definitions, EffectKind};
use crate::error::{Error, Result};
use crate::estimation::{fit, FitOptions, FitResult};
use crate::model::{ModelKind, Params};

/// Environment variable that caps the number of worker threads.
pub const WORKERS_ENV: &str = "BLSMED_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityGroup {
    Parameter,
    Indirect,
    Total,
    Mean,
}

/// A scored quantity with its generating value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub label: String,
    pub group: QuantityGroup,
    pub truth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityEstimate {
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

/// Free parameters, then indirect and total effects, then marginal
/// growth-factor means. Direct effects are the path parameters themselves
/// and are not repeated.
pub fn quantities(truth: &Params) -> Vec<Quantity> {
    let kind = truth.kind();
    let theta = truth.to_natural();
    let mut out: Vec<Quantity> = truth
        .names()
        .into_iter()
        .zip(&theta)
        .map(|(label, &v)| Quantity {
            label,
            group: QuantityGroup::Parameter,
            truth: v,
        })
        .collect();
    for d in effect_catalog(kind).into_iter().chain(gf_mean_definitions(kind)) {
        let group = match d.kind {
            EffectKind::Direct => continue,
            EffectKind::Indirect => QuantityGroup::Indirect,
            EffectKind::Total => QuantityGroup::Total,
            EffectKind::Mean => QuantityGroup::Mean,
        };
        out.push(Quantity {
            truth: d.value(&theta),
            label: d.label,
            group,
        });
    }
    out
}

/// Estimates of every quantity of [`quantities`] from a fit, in the same
/// order.
pub fn fit_quantities(fit: &FitResult) -> Vec<QuantityEstimate> {
    let params = fit.estimates.iter().map(|e| QuantityEstimate {
        estimate: e.estimate,
        se: e.se,
        ci: e.ci,
    });
    let effects = fit
        .effects
        .iter()
        .filter(|e| e.kind != EffectKind::Direct)
        .chain(&fit.gf_means)
        .map(|e| QuantityEstimate {
            estimate: e.estimate,
            se: e.se,
            ci: e.ci,
        });
    params.chain(effects).collect()
}

pub struct Replication<'a> {
    pub index: u64,
    pub kind: ModelKind,
    pub truth: &'a [Quantity],
    /// Seed for any randomness inside the estimator.
    pub seed: u64,
}

/// Something that turns a dataset into estimates of the condition's
/// quantities, or `None` when it fails to converge.
pub trait Estimator: Sync {
    fn estimate(&self, data: &Dataset, rep: &Replication<'_>) -> Option<Vec<QuantityEstimate>>;
}

/// Full-information maximum likelihood with multi-start.
#[derive(Clone, Debug, Default)]
pub struct MleEstimator {
    pub options: FitOptions,
}

impl Estimator for MleEstimator {
    fn estimate(&self, data: &Dataset, rep: &Replication<'_>) -> Option<Vec<QuantityEstimate>> {
        let opts = FitOptions {
            seed: rep.seed,
            ..self.options.clone()
        };
        let res = fit(data, rep.kind, &opts).ok()?;
        res.converged().then(|| fit_quantities(&res))
    }
}

/// Returns the generating values with zero-width intervals.
#[derive(Clone, Copy, Debug, Default)]
pub struct TruthEstimator;

impl Estimator for TruthEstimator {
    fn estimate(&self, _: &Dataset, rep: &Replication<'_>) -> Option<Vec<QuantityEstimate>> {
        Some(
            rep.truth
                .iter()
                .map(|q| QuantityEstimate {
                    estimate: q.truth,
                    se: Some(0.0),
                    ci: Some((q.truth, q.truth)),
                })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: u64,
    pub estimates: Vec<QuantityEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub spec: ConditionSpec,
    pub quantities: Vec<Quantity>,
    /// One entry per quantity; empty when fewer than two replications
    /// succeeded.
    pub metrics: Vec<PerformanceMetrics>,
    pub replicates: Vec<ReplicateRecord>,
    pub successes: usize,
    pub attempts: usize,
    pub failures: usize,
    pub convergence_rate: f64,
    /// The attempt cap was reached before `spec.reps` successes.
    pub partial: bool,
}

impl ConditionResult {
    pub fn metric(&self, label: &str) -> Option<(&Quantity, &PerformanceMetrics)> {
        let i = self.quantities.iter().position(|q| q.label == label)?;
        Some((&self.quantities[i], self.metrics.get(i)?))
    }
}

/// RNG of replication `index`: an independent ChaCha stream of the base
/// seed.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
}

fn attempt<E: Estimator>(
    spec: &ConditionSpec,
    truth: &Params,
    quantities: &[Quantity],
    estimator: &E,
    index: u64,
) -> Result<Option<Vec<QuantityEstimate>>> {
    let mut rng = replication_rng(spec.seed, index);
    let data = generate_dataset(truth, spec.n, spec.waves, spec.jitter, &mut rng)?;
    let rep = Replication {
        index,
        kind: truth.kind(),
        truth: quantities,
        seed: rng.next_u64(),
    };
    Ok(estimator
        .estimate(&data, &rep)
        .filter(|e| e.len() == quantities.len()))
}

/// Runs one Monte Carlo condition.
///
/// Replications are attempted in batches executed in parallel; results are
/// collected by replication index, so the outcome does not depend on the
/// number of workers. The first `spec.reps` successes by index are kept.
pub fn run_condition<E: Estimator>(spec: &ConditionSpec, estimator: &E) -> Result<ConditionResult> {
    run_condition_with_workers(spec, estimator, workers_from_env())
}

/// [`run_condition`] with an explicit worker count (`None` uses every
/// available core).
pub fn run_condition_with_workers<E: Estimator>(
    spec: &ConditionSpec,
    estimator: &E,
    workers: Option<usize>,
) -> Result<ConditionResult> {
    let truth = population_params(spec)?;
    let qs = quantities(&truth);
    let cap = spec.max_attempts();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let width = pool.current_num_threads();

    let mut replicates = Vec::new();
    let mut attempts = 0usize;
    let mut next = 0usize;
    while replicates.len() < spec.reps && next < cap {
        let need = spec.reps - replicates.len();
        let batch = (need + need / 10 + 1).max(width).min(cap - next);
        let results: Vec<Result<Option<Vec<QuantityEstimate>>>> = pool.install(|| {
            (next..next + batch)
                .into_par_iter()
                .map(|i| attempt(spec, &truth, &qs, estimator, i as u64))
                .collect()
        });
        for (offset, r) in results.into_iter().enumerate() {
            if replicates.len() == spec.reps {
                break;
            }
            attempts = next + offset + 1;
            if let Some(estimates) = r? {
                replicates.push(ReplicateRecord {
                    index: (next + offset) as u64,
                    estimates,
                });
            }
        }
        next += batch;
    }

    let successes = replicates.len();
    let metrics = if successes >= 2 {
        (0..qs.len())
            .map(|q| {
                let est: Vec<f64> = replicates.iter().map(|r| r.estimates[q].estimate).collect();
                let ses: Vec<Option<f64>> = replicates.iter().map(|r| r.estimates[q].se).collect();
                let cis: Vec<Option<(f64, f64)>> = replicates.iter().map(|r| r.estimates[q].ci).collect();
                performance_metrics(&est, &ses, &cis, qs[q].truth)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(ConditionResult {
        spec: spec.clone(),
        quantities: qs,
        metrics,
        replicates,
        successes,
        attempts,
        failures: attempts - successes,
        convergence_rate: if attempts > 0 { successes as f64 / attempts as f64 } else { 0.0 },
        partial: successes < spec.reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{Scenario, Shape};

    pub(crate) fn small_spec(reps: usize) -> ConditionSpec {
        ConditionSpec {
            model: 1,
            n: 30,
            waves: 6,
            knots: vec![2.5, 2.5],
            theta: 1.0,
            residual_correlation: 0.3,
            scenario: Scenario::Medium,
            shape: Shape::Deceleration,
            reps,
            seed: 11,
            jitter: 0.25,
            max_attempts: None,
            temporal_order: false,
        }
    }

    #[test]
    fn truth_estimator_is_perfect() {
        let r = run_condition(&small_spec(3), &TruthEstimator).unwrap();
        assert_eq!(r.successes, 3);
        assert_eq!(r.attempts, 3);
        assert!(!r.partial);
        for m in &r.metrics {
            assert_eq!((m.bias, m.empirical_se, m.rmse, m.coverage), (0.0, 0.0, 0.0, 1.0));
        }
    }

    struct EveryOther;
    impl Estimator for EveryOther {
        fn estimate(&self, d: &Dataset, rep: &Replication<'_>) -> Option<Vec<QuantityEstimate>> {
            (rep.index % 2 == 1).then(|| TruthEstimator.estimate(d, rep)).flatten()
        }
    }

    #[test]
    fn failures_are_counted_and_capped() {
        let r = run_condition(&small_spec(4), &EveryOther).unwrap();
        assert_eq!(r.successes, 4);
        assert_eq!(r.attempts, 8);
        assert_eq!(r.failures, 4);
        let mut spec = small_spec(4);
        spec.max_attempts = Some(5);
        let r = run_condition(&spec, &EveryOther).unwrap();
        assert!(r.partial);
        assert_eq!((r.successes, r.attempts, r.failures), (2, 5, 3));
    }

    #[test]
    fn quantity_catalog_has_effects_and_means() {
        let truth = population_params(&small_spec(2)).unwrap();
        let q = quantities(&truth);
        let count = |g| q.iter().filter(|x| x.group == g).count();
        assert_eq!(count(QuantityGroup::Parameter), 37);
        assert_eq!(count(QuantityGroup::Indirect), 6);
        assert_eq!(count(QuantityGroup::Total), 3);
        assert_eq!(count(QuantityGroup::Mean), 6);
        let mean_m1 = q.iter().find(|x| x.label == "mean_m1").unwrap();
        assert!((mean_m1.truth - 5.0).abs() < 1e-12);
        let mean_yg = q.iter().find(|x| x.label == "mean_yg").unwrap();
        assert!((mean_yg.truth - 100.0).abs() < 1e-12);
    }
}

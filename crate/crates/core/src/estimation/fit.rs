//! Multi-start maximum-likelihood fitting with Hessian-based standard
//! errors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::effects::{effect_catalog, estimate_all, gf_mean_definitions, EffectEstimate, Z_95};
use crate::error::Result;
use crate::estimation::likelihood::FimlEvaluator;
use crate::estimation::optimizer::{central_hessian, minimize, OptimOptions};
use crate::estimation::start::starting_values;
use crate::estimation::transform::Transform;
use crate::model::{ModelKind, Params, Role};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Data-driven start plus up to `max_starts - 1` jittered restarts.
    pub max_starts: usize,
    /// Infinity-norm tolerance on the gradient of the per-individual
    /// negative log-likelihood in unconstrained coordinates.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Seeds the jitter of restarts.
    pub seed: u64,
    /// Ridge added before the positive-definiteness check of the Hessian.
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_starts: 10,
            grad_tol: 1e-6,
            max_iter: 1000,
            seed: 0,
            ridge: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub loglik: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub kind: ModelKind,
    pub n: usize,
    pub params: Params,
    pub estimates: Vec<ParameterEstimate>,
    pub param_cov: Option<DMatrix<f64>>,
    pub loglik: f64,
    pub status: FitStatus,
    pub starts: Vec<StartRecord>,
    pub grad_norm: f64,
    /// Direct, indirect and total effects (empty for univariate fits).
    pub effects: Vec<EffectEstimate>,
    /// Marginal growth-factor means.
    pub gf_means: Vec<EffectEstimate>,
    pub message: Option<String>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn estimate(&self, name: &str) -> Option<&ParameterEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn effect(&self, label: &str) -> Option<&EffectEstimate> {
        self.effects
            .iter()
            .chain(&self.gf_means)
            .find(|e| e.label == label)
    }
}

/// Central-difference Hessian of the total negative log-likelihood in
/// natural coordinates.
pub fn natural_hessian(data: &Dataset, params: &Params) -> Option<DMatrix<f64>> {
    let kind = params.kind();
    let mut ev = FimlEvaluator::new(data, kind)?;
    let theta = params.to_natural();
    let steps: Vec<f64> = theta.iter().map(|v| (1e-4 * v.abs()).max(1e-4)).collect();
    let mut f = |v: &[f64]| match Params::from_natural(kind, v) {
        Ok(p) => -ev.loglik(&p),
        Err(_) => f64::INFINITY,
    };
    central_hessian(&mut f, &theta, &steps)
}

fn jitter(params: &Params, tr: &Transform, gaps: &[f64], rng: &mut ChaCha8Rng) -> Params {
    let mut v = params.to_natural();
    let roles = tr.roles().to_vec();
    let mut knot_i = 0;
    for (i, role) in roles.iter().enumerate() {
        match *role {
            Role::GrowthIntercept(0 | 2) | Role::Variance => v[i] *= rng.random_range(0.8..1.2),
            Role::Knot(p) => {
                let (lo, hi) = tr.knot_bounds(p);
                let margin = 0.01 * (hi - lo);
                let g = v[i] + rng.random_range(-0.5..0.5) * gaps[knot_i];
                v[i] = g.clamp(lo + margin, hi - margin);
                knot_i += 1;
            }
            Role::Psi { start, slot: 0 } => {
                // D Ψ D keeps the block positive definite.
                let d: Vec<f64> = (0..3).map(|_| rng.random_range(0.8_f64..1.2).sqrt()).collect();
                for (s, &(r, c)) in crate::model::params::LOWER_TRI_INDEX.iter().enumerate() {
                    v[start + s] *= d[r] * d[c];
                }
            }
            _ => {}
        }
    }
    Params::from_natural(params.kind(), &v).expect("layout length")
}

struct Candidate {
    params: Params,
    loglik: f64,
    grad_norm: f64,
    cov: Option<DMatrix<f64>>,
}

fn invert_information(h: &DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    let sym = (h + h.transpose()) * 0.5;
    let mut ridged = sym.clone();
    for i in 0..sym.nrows() {
        ridged[(i, i)] += ridge;
    }
    // positive definite only after the ridge still counts
    let inv = sym.cholesky().or_else(|| ridged.cholesky())?.inverse();
    inv.diagonal().iter().all(|v| *v > 0.0).then_some(inv)
}

/// Fits `kind` to `data` by full-information maximum likelihood.
///
/// Errors only for unusable input. Non-convergence is reported through
/// [`FitResult::status`].
pub fn fit(data: &Dataset, kind: ModelKind, options: &FitOptions) -> Result<FitResult> {
    data.check_model(kind)?;
    let canonical = data.canonical();
    let data = &canonical;
    let n = data.n();
    let n_free = kind.n_free();
    let start = starting_values(data, kind)?;
    let failed = |params: Params, message: String| FitResult {
        kind,
        n,
        estimates: params
            .names()
            .into_iter()
            .zip(params.to_natural())
            .map(|(name, estimate)| ParameterEstimate {
                name,
                estimate,
                se: None,
                ci: None,
            })
            .collect(),
        params,
        param_cov: None,
        loglik: f64::NEG_INFINITY,
        status: FitStatus::Failed,
        starts: Vec::new(),
        grad_norm: f64::INFINITY,
        effects: Vec::new(),
        gf_means: Vec::new(),
        message: Some(message),
    };
    if n < n_free {
        return Ok(failed(
            start,
            format!("{n} individuals cannot identify {n_free} free parameters"),
        ));
    }
    let tr = Transform::new(kind, data)?;
    let gaps: Vec<f64> = kind
        .processes()
        .iter()
        .map(|&p| {
            let (lo, hi) = data.time_range(p).expect("checked");
            (hi - lo) / (data.waves() - 1) as f64
        })
        .collect();
    let mut ev = FimlEvaluator::new(data, kind).expect("checked");
    let nf = n as f64;
    let opts = OptimOptions {
        max_iter: options.max_iter,
        grad_tol: options.grad_tol,
        ..OptimOptions::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut starts = Vec::new();
    let mut best: Option<Candidate> = None;
    let mut best_any: Option<(Params, f64, f64)> = None;
    for s in 0..options.max_starts.max(1) {
        let init = if s == 0 {
            start.clone()
        } else {
            jitter(&start, &tr, &gaps, &mut rng)
        };
        let Ok(x0) = tr.transform(&init) else {
            continue;
        };
        let mut obj = |v: &[f64]| -ev.loglik(&tr.untransform(v)) / nf;
        let out = minimize(&mut obj, &x0.values, &opts);
        let params = tr.untransform(&out.x);
        let loglik = -out.f * nf;
        let mut converged = false;
        if out.converged {
            if let Some(cov) = natural_hessian(data, &params).and_then(|h| invert_information(&h, options.ridge)) {
                converged = true;
                if best.as_ref().is_none_or(|b| loglik > b.loglik) {
                    best = Some(Candidate {
                        params: params.clone(),
                        loglik,
                        grad_norm: out.grad_norm,
                        cov: Some(cov),
                    });
                }
            }
        }
        if loglik.is_finite() && best_any.as_ref().is_none_or(|b| loglik > b.1) {
            best_any = Some((params, loglik, out.grad_norm));
        }
        starts.push(StartRecord {
            loglik,
            grad_norm: out.grad_norm,
            iterations: out.iterations,
            converged,
        });
        if converged {
            break;
        }
    }

    let (cand, status, message) = match best {
        Some(c) => (c, FitStatus::Converged, None),
        None => match best_any {
            Some((params, loglik, grad_norm)) => (
                Candidate {
                    params,
                    loglik,
                    grad_norm,
                    cov: None,
                },
                FitStatus::Failed,
                Some("no start reached a stationary point with a positive definite Hessian".to_string()),
            ),
            None => {
                let mut r = failed(start, "likelihood not finite at any start".into());
                r.starts = starts;
                return Ok(r);
            }
        },
    };
    let theta = cand.params.to_natural();
    let estimates = cand
        .params
        .names()
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let se = cand.cov.as_ref().map(|c| c[(i, i)].sqrt());
            ParameterEstimate {
                name,
                estimate: theta[i],
                se,
                ci: se.map(|s| (theta[i] - Z_95 * s, theta[i] + Z_95 * s)),
            }
        })
        .collect();
    let effects = estimate_all(&theta, cand.cov.as_ref(), &effect_catalog(kind));
    let gf_means = estimate_all(&theta, cand.cov.as_ref(), &gf_mean_definitions(kind));
    Ok(FitResult {
        kind,
        n,
        params: cand.params,
        estimates,
        param_cov: cand.cov,
        loglik: cand.loglik,
        status,
        starts,
        grad_norm: cand.grad_norm,
        effects,
        gf_means,
        message,
    })
}

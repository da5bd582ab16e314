//! Full-information maximum likelihood for the bilinear-spline models.
//!
//! Each individual contributes `log φ(z; Λμ, ΛCΛᵀ + Θ)` under its own
//! loadings. The density is evaluated in latent space through the
//! Woodbury identity, so the per-individual cost depends on the number of
//! growth factors rather than the number of observations. Quantities that
//! depend only on the knots and the residual matrix are cached between
//! calls, which makes finite-difference gradients cheap for every
//! coordinate other than knots and residual parameters.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::linalg::{cholesky_in_place, forward_solve_in_place};
use crate::model::moments::LatentForm;
use crate::model::{loading_row, ModelKind, Params};

const MAX_K: usize = 9;

/// Total log-likelihood of `data` under `params`; `-∞` for parameter
/// values outside the feasible region.
pub fn fiml_loglik(params: &Params, data: &Dataset) -> f64 {
    match FimlEvaluator::new(data, params.kind()) {
        Some(mut ev) => ev.loglik(params),
        None => f64::NEG_INFINITY,
    }
}

struct Cache {
    key: Vec<f64>,
    /// Per-individual `ΛᵀΘ⁻¹Λ`, row-major k×k.
    gram: Vec<f64>,
    /// Per-individual loadings, indexed `[i][process][wave][factor]`.
    loadings: Vec<f64>,
    rinv: Vec<f64>,
    logdet_theta: f64,
}

/// Reusable likelihood evaluator bound to one dataset and model.
pub struct FimlEvaluator<'a> {
    data: &'a Dataset,
    kind: ModelKind,
    /// Values stacked per individual as `[process][wave]`.
    values: Vec<f64>,
    covariate: Vec<f64>,
    n_proc: usize,
    waves: usize,
    cache: Option<Cache>,
}

impl<'a> FimlEvaluator<'a> {
    /// `None` if the dataset lacks what the model needs.
    pub fn new(data: &'a Dataset, kind: ModelKind) -> Option<Self> {
        data.check_model(kind).ok()?;
        let procs = kind.processes();
        let waves = data.waves();
        let mut values = Vec::with_capacity(data.n() * procs.len() * waves);
        let mut covariate = Vec::new();
        for r in data.rows() {
            for &p in &procs {
                values.extend_from_slice(r.values_of(p)?);
            }
            if kind.has_covariate() {
                covariate.push(r.covariate?);
            }
        }
        Some(Self {
            data,
            kind,
            values,
            covariate,
            n_proc: procs.len(),
            waves,
            cache: None,
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    fn refresh_cache(&mut self, form: &LatentForm) -> bool {
        let mut key = form.knots.clone();
        key.extend(form.residual.iter());
        if self.cache.as_ref().is_some_and(|c| c.key == key) {
            return true;
        }
        let p = self.n_proc;
        let k = 3 * p;
        let j = self.waves;
        let Some(ch) = form.residual.clone().cholesky() else {
            self.cache = None;
            return false;
        };
        let logdet_r: f64 = ch.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let rinv_m: DMatrix<f64> = ch.inverse();
        let rinv: Vec<f64> = (0..p * p).map(|i| rinv_m[(i / p, i % p)]).collect();
        let procs = self.kind.processes();
        let n = self.data.n();
        let mut gram = vec![0.0; n * k * k];
        let mut loadings = vec![0.0; n * p * j * 3];
        for (i, row) in self.data.rows().iter().enumerate() {
            let lo = &mut loadings[i * p * j * 3..(i + 1) * p * j * 3];
            for (u, &proc_u) in procs.iter().enumerate() {
                let times = row.schedule.times(proc_u).expect("checked in new");
                for (w, &t) in times.iter().enumerate() {
                    let r = loading_row(t, form.knots[u]);
                    lo[(u * j + w) * 3..(u * j + w) * 3 + 3].copy_from_slice(&r);
                }
            }
            let g = &mut gram[i * k * k..(i + 1) * k * k];
            for w in 0..j {
                for u in 0..p {
                    let lu = &lo[(u * j + w) * 3..(u * j + w) * 3 + 3];
                    for v in 0..p {
                        let lv = &lo[(v * j + w) * 3..(v * j + w) * 3 + 3];
                        let s = rinv[u * p + v];
                        for a in 0..3 {
                            for b in 0..3 {
                                g[(3 * u + a) * k + 3 * v + b] += s * lu[a] * lv[b];
                            }
                        }
                    }
                }
            }
        }
        self.cache = Some(Cache {
            key,
            gram,
            loadings,
            rinv,
            logdet_theta: j as f64 * logdet_r,
        });
        true
    }

    /// Total log-likelihood; `-∞` when infeasible.
    pub fn loglik(&mut self, params: &Params) -> f64 {
        if params.kind() != self.kind {
            return f64::NEG_INFINITY;
        }
        match params.latent_form() {
            Some(form) => self.loglik_form(&form),
            None => f64::NEG_INFINITY,
        }
    }

    pub(crate) fn loglik_form(&mut self, form: &LatentForm) -> f64 {
        if form.factor.iter().any(|v| !v.is_finite())
            || form.mean0.iter().any(|v| !v.is_finite())
            || form.knots.iter().any(|v| !v.is_finite())
        {
            return f64::NEG_INFINITY;
        }
        if !self.refresh_cache(form) {
            return f64::NEG_INFINITY;
        }
        let cache = self.cache.as_ref().expect("refreshed");
        let p = self.n_proc;
        let k = 3 * p;
        let j = self.waves;
        let n = self.data.n();
        let d = (p * j) as f64;

        // Latent precision (route A) or factor (route B).
        let (cinv, logdet_c) = if form.factor_invertible {
            let finv = match form
                .factor
                .solve_lower_triangular(&DMatrix::identity(k, k))
            {
                Some(m) => m,
                None => return f64::NEG_INFINITY,
            };
            let ci = finv.transpose() * &finv;
            let ld: f64 = form.factor.diagonal().iter().map(|x| 2.0 * x.ln()).sum();
            (
                Some((0..k * k).map(|i| ci[(i / k, i % k)]).collect::<Vec<_>>()),
                ld,
            )
        } else {
            (None, 0.0)
        };
        let fmat: Vec<f64> = (0..k * k).map(|i| form.factor[(i / k, i % k)]).collect();

        let mut total = 0.0;
        let mut mean = [0.0; MAX_K];
        let mut gvec = [0.0; MAX_K];
        let mut work = [0.0; MAX_K * MAX_K];
        let mut tmp = [0.0; MAX_K * MAX_K];
        let mut rz = [0.0; 3];
        let mut res = [0.0; 3];
        for i in 0..n {
            // Conditional latent mean.
            for a in 0..k {
                mean[a] = form.mean0[a];
            }
            if let (Some(mx), Some(x)) = (&form.mean_x, self.covariate.get(i)) {
                for a in 0..k {
                    mean[a] += mx[a] * x;
                }
            }
            let lo = &cache.loadings[i * p * j * 3..(i + 1) * p * j * 3];
            let z = &self.values[i * p * j..(i + 1) * p * j];
            gvec[..k].fill(0.0);
            let mut q0 = 0.0;
            for w in 0..j {
                for u in 0..p {
                    let l = &lo[(u * j + w) * 3..(u * j + w) * 3 + 3];
                    let m = &mean[3 * u..3 * u + 3];
                    res[u] = z[u * j + w] - (l[0] * m[0] + l[1] * m[1] + l[2] * m[2]);
                }
                for u in 0..p {
                    let mut s = 0.0;
                    for v in 0..p {
                        s += cache.rinv[u * p + v] * res[v];
                    }
                    rz[u] = s;
                    q0 += res[u] * s;
                }
                for u in 0..p {
                    let l = &lo[(u * j + w) * 3..(u * j + w) * 3 + 3];
                    for a in 0..3 {
                        gvec[3 * u + a] += l[a] * rz[u];
                    }
                }
            }
            let g = &cache.gram[i * k * k..(i + 1) * k * k];
            let (logdet_core, reduction) = match &cinv {
                Some(ci) => {
                    for idx in 0..k * k {
                        work[idx] = ci[idx] + g[idx];
                    }
                    let Some(ld) = cholesky_in_place(&mut work[..k * k], k) else {
                        return f64::NEG_INFINITY;
                    };
                    let mut wv = gvec;
                    forward_solve_in_place(&work[..k * k], k, &mut wv[..k]);
                    let red: f64 = wv[..k].iter().map(|x| x * x).sum();
                    (logdet_c + ld, red)
                }
                None => {
                    // M = I + Fᵀ G F
                    for a in 0..k {
                        for b in 0..k {
                            let mut s = 0.0;
                            for c in 0..k {
                                s += g[a * k + c] * fmat[c * k + b];
                            }
                            tmp[a * k + b] = s;
                        }
                    }
                    for a in 0..k {
                        for b in 0..k {
                            let mut s = if a == b { 1.0 } else { 0.0 };
                            for c in 0..k {
                                s += fmat[c * k + a] * tmp[c * k + b];
                            }
                            work[a * k + b] = s;
                        }
                    }
                    let Some(ld) = cholesky_in_place(&mut work[..k * k], k) else {
                        return f64::NEG_INFINITY;
                    };
                    let mut wv = [0.0; MAX_K];
                    for a in 0..k {
                        let mut s = 0.0;
                        for c in 0..k {
                            s += fmat[c * k + a] * gvec[c];
                        }
                        wv[a] = s;
                    }
                    forward_solve_in_place(&work[..k * k], k, &mut wv[..k]);
                    let red: f64 = wv[..k].iter().map(|x| x * x).sum();
                    (ld, red)
                }
            };
            let quad = q0 - reduction;
            total += -0.5 * (d * (2.0 * PI).ln() + cache.logdet_theta + logdet_core + quad);
        }
        if let Some((mu, phi)) = form.covariate {
            if !(phi > 0.0) || !mu.is_finite() {
                return f64::NEG_INFINITY;
            }
            let lp = phi.ln();
            for &x in &self.covariate {
                total += -0.5 * ((2.0 * PI).ln() + lp + (x - mu) * (x - mu) / phi);
            }
        }
        if total.is_finite() {
            total
        } else {
            f64::NEG_INFINITY
        }
    }
}

//! Direct, indirect and total effects of the covariate on the outcome
//! growth factors, derived growth-factor means, and their delta-method
//! standard errors.
//!
//! Every derived quantity is a sum of products of free parameters, so it is
//! represented as a list of monomials over indices into the natural
//! parameter vector. Values and gradients follow directly from that form.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::psd_factor;
use crate::model::params::FACTOR_NAMES;
use crate::model::{layout, reduced_form, GrowthFactorMoments, ModelKind, Params, Process};

/// Two-sided 95% normal quantile used for every Wald interval.
pub const Z_95: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Direct,
    Indirect,
    Total,
    /// Marginal growth-factor mean.
    Mean,
}

/// Product of the natural parameters at `factors`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub factors: Vec<usize>,
}

impl Monomial {
    fn value(&self, theta: &[f64]) -> f64 {
        self.factors.iter().map(|&i| theta[i]).product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectDefinition {
    pub label: String,
    pub kind: EffectKind,
    pub terms: Vec<Monomial>,
}

impl EffectDefinition {
    pub fn value(&self, theta: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.value(theta)).sum()
    }

    /// Dense gradient with respect to the natural parameter vector.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        for t in &self.terms {
            for (pos, &i) in t.factors.iter().enumerate() {
                let others: f64 = t
                    .factors
                    .iter()
                    .enumerate()
                    .filter(|&(q, _)| q != pos)
                    .map(|(_, &j)| theta[j])
                    .product();
                g[i] += others;
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub label: String,
    pub kind: EffectKind,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

struct Index {
    names: Vec<String>,
}

impl Index {
    fn new(kind: ModelKind) -> Self {
        Self {
            names: layout(kind).into_iter().map(|(n, _)| n).collect(),
        }
    }
    fn at(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }
    fn tri(&self, stem: &str, to: usize, from: usize) -> usize {
        self.at(&format!("{stem}{}{}", FACTOR_NAMES[from], FACTOR_NAMES[to]))
    }
}

fn mono(factors: &[usize]) -> Monomial {
    Monomial {
        factors: factors.to_vec(),
    }
}

fn gf(p: char, k: usize) -> String {
    format!("{p}{}", FACTOR_NAMES[k])
}

/// Direct, indirect and total effects in catalog order: direct paths
/// first, then the indirect paths grouped by putative mediator factor,
/// then totals per outcome growth factor.
pub fn effect_catalog(kind: ModelKind) -> Vec<EffectDefinition> {
    let ix = Index::new(kind);
    let mut out = Vec::new();
    match kind {
        ModelKind::Univariate(_) => {}
        ModelKind::Model1 => {
            for k in 0..3 {
                out.push(EffectDefinition {
                    label: format!("x->{}", gf('m', k)),
                    kind: EffectKind::Direct,
                    terms: vec![mono(&[ix.at(&format!("b_xm{}", FACTOR_NAMES[k]))])],
                });
            }
            for r in 0..3 {
                out.push(EffectDefinition {
                    label: format!("x->{}", gf('y', r)),
                    kind: EffectKind::Direct,
                    terms: vec![mono(&[ix.at(&format!("b_xy{}", FACTOR_NAMES[r]))])],
                });
            }
            for k in 0..3 {
                for r in k..3 {
                    out.push(EffectDefinition {
                        label: format!("{}->{}", gf('m', k), gf('y', r)),
                        kind: EffectKind::Direct,
                        terms: vec![mono(&[ix.tri("b_my", r, k)])],
                    });
                }
            }
            let a = |k: usize| ix.at(&format!("b_xm{}", FACTOR_NAMES[k]));
            for k in 0..3 {
                for r in k..3 {
                    out.push(EffectDefinition {
                        label: format!("x->{}->{}", gf('m', k), gf('y', r)),
                        kind: EffectKind::Indirect,
                        terms: vec![mono(&[a(k), ix.tri("b_my", r, k)])],
                    });
                }
            }
            for r in 0..3 {
                let mut terms = vec![mono(&[ix.at(&format!("b_xy{}", FACTOR_NAMES[r]))])];
                for k in 0..=r {
                    terms.push(mono(&[a(k), ix.tri("b_my", r, k)]));
                }
                out.push(EffectDefinition {
                    label: format!("total(x->{})", gf('y', r)),
                    kind: EffectKind::Total,
                    terms,
                });
            }
        }
        ModelKind::Model2 => {
            for (stem, from, to) in [("b_xm", 'x', 'm'), ("b_xy", 'x', 'y'), ("b_my", 'm', 'y')] {
                for s in 0..3 {
                    for r in s..3 {
                        out.push(EffectDefinition {
                            label: format!("{}->{}", gf(from, s), gf(to, r)),
                            kind: EffectKind::Direct,
                            terms: vec![mono(&[ix.tri(stem, r, s)])],
                        });
                    }
                }
            }
            for k in 0..3 {
                for s in 0..=k {
                    for r in k..3 {
                        out.push(EffectDefinition {
                            label: format!("{}->{}->{}", gf('x', s), gf('m', k), gf('y', r)),
                            kind: EffectKind::Indirect,
                            terms: vec![mono(&[ix.tri("b_xm", k, s), ix.tri("b_my", r, k)])],
                        });
                    }
                }
            }
            for s in 0..3 {
                for r in s..3 {
                    let mut terms = vec![mono(&[ix.tri("b_xy", r, s)])];
                    for k in s..=r {
                        terms.push(mono(&[ix.tri("b_xm", k, s), ix.tri("b_my", r, k)]));
                    }
                    out.push(EffectDefinition {
                        label: format!("total({}->{})", gf('x', s), gf('y', r)),
                        kind: EffectKind::Total,
                        terms,
                    });
                }
            }
        }
    }
    out
}

/// Marginal growth-factor means of every modelled process as polynomials
/// in the free parameters.
pub fn gf_mean_definitions(kind: ModelKind) -> Vec<EffectDefinition> {
    let ix = Index::new(kind);
    let mut out = Vec::new();
    let def = |label: String, terms: Vec<Monomial>| EffectDefinition {
        label,
        kind: EffectKind::Mean,
        terms,
    };
    match kind {
        ModelKind::Univariate(p) => {
            for k in 0..3 {
                let name = format!("mu_{}{}", p.label(), FACTOR_NAMES[k]);
                out.push(def(format!("mean_{}", gf(p.label(), k)), vec![mono(&[ix.at(&name)])]));
            }
        }
        ModelKind::Model1 => {
            let mu = ix.at("mu_x");
            let m_terms = |k: usize| {
                vec![
                    mono(&[ix.at(&format!("alpha_m{}", FACTOR_NAMES[k]))]),
                    mono(&[ix.at(&format!("b_xm{}", FACTOR_NAMES[k])), mu]),
                ]
            };
            for k in 0..3 {
                out.push(def(format!("mean_{}", gf('m', k)), m_terms(k)));
            }
            for r in 0..3 {
                let mut terms = vec![
                    mono(&[ix.at(&format!("alpha_y{}", FACTOR_NAMES[r]))]),
                    mono(&[ix.at(&format!("b_xy{}", FACTOR_NAMES[r])), mu]),
                ];
                for k in 0..=r {
                    let b = ix.tri("b_my", r, k);
                    for t in m_terms(k) {
                        let mut f = vec![b];
                        f.extend(t.factors);
                        terms.push(mono(&f));
                    }
                }
                out.push(def(format!("mean_{}", gf('y', r)), terms));
            }
        }
        ModelKind::Model2 => {
            let mux = |s: usize| ix.at(&format!("mu_x{}", FACTOR_NAMES[s]));
            for s in 0..3 {
                out.push(def(format!("mean_{}", gf('x', s)), vec![mono(&[mux(s)])]));
            }
            let m_terms = |k: usize| {
                let mut t = vec![mono(&[ix.at(&format!("alpha_m{}", FACTOR_NAMES[k]))])];
                for s in 0..=k {
                    t.push(mono(&[ix.tri("b_xm", k, s), mux(s)]));
                }
                t
            };
            for k in 0..3 {
                out.push(def(format!("mean_{}", gf('m', k)), m_terms(k)));
            }
            for r in 0..3 {
                let mut terms = vec![mono(&[ix.at(&format!("alpha_y{}", FACTOR_NAMES[r]))])];
                for s in 0..=r {
                    terms.push(mono(&[ix.tri("b_xy", r, s), mux(s)]));
                }
                for k in 0..=r {
                    let b = ix.tri("b_my", r, k);
                    for t in m_terms(k) {
                        let mut f = vec![b];
                        f.extend(t.factors);
                        terms.push(mono(&f));
                    }
                }
                out.push(def(format!("mean_{}", gf('y', r)), terms));
            }
        }
    }
    out
}

fn point_estimates(params: &Params, kind: EffectKind) -> Vec<EffectEstimate> {
    let theta = params.to_natural();
    effect_catalog(params.kind())
        .into_iter()
        .filter(|d| d.kind == kind)
        .map(|d| EffectEstimate {
            estimate: d.value(&theta),
            label: d.label,
            kind: d.kind,
            se: None,
            ci: None,
        })
        .collect()
}

/// Indirect effects (point values only).
pub fn indirect_effects(params: &Params) -> Vec<EffectEstimate> {
    point_estimates(params, EffectKind::Indirect)
}

/// Total effects (point values only).
pub fn total_effects(params: &Params) -> Vec<EffectEstimate> {
    point_estimates(params, EffectKind::Total)
}

pub fn direct_effects(params: &Params) -> Vec<EffectEstimate> {
    point_estimates(params, EffectKind::Direct)
}

/// `sqrt(∇gᵀ Σ ∇g)` for each definition; all `None` when `param_cov` is not
/// positive semi-definite.
pub fn delta_method_se(
    theta: &[f64],
    param_cov: &DMatrix<f64>,
    defs: &[EffectDefinition],
) -> Vec<Option<f64>> {
    if param_cov.nrows() != theta.len() || psd_factor(param_cov).is_none() {
        return vec![None; defs.len()];
    }
    defs.iter()
        .map(|d| {
            let g = d.gradient(theta);
            let nz: Vec<usize> = (0..g.len()).filter(|&i| g[i] != 0.0).collect();
            let mut v = 0.0;
            for &i in &nz {
                for &j in &nz {
                    v += g[i] * param_cov[(i, j)] * g[j];
                }
            }
            (v >= 0.0 && v.is_finite()).then(|| v.sqrt())
        })
        .collect()
}

/// Point estimates with delta-method SEs and Wald intervals.
pub fn estimate_all(
    theta: &[f64],
    param_cov: Option<&DMatrix<f64>>,
    defs: &[EffectDefinition],
) -> Vec<EffectEstimate> {
    let ses = match param_cov {
        Some(c) => delta_method_se(theta, c, defs),
        None => vec![None; defs.len()],
    };
    defs.iter()
        .zip(ses)
        .map(|(d, se)| {
            let est = d.value(theta);
            EffectEstimate {
                label: d.label.clone(),
                kind: d.kind,
                estimate: est,
                se,
                ci: se.map(|s| (est - Z_95 * s, est + Z_95 * s)),
            }
        })
        .collect()
}

/// Marginal moments of the mediator and outcome growth factors (and of
/// the covariate process for model 2).
pub fn conditional_gf_moments(params: &Params) -> Vec<(Process, GrowthFactorMoments)> {
    let joint = reduced_form(params);
    params
        .kind()
        .processes()
        .into_iter()
        .filter_map(|p| joint.process(p).map(|m| (p, m)))
        .collect()
}

//! Fit and Monte Carlo reports: JSON documents, flat CSV exports and a
//! plain-text summary laid out like a journal estimates table.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::dataset::num;
use crate::effects::{EffectEstimate, EffectKind};
use crate::error::{Error, Result};
use crate::estimation::{FitResult, FitStatus, ParameterEstimate, StartRecord};
use crate::model::{ModelKind, Process, FACTOR_NAMES};
use crate::simulation::{ConditionResult, PerformanceMetrics, Quantity};

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub model: String,
    pub n: usize,
    pub waves: usize,
    pub seed: u64,
    pub status: FitStatus,
    pub loglik: f64,
    pub grad_norm: f64,
    pub message: Option<String>,
    pub starts: Vec<StartRecord>,
    pub parameters: Vec<ParameterEstimate>,
    pub growth_factor_means: Vec<EffectEstimate>,
    pub direct_effects: Vec<EffectEstimate>,
    pub indirect_effects: Vec<EffectEstimate>,
    pub total_effects: Vec<EffectEstimate>,
}

pub fn model_label(kind: ModelKind) -> String {
    match kind {
        ModelKind::Univariate(p) => format!("univariate-{}", p.label()),
        k => k.number().to_string(),
    }
}

impl FitReport {
    pub fn new(fit: &FitResult, waves: usize, seed: u64) -> Self {
        let of = |k: EffectKind| fit.effects.iter().filter(|e| e.kind == k).cloned().collect();
        Self {
            model: model_label(fit.kind),
            n: fit.n,
            waves,
            seed,
            status: fit.status,
            loglik: fit.loglik,
            grad_norm: fit.grad_norm,
            message: fit.message.clone(),
            starts: fit.starts.clone(),
            parameters: fit.estimates.clone(),
            growth_factor_means: fit.gf_means.clone(),
            direct_effects: of(EffectKind::Direct),
            indirect_effects: of(EffectKind::Indirect),
            total_effects: of(EffectKind::Total),
        }
    }
}

/// Two-sided normal p-value of `estimate / se`.
pub fn p_value(estimate: f64, se: Option<f64>) -> Option<f64> {
    let se = se.filter(|s| *s > 0.0)?;
    let z = (estimate / se).abs();
    let normal = Normal::standard();
    Some(2.0 * (1.0 - normal.cdf(z)))
}

fn est_se(estimate: f64, se: Option<f64>) -> String {
    match se {
        Some(s) => format!("{estimate:.3} ({s:.3})"),
        None => format!("{estimate:.3} (NA)"),
    }
}

fn p_text(p: Option<f64>) -> String {
    match p {
        None => "NA".into(),
        Some(p) if p < 1e-4 => "<0.0001*".into(),
        Some(p) => format!("{p:.4}{}", if p < 0.05 { "*" } else { "" }),
    }
}

fn process_name(p: Process) -> &'static str {
    match p {
        Process::X => "Covariate process (x)",
        Process::M => "Mediator (m)",
        Process::Y => "Outcome (y)",
    }
}

/// Plain-text estimates table: growth-factor means and knots, unexplained
/// variances, then direct, indirect and total effects.
pub fn render_text(r: &FitReport) -> String {
    let mut s = String::new();
    let rule = "=".repeat(78);
    let _ = writeln!(s, "Model {} | n = {} | J = {} | seed = {}", r.model, r.n, r.waves, r.seed);
    let _ = writeln!(
        s,
        "status: {:?} | log-likelihood: {:.4} | max |gradient|: {:.2e} | starts: {}",
        r.status,
        r.loglik,
        r.grad_norm,
        r.starts.len()
    );
    if let Some(m) = &r.message {
        let _ = writeln!(s, "note: {m}");
    }
    let param = |name: &str| r.parameters.iter().find(|p| p.name == name);
    let procs: Vec<Process> = Process::ALL
        .into_iter()
        .filter(|p| param(&format!("knot_{}", p.label())).is_some())
        .collect();

    let table = |s: &mut String, title: &str, rows: Vec<(String, Vec<Option<(f64, Option<f64>)>>)>| {
        let _ = writeln!(s, "{rule}\n{title}\n{rule}");
        let mut head = format!("{:<14}", "Para.");
        for p in &procs {
            let _ = write!(head, "{:<32}", process_name(*p));
        }
        let _ = writeln!(s, "{}", head.trim_end());
        let mut sub = format!("{:<14}", "");
        for _ in &procs {
            let _ = write!(sub, "{:<22}{:<10}", "Est. (SE)", "P value");
        }
        let _ = writeln!(s, "{}", sub.trim_end());
        for (label, cells) in rows {
            let mut line = format!("{label:<14}");
            for c in cells {
                match c {
                    Some((e, se)) => {
                        let _ = write!(line, "{:<22}{:<10}", est_se(e, se), p_text(p_value(e, se)));
                    }
                    None => {
                        let _ = write!(line, "{:<22}{:<10}", "---", "---");
                    }
                }
            }
            let _ = writeln!(s, "{}", line.trim_end());
        }
    };

    let mean = |p: Process, k: usize| {
        let label = format!("mean_{}{}", p.label(), FACTOR_NAMES[k]);
        r.growth_factor_means
            .iter()
            .find(|e| e.label == label)
            .map(|e| (e.estimate, e.se))
    };
    let mut rows: Vec<(String, Vec<Option<(f64, Option<f64>)>>)> = (0..3)
        .map(|k| {
            (
                format!("mu_eta{}", FACTOR_NAMES[k]),
                procs.iter().map(|&p| mean(p, k)).collect(),
            )
        })
        .collect();
    rows.push((
        "gamma".into(),
        procs
            .iter()
            .map(|p| param(&format!("knot_{}", p.label())).map(|e| (e.estimate, e.se)))
            .collect(),
    ));
    table(&mut s, "Growth Factor Means", rows);

    let psi_name = |p: Process, k: usize| format!("psi_{}{}{}", p.label(), FACTOR_NAMES[k], FACTOR_NAMES[k]);
    let rows = (0..3)
        .map(|k| {
            (
                format!("psi_{}{}", FACTOR_NAMES[k], FACTOR_NAMES[k]),
                procs
                    .iter()
                    .map(|&p| param(&psi_name(p, k)).map(|e| (e.estimate, e.se)))
                    .collect(),
            )
        })
        .collect();
    table(&mut s, "Growth Factor (Unexplained) Variances", rows);

    for (title, list) in [
        ("Direct Effects", &r.direct_effects),
        ("Indirect Effects", &r.indirect_effects),
        ("Total Effects", &r.total_effects),
    ] {
        if list.is_empty() {
            continue;
        }
        let _ = writeln!(s, "{rule}\n{title}\n{rule}");
        let _ = writeln!(s, "{:<22}{:<22}{:<10}{}", "Path", "Est. (SE)", "P value", "95% CI");
        for e in list {
            let ci = e
                .ci
                .map(|(lo, hi)| format!("[{lo:.3}, {hi:.3}]"))
                .unwrap_or_else(|| "NA".into());
            let _ = writeln!(
                s,
                "{:<22}{:<22}{:<10}{}",
                e.label,
                est_se(e.estimate, e.se),
                p_text(p_value(e.estimate, e.se)),
                ci
            );
        }
    }
    let _ = writeln!(s, "{rule}\n* significant at the 0.05 level");
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn estimates_csv(reports: &[FitReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "parameter", "estimate", "se", "ci_lower", "ci_upper", "p_value"])?;
    for r in reports {
        for p in &r.parameters {
            w.write_record([
                r.model.clone(),
                p.name.clone(),
                num(p.estimate),
                opt(p.se),
                opt(p.ci.map(|c| c.0)),
                opt(p.ci.map(|c| c.1)),
                opt(p_value(p.estimate, p.se)),
            ])?;
        }
    }
    finish(w)
}

pub fn effects_csv(reports: &[FitReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "kind", "label", "estimate", "se", "ci_lower", "ci_upper", "p_value"])?;
    for r in reports {
        let all = r
            .growth_factor_means
            .iter()
            .chain(&r.direct_effects)
            .chain(&r.indirect_effects)
            .chain(&r.total_effects);
        for e in all {
            let kind = serde_json::to_value(e.kind)?;
            w.write_record([
                r.model.clone(),
                kind.as_str().unwrap_or_default().to_string(),
                e.label.clone(),
                num(e.estimate),
                opt(e.se),
                opt(e.ci.map(|c| c.0)),
                opt(e.ci.map(|c| c.1)),
                opt(p_value(e.estimate, e.se)),
            ])?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricRow {
    #[serde(flatten)]
    pub quantity: Quantity,
    #[serde(flatten)]
    pub metrics: PerformanceMetrics,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub index: usize,
    pub spec: crate::simulation::ConditionSpec,
    pub successes: usize,
    pub attempts: usize,
    pub failures: usize,
    pub convergence_rate: f64,
    pub partial: bool,
    pub metrics: Vec<MetricRow>,
}

impl ConditionReport {
    pub fn new(index: usize, r: &ConditionResult) -> Self {
        Self {
            index,
            spec: r.spec.clone(),
            successes: r.successes,
            attempts: r.attempts,
            failures: r.failures,
            convergence_rate: r.convergence_rate,
            partial: r.partial,
            metrics: r
                .quantities
                .iter()
                .zip(&r.metrics)
                .map(|(q, m)| MetricRow {
                    quantity: q.clone(),
                    metrics: m.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub model: u8,
    pub seed: u64,
    pub estimator: String,
    pub conditions: Vec<ConditionReport>,
}

pub fn condition_metrics_csv(r: &ConditionReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label", "group", "truth", "relative", "bias", "empirical_se", "rmse", "coverage", "mc_se_bias", "mean_se",
    ])?;
    for m in &r.metrics {
        let group = serde_json::to_value(m.quantity.group)?;
        w.write_record([
            m.quantity.label.clone(),
            group.as_str().unwrap_or_default().to_string(),
            num(m.quantity.truth),
            m.metrics.relative.to_string(),
            num(m.metrics.bias),
            num(m.metrics.empirical_se),
            num(m.metrics.rmse),
            num(m.metrics.coverage),
            num(m.metrics.mc_se_bias),
            opt(m.metrics.mean_se),
        ])?;
    }
    finish(w)
}

/// Every replicate's estimates in long format.
pub fn replicates_csv(r: &ConditionResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["replication", "label", "estimate", "se", "ci_lower", "ci_upper"])?;
    for rep in &r.replicates {
        for (q, e) in r.quantities.iter().zip(&rep.estimates) {
            w.write_record([
                rep.index.to_string(),
                q.label.clone(),
                num(e.estimate),
                opt(e.se),
                opt(e.ci.map(|c| c.0)),
                opt(e.ci.map(|c| c.1)),
            ])?;
        }
    }
    finish(w)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median and range of each metric across conditions, per quantity.
pub fn grid_summary_csv(report: &McReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "metric", "conditions", "median", "min", "max"])?;
    let Some(first) = report.conditions.iter().find(|c| !c.metrics.is_empty()) else {
        return finish(w);
    };
    type Getter = fn(&PerformanceMetrics) -> f64;
    let metrics: [(&str, Getter); 4] = [
        ("bias", |m| m.bias),
        ("empirical_se", |m| m.empirical_se),
        ("rmse", |m| m.rmse),
        ("coverage", |m| m.coverage),
    ];
    for row in &first.metrics {
        let label = &row.quantity.label;
        for (name, get) in metrics {
            let vals: Vec<f64> = report
                .conditions
                .iter()
                .filter_map(|c| c.metrics.iter().find(|m| &m.quantity.label == label))
                .map(|m| get(&m.metrics))
                .collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            w.write_record([
                label.clone(),
                name.to_string(),
                vals.len().to_string(),
                num(median(vals)),
                num(lo),
                num(hi),
            ])?;
        }
    }
    finish(w)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

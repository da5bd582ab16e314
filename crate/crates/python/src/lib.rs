//! Python bindings: datasets, simulation, fitting and effect
//! decomposition.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::blsmed::effects::{effect_catalog, EffectEstimate, EffectKind};
use ::blsmed::estimation::{self, FitOptions};
use ::blsmed::io::{read_dataset, write_dataset};
use ::blsmed::model::{bilinear_loadings, ModelKind, Params, Process};
use ::blsmed::simulation::{
    generate_dataset, population_params, replication_rng, ConditionSpec, Scenario, Shape,
};

fn err(e: ::blsmed::Error) -> PyErr {
    match e {
        ::blsmed::Error::Io { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn kind_of(model: &str) -> PyResult<ModelKind> {
    match model {
        "1" => Ok(ModelKind::Model1),
        "2" => Ok(ModelKind::Model2),
        m => m
            .strip_prefix("univariate-")
            .and_then(|p| p.chars().next())
            .and_then(Process::from_label)
            .map(ModelKind::Univariate)
            .ok_or_else(|| PyValueError::new_err(format!("unknown model `{m}`"))),
    }
}

/// A balanced longitudinal panel.
#[pyclass(module = "blsmed", frozen)]
struct Dataset {
    inner: ::blsmed::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: read_dataset(&path).map_err(err)?,
        })
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        write_dataset(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn waves(&self) -> usize {
        self.inner.waves()
    }

    #[getter]
    fn processes(&self) -> Vec<String> {
        self.inner.processes().iter().map(|p| p.label().to_string()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, waves={}, processes={:?})",
            self.inner.n(),
            self.inner.waves(),
            self.processes()
        )
    }
}

type Row = (String, String, f64, Option<f64>, Option<(f64, f64)>);

fn effect_rows(list: &[EffectEstimate]) -> Vec<Row> {
    list.iter()
        .map(|e| {
            let kind = match e.kind {
                EffectKind::Direct => "direct",
                EffectKind::Indirect => "indirect",
                EffectKind::Total => "total",
                EffectKind::Mean => "mean",
            };
            (kind.to_string(), e.label.clone(), e.estimate, e.se, e.ci)
        })
        .collect()
}

/// Result of a maximum-likelihood fit.
#[pyclass(module = "blsmed", frozen)]
struct FitResult {
    inner: estimation::FitResult,
}

#[pymethods]
impl FitResult {
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged()
    }

    #[getter]
    fn loglik(&self) -> f64 {
        self.inner.loglik
    }

    #[getter]
    fn grad_norm(&self) -> f64 {
        self.inner.grad_norm
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.estimates.iter().map(|e| e.name.clone()).collect()
    }

    /// Natural-scale estimates in canonical order.
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.params.to_natural()
    }

    /// `{name: (estimate, se, (lower, upper))}`.
    #[getter]
    fn estimates(&self) -> HashMap<String, (f64, Option<f64>, Option<(f64, f64)>)> {
        self.inner
            .estimates
            .iter()
            .map(|e| (e.name.clone(), (e.estimate, e.se, e.ci)))
            .collect()
    }

    /// `(kind, label, estimate, se, ci)` rows for every effect and
    /// growth-factor mean.
    #[getter]
    fn effects(&self) -> Vec<Row> {
        let mut rows = effect_rows(&self.inner.effects);
        rows.extend(effect_rows(&self.inner.gf_means));
        rows
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(status={:?}, loglik={:.4}, parameters={})",
            self.inner.status,
            self.inner.loglik,
            self.inner.estimates.len()
        )
    }
}

/// Fits model "1", "2" or "univariate-<process>".
#[pyfunction]
#[pyo3(signature = (data, model, seed = 0, max_starts = 10))]
fn fit(py: Python<'_>, data: &Dataset, model: &str, seed: u64, max_starts: usize) -> PyResult<FitResult> {
    let kind = kind_of(model)?;
    let options = FitOptions {
        seed,
        max_starts,
        ..FitOptions::default()
    };
    let inner = py
        .detach(|| estimation::fit(&data.inner, kind, &options))
        .map_err(err)?;
    Ok(FitResult { inner })
}

/// Simulates one dataset; returns it with the generating parameters.
#[pyfunction]
#[pyo3(signature = (model, n, waves, knots, theta = 1.0, scenario = "medium", seed = 0, residual_correlation = 0.3))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    model: u8,
    n: usize,
    waves: usize,
    knots: Vec<f64>,
    theta: f64,
    scenario: &str,
    seed: u64,
    residual_correlation: f64,
) -> PyResult<(Dataset, Vec<(String, f64)>)> {
    let scenario = match scenario {
        "zero" => Scenario::Zero,
        "medium" => Scenario::Medium,
        "substantial" => Scenario::Substantial,
        s => return Err(PyValueError::new_err(format!("unknown scenario `{s}`"))),
    };
    let spec = ConditionSpec {
        model,
        n,
        waves,
        knots,
        theta,
        residual_correlation,
        scenario,
        shape: Shape::Deceleration,
        reps: 2,
        seed,
        jitter: 0.25,
        max_attempts: None,
        temporal_order: false,
    };
    let truth = population_params(&spec).map_err(err)?;
    let data = generate_dataset(&truth, n, waves, spec.jitter, &mut replication_rng(seed, 0)).map_err(err)?;
    let params = truth.names().into_iter().zip(truth.to_natural()).collect();
    Ok((Dataset { inner: data }, params))
}

/// Parameter names of a model in canonical order.
#[pyfunction]
fn parameter_names(model: &str) -> PyResult<Vec<String>> {
    Ok(::blsmed::model::layout(kind_of(model)?)
        .into_iter()
        .map(|(n, _)| n)
        .collect())
}

/// FIML log-likelihood at natural-scale `values`.
#[pyfunction]
fn loglik(data: &Dataset, model: &str, values: Vec<f64>) -> PyResult<f64> {
    let params = Params::from_natural(kind_of(model)?, &values).map_err(err)?;
    Ok(estimation::fiml_loglik(&params, &data.inner))
}

/// Indirect and total effects at natural-scale `values`.
#[pyfunction]
fn effects(model: &str, values: Vec<f64>) -> PyResult<Vec<(String, String, f64)>> {
    let kind = kind_of(model)?;
    Params::from_natural(kind, &values).map_err(err)?;
    Ok(effect_catalog(kind)
        .into_iter()
        .filter(|d| d.kind != EffectKind::Direct)
        .map(|d| {
            let kind = if d.kind == EffectKind::Indirect { "indirect" } else { "total" };
            (kind.to_string(), d.label.clone(), d.value(&values))
        })
        .collect())
}

/// Rows `(min(0, t − γ), 1, max(0, t − γ))` for each occasion.
#[pyfunction]
fn loadings(times: Vec<f64>, knot: f64) -> PyResult<Vec<[f64; 3]>> {
    let m = bilinear_loadings(&times, knot).map_err(err)?;
    Ok((0..m.nrows()).map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]).collect())
}

#[pymodule]
#[pyo3(name = "blsmed")]
fn blsmed_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(parameter_names, m)?)?;
    m.add_function(wrap_pyfunction!(loglik, m)?)?;
    m.add_function(wrap_pyfunction!(effects, m)?)?;
    m.add_function(wrap_pyfunction!(loadings, m)?)?;
    Ok(())
}

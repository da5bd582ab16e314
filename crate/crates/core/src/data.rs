//! In-memory longitudinal dataset: one row per individual with its own
//! measurement occasions for every process.

use crate::error::{Error, Result};
use crate::model::{MeasurementSchedule, ModelKind, Process};

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub id: String,
    pub covariate: Option<f64>,
    pub schedule: MeasurementSchedule,
    /// Observed values, one vector per process in schedule order.
    pub values: Vec<Vec<f64>>,
}

impl Individual {
    pub fn values_of(&self, p: Process) -> Option<&[f64]> {
        self.schedule
            .processes()
            .position(|q| q == p)
            .map(|i| self.values[i].as_slice())
    }
}

/// A balanced, complete panel.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    processes: Vec<Process>,
    has_covariate: bool,
    waves: usize,
    rows: Vec<Individual>,
}

impl Dataset {
    pub fn new(rows: Vec<Individual>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset has no rows".into()))?;
        let processes: Vec<Process> = first.schedule.processes().collect();
        let has_covariate = first.covariate.is_some();
        let waves = first.schedule.waves();
        for (i, r) in rows.iter().enumerate() {
            let row = i + 1;
            let procs: Vec<Process> = r.schedule.processes().collect();
            if procs != processes {
                return Err(Error::Validation {
                    row,
                    process: None,
                    message: "process set differs from the first row".into(),
                });
            }
            if r.covariate.is_some() != has_covariate {
                return Err(Error::Validation {
                    row,
                    process: None,
                    message: "covariate present in some rows only".into(),
                });
            }
            if r.covariate.is_some_and(|x| !x.is_finite()) {
                return Err(Error::Validation {
                    row,
                    process: None,
                    message: "covariate is not finite".into(),
                });
            }
            if r.schedule.waves() != waves {
                return Err(Error::Validation {
                    row,
                    process: None,
                    message: format!("expected {waves} waves, found {}", r.schedule.waves()),
                });
            }
            if r.values.len() != processes.len() {
                return Err(Error::Validation {
                    row,
                    process: None,
                    message: "value vectors do not match processes".into(),
                });
            }
            for (p, v) in processes.iter().zip(&r.values) {
                if v.len() != waves || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Validation {
                        row,
                        process: Some(p.label()),
                        message: "missing or non-finite observation".into(),
                    });
                }
            }
        }
        Ok(Self {
            processes,
            has_covariate,
            waves,
            rows,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn waves(&self) -> usize {
        self.waves
    }

    pub fn processes(&self) -> &[Process] {
        &self.processes
    }

    pub fn has_covariate(&self) -> bool {
        self.has_covariate
    }

    pub fn rows(&self) -> &[Individual] {
        &self.rows
    }

    /// Checks that the dataset carries what `kind` needs.
    pub fn check_model(&self, kind: ModelKind) -> Result<()> {
        for p in kind.processes() {
            if !self.processes.contains(&p) {
                return Err(Error::DimensionMismatch(format!(
                    "model {} needs process {p}, dataset has {:?}",
                    kind.number(),
                    self.processes
                )));
            }
        }
        if kind.has_covariate() && !self.has_covariate {
            return Err(Error::DimensionMismatch(
                "model 1 needs the baseline covariate column `x`".into(),
            ));
        }
        Ok(())
    }

    /// Restricts the dataset to what `kind` uses, in the model's process
    /// order.
    pub fn select(&self, kind: ModelKind) -> Result<Dataset> {
        self.check_model(kind)?;
        let procs = kind.processes();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let entries = procs
                    .iter()
                    .map(|&p| (p, r.schedule.times(p).unwrap().to_vec()))
                    .collect();
                let values = procs.iter().map(|&p| r.values_of(p).unwrap().to_vec()).collect();
                Ok(Individual {
                    id: r.id.clone(),
                    covariate: if kind.has_covariate() { r.covariate } else { None },
                    schedule: MeasurementSchedule::new(entries)?,
                    values,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(rows)
    }

    /// Pooled (min, max) of the observed times of one process.
    pub fn time_range(&self, p: Process) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in &self.rows {
            let t = r.schedule.times(p)?;
            lo = lo.min(t[0]);
            hi = hi.max(t[t.len() - 1]);
        }
        Some((lo, hi))
    }

    /// Rows sorted by id, ties broken by the numeric contents. Fitting in
    /// this order makes results independent of the input row order.
    pub fn canonical(&self) -> Dataset {
        let key = |r: &Individual| -> Vec<f64> {
            let mut k: Vec<f64> = r.covariate.into_iter().collect();
            for (i, (_, t)) in r.schedule.entries().iter().enumerate() {
                k.extend_from_slice(t);
                k.extend_from_slice(&r.values[i]);
            }
            k
        };
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&self.rows[a], &self.rows[b]);
            ra.id.cmp(&rb.id).then_with(|| {
                key(ra)
                    .iter()
                    .zip(key(rb).iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        self.permuted(&order)
    }

    pub fn permuted(&self, order: &[usize]) -> Dataset {
        Dataset {
            processes: self.processes.clone(),
            has_covariate: self.has_covariate,
            waves: self.waves,
            rows: order.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

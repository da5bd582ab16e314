use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A longitudinal process of a mediation model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    /// Covariate process (longitudinal covariate model only).
    X,
    /// Mediator process.
    M,
    /// Outcome process.
    Y,
}

impl Process {
    pub const ALL: [Process; 3] = [Process::X, Process::M, Process::Y];

    pub fn label(self) -> char {
        match self {
            Process::X => 'x',
            Process::M => 'm',
            Process::Y => 'y',
        }
    }

    pub fn from_label(c: char) -> Option<Self> {
        match c {
            'x' => Some(Process::X),
            'm' => Some(Process::M),
            'y' => Some(Process::Y),
            _ => None,
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Per-individual measurement occasions, one strictly increasing vector of
/// times per process. All processes share the same number of waves.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSchedule {
    entries: Vec<(Process, Vec<f64>)>,
}

impl MeasurementSchedule {
    pub fn new(entries: Vec<(Process, Vec<f64>)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("schedule has no processes".into()));
        }
        let waves = entries[0].1.len();
        for (i, (p, times)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(q, _)| q == p) {
                return Err(Error::InvalidInput(format!("process {p} listed twice")));
            }
            if times.len() != waves {
                return Err(Error::InvalidInput(format!(
                    "process {p} has {} occasions, expected {waves}",
                    times.len()
                )));
            }
            if times.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidInput(format!("process {p} has non-finite times")));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput(format!(
                    "process {p} occasions are not strictly increasing"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// The same time vector for every listed process.
    pub fn shared(processes: &[Process], times: Vec<f64>) -> Result<Self> {
        Self::new(processes.iter().map(|&p| (p, times.clone())).collect())
    }

    pub fn waves(&self) -> usize {
        self.entries[0].1.len()
    }

    pub fn processes(&self) -> impl Iterator<Item = Process> + '_ {
        self.entries.iter().map(|(p, _)| *p)
    }

    pub fn times(&self, p: Process) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, t)| t.as_slice())
    }

    pub fn entries(&self) -> &[(Process, Vec<f64>)] {
        &self.entries
    }
}

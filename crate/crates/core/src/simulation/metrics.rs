//! Monte Carlo performance measures of an estimator for one quantity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// When `relative` is false the truth is zero and `bias` and `rmse` are on
/// the absolute scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub bias: f64,
    pub empirical_se: f64,
    pub rmse: f64,
    pub coverage: f64,
    /// `sqrt(Var(θ̂)/S)` on the scale of the estimates.
    pub mc_se_bias: f64,
    /// Average of the available standard errors.
    pub mean_se: Option<f64>,
    pub relative: bool,
}

/// Relative bias `Σ(θ̂ₛ − θ)/(Sθ)`, empirical SE `sqrt(Σ(θ̂ₛ − θ̄)²/(S − 1))`,
/// relative RMSE `sqrt(Σ(θ̂ₛ − θ)²/S)/θ` and the share of intervals that
/// contain θ. A missing interval counts as not covering.
pub fn performance_metrics(
    estimates: &[f64],
    ses: &[Option<f64>],
    cis: &[Option<(f64, f64)>],
    truth: f64,
) -> Result<PerformanceMetrics> {
    let s = estimates.len();
    if s < 2 {
        return Err(Error::InvalidInput("need at least two replications".into()));
    }
    if ses.len() != s || cis.len() != s {
        return Err(Error::DimensionMismatch("estimates, SEs and CIs differ in length".into()));
    }
    let sf = s as f64;
    // shifted by the first estimate so that identical estimates give exactly 0
    let shift = estimates[0];
    let mean = estimates.iter().map(|e| e - shift).sum::<f64>() / sf;
    let var = estimates
        .iter()
        .map(|e| (e - shift - mean).powi(2))
        .sum::<f64>()
        / (sf - 1.0);
    let bias_sum: f64 = estimates.iter().map(|e| e - truth).sum();
    let rmse_abs = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / sf).sqrt();
    let relative = truth != 0.0;
    let (bias, rmse) = if relative {
        (bias_sum / (sf * truth), rmse_abs / truth)
    } else {
        (bias_sum / sf, rmse_abs)
    };
    let covered = cis
        .iter()
        .filter(|ci| ci.is_some_and(|(lo, hi)| lo <= truth && truth <= hi))
        .count();
    let avail: Vec<f64> = ses.iter().flatten().copied().collect();
    Ok(PerformanceMetrics {
        bias,
        empirical_se: var.sqrt(),
        rmse,
        coverage: covered as f64 / sf,
        mc_se_bias: (var / sf).sqrt(),
        mean_se: (!avail.is_empty()).then(|| avail.iter().sum::<f64>() / avail.len() as f64),
        relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_triple() {
        let m = performance_metrics(&[2.1, 2.2, 2.3], &[None; 3], &[None; 3], 2.0).unwrap();
        assert!((m.bias - 0.1).abs() < 1e-15);
        assert!((m.empirical_se - 0.1).abs() < 1e-15);
        assert!((m.rmse - (0.14_f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert!((m.rmse - 0.10801).abs() < 1e-5);
        assert_eq!(m.coverage, 0.0);
        assert!((m.mc_se_bias - (0.01_f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_estimates_are_perfect() {
        let ci = Some((1.5, 1.5));
        let m = performance_metrics(&[1.5; 4], &[Some(0.0); 4], &[ci; 4], 1.5).unwrap();
        assert_eq!((m.bias, m.empirical_se, m.rmse, m.coverage), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn half_coverage() {
        let cis = [Some((0.0, 2.0)), Some((2.0, 3.0)), Some((0.5, 1.5)), None];
        let m = performance_metrics(&[1.0; 4], &[None; 4], &cis, 1.0).unwrap();
        assert_eq!(m.coverage, 0.5);
    }

    #[test]
    fn zero_truth_reports_absolute_scale() {
        let m = performance_metrics(&[0.1, -0.3], &[None; 2], &[None; 2], 0.0).unwrap();
        assert!(!m.relative);
        assert!((m.bias + 0.1).abs() < 1e-15);
        assert!((m.rmse - 0.05_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_single_replication() {
        assert!(performance_metrics(&[1.0], &[None], &[None], 1.0).is_err());
    }
}

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One loading row `(min(0, t − γ), 1, max(0, t − γ))` for the growth
/// factors (first slope, knot measurement, second slope).
#[inline]
pub fn loading_row(t: f64, knot: f64) -> [f64; 3] {
    let d = t - knot;
    [d.min(0.0), 1.0, d.max(0.0)]
}

/// J×3 factor-loading matrix of a bilinear spline with knot `knot` at the
/// individual occasions `times`.
pub fn bilinear_loadings(times: &[f64], knot: f64) -> Result<DMatrix<f64>> {
    if !knot.is_finite() || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("loadings need finite times and knot".into()));
    }
    let mut l = DMatrix::zeros(times.len(), 3);
    for (j, &t) in times.iter().enumerate() {
        let row = loading_row(t, knot);
        for k in 0..3 {
            l[(j, k)] = row[k];
        }
    }
    Ok(l)
}

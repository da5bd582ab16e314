//! Small dense linear-algebra helpers shared by the likelihood, the
//! simulator and the standard-error code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Returns a factor `F` with `F Fᵀ = a` for a symmetric positive
/// semi-definite matrix. Uses Cholesky when possible (the factor is then
/// lower triangular) and falls back to an eigen decomposition with tiny
/// negative eigenvalues clipped to zero. `None` if `a` is materially
/// indefinite or contains non-finite entries.
pub fn psd_factor(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.l());
    }
    let eig = SymmetricEigen::new(a.clone());
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale) {
        return None;
    }
    let mut f = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    Some(f)
}

pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite()) && a.clone().cholesky().is_some()
}

pub fn is_positive_semidefinite(a: &DMatrix<f64>) -> bool {
    psd_factor(a).is_some()
}

/// Overwrites `a` with `(a + aᵀ)/2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// In-place Cholesky of a row-major `k×k` matrix stored in a slice; the
/// lower triangle is overwritten with the factor. Returns the log
/// determinant of the original matrix, or `None` if it is not positive
/// definite.
pub(crate) fn cholesky_in_place(a: &mut [f64], k: usize) -> Option<f64> {
    let mut logdet = 0.0;
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= a[j * k + p] * a[j * k + p];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        logdet += 2.0 * d.ln();
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= a[i * k + p] * a[j * k + p];
            }
            a[i * k + j] = s / d;
        }
    }
    Some(logdet)
}

/// Solves `L z = b` in place for a lower factor produced by
/// [`cholesky_in_place`].
pub(crate) fn forward_solve_in_place(l: &[f64], k: usize, b: &mut [f64]) {
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * k + p] * b[p];
        }
        b[i] = s / l[i * k + i];
    }
}

pub fn quad_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (x.transpose() * a * x)[(0, 0)]
}

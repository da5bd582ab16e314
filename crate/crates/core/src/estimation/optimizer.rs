//! Quasi-Newton minimization with central-difference derivatives.

use nalgebra::{DMatrix, DVector};

/// Relative step used for central-difference gradients.
pub const GRAD_STEP: f64 = 1e-5;

pub fn gradient_steps(x: &[f64], rel: f64) -> Vec<f64> {
    x.iter().map(|v| rel * v.abs().max(1.0)).collect()
}

/// Central-difference gradient with per-coordinate steps; `None` if any
/// evaluation is not finite.
pub fn central_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], steps: &[f64]) -> Option<Vec<f64>> {
    let mut xp = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = steps[i];
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return None;
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    Some(g)
}

/// Central-difference Hessian from function values; `None` if any
/// evaluation is not finite.
pub fn central_hessian<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], steps: &[f64]) -> Option<DMatrix<f64>> {
    let k = x.len();
    let f0 = f(x);
    if !f0.is_finite() {
        return None;
    }
    let mut h = DMatrix::zeros(k, k);
    let mut xp = x.to_vec();
    for i in 0..k {
        let hi = steps[i];
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return None;
        }
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64, xp: &mut Vec<f64>| {
                xp[i] = x[i] + si * hi;
                xp[j] = x[j] + sj * hj;
                let v = f(xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let fpp = eval(1.0, 1.0, &mut xp);
            let fpm = eval(1.0, -1.0, &mut xp);
            let fmp = eval(-1.0, 1.0, &mut xp);
            let fmm = eval(-1.0, -1.0, &mut xp);
            if ![fpp, fpm, fmp, fmm].iter().all(|v| v.is_finite()) {
                return None;
            }
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Some(h)
}

#[derive(Clone, Debug)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Infinity-norm gradient tolerance.
    pub grad_tol: f64,
    /// Newton iterations attempted when quasi-Newton stalls.
    pub polish_iter: usize,
    /// Seed the inverse-Hessian approximation with a finite-difference
    /// Hessian at the start point (when positive definite).
    pub initial_hessian: bool,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-6,
            polish_iter: 8,
            initial_hessian: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Backtracking Armijo search along `d`; returns the accepted step and
/// objective value.
fn line_search<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    d: &[f64],
    slope: f64,
    alpha0: f64,
) -> Option<(f64, f64)> {
    let mut alpha = alpha0;
    let mut trial = vec![0.0; x.len()];
    // Near the optimum the predicted decrease drops below the rounding
    // level of f; allow for it so the gradient can still be driven down.
    let noise = 1e-13 * fx.abs().max(1.0);
    for _ in 0..40 {
        for i in 0..x.len() {
            trial[i] = x[i] + alpha * d[i];
        }
        let ft = f(&trial);
        if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope + noise {
            return Some((alpha, ft));
        }
        let next = if ft.is_finite() {
            // minimizer of the quadratic through fx, slope and ft
            let q = -slope * alpha * alpha / (2.0 * (ft - fx - slope * alpha));
            q.clamp(0.1 * alpha, 0.5 * alpha)
        } else {
            0.25 * alpha
        };
        alpha = next;
        if alpha < 1e-16 {
            break;
        }
    }
    None
}

/// Minimizes `f` with BFGS (inverse-Hessian form) and falls back to damped
/// Newton steps on a finite-difference Hessian when BFGS stalls short of
/// the gradient tolerance.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], opts: &OptimOptions) -> OptimOutcome {
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let fail = |x: Vec<f64>, fx: f64| OptimOutcome {
        x,
        f: fx,
        grad: vec![f64::NAN; k],
        grad_norm: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    if !fx.is_finite() {
        return fail(x, fx);
    }
    let Some(mut g) = central_gradient(f, &x, &gradient_steps(&x, GRAD_STEP)) else {
        return fail(x, fx);
    };
    let mut hinv = DMatrix::<f64>::identity(k, k);
    let mut fresh = true;
    if opts.initial_hessian {
        if let Some(inv) = central_hessian(f, &x, &gradient_steps(&x, 1e-4))
            .and_then(|h| ((&h + h.transpose()) * 0.5).cholesky())
            .map(|c| c.inverse())
        {
            hinv = inv;
            fresh = false;
        }
    }
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if inf_norm(&g) < opts.grad_tol {
            break;
        }
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&hinv * &gv)).iter().copied().collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            hinv = DMatrix::identity(k, k);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let alpha0 = if fresh { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let Some((alpha, fnew)) = line_search(f, &x, fx, &d, slope, alpha0) else {
            if fresh {
                break;
            }
            hinv = DMatrix::identity(k, k);
            fresh = true;
            continue;
        };
        let xnew: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
        let Some(gnew) = central_gradient(f, &xnew, &gradient_steps(&xnew, GRAD_STEP)) else {
            break;
        };
        let s = DVector::from_iterator(k, xnew.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(k, gnew.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            hinv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        x = xnew;
        fx = fnew;
        g = gnew;
    }

    if inf_norm(&g) >= opts.grad_tol {
        newton_polish(f, &mut x, &mut fx, &mut g, opts);
    }
    let grad_norm = inf_norm(&g);
    OptimOutcome {
        converged: grad_norm < opts.grad_tol && fx.is_finite(),
        x,
        f: fx,
        grad: g,
        grad_norm,
        iterations,
    }
}

fn newton_polish<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &mut Vec<f64>,
    fx: &mut f64,
    g: &mut Vec<f64>,
    opts: &OptimOptions,
) {
    let k = x.len();
    for _ in 0..opts.polish_iter {
        if inf_norm(g) < opts.grad_tol {
            return;
        }
        let Some(h) = central_hessian(f, x, &gradient_steps(x, 1e-4)) else {
            return;
        };
        let gv = DVector::from_column_slice(g);
        let scale = h.diagonal().iter().fold(1e-8_f64, |m, v| m.max(v.abs()));
        let mut ridge = 0.0;
        let mut improved = false;
        for _ in 0..12 {
            let mut hr = h.clone();
            for i in 0..k {
                hr[(i, i)] += ridge;
            }
            if let Some(ch) = hr.cholesky() {
                let d: Vec<f64> = (-ch.solve(&gv)).iter().copied().collect();
                let slope: f64 = d.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
                if slope < 0.0 {
                    if let Some((alpha, fnew)) = line_search(f, x, *fx, &d, slope, 1.0) {
                        let xnew: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                        if let Some(gnew) = central_gradient(f, &xnew, &gradient_steps(&xnew, GRAD_STEP)) {
                            *x = xnew;
                            *fx = fnew;
                            *g = gnew;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            ridge = if ridge == 0.0 { 1e-6 * scale } else { ridge * 10.0 };
        }
        if !improved {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(&mut f, &[-1.2, 1.0], &OptimOptions::default());
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-5);
        assert!((out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn hessian_of_quadratic() {
        let mut f = |x: &[f64]| 2.0 * x[0] * x[0] + 3.0 * x[0] * x[1] + 0.5 * x[1] * x[1];
        let h = central_hessian(&mut f, &[0.3, -0.2], &[1e-4, 1e-4]).unwrap();
        assert!((h[(0, 0)] - 4.0).abs() < 1e-6);
        assert!((h[(0, 1)] - 3.0).abs() < 1e-6);
        assert!((h[(1, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_start_is_not_converged() {
        let mut f = |_: &[f64]| f64::INFINITY;
        let out = minimize(&mut f, &[0.0], &OptimOptions::default());
        assert!(!out.converged);
    }
}

mod common;

use blsmed::effects::{delta_method_se, effect_catalog, gf_mean_definitions, EffectKind};
use blsmed::model::{implied_individual_moments, reduced_form, MeasurementSchedule};
use blsmed::simulation::{
    generate_dataset, generate_schedule, performance_metrics, population_params, r2_to_coefficient,
    replication_rng, ConditionSpec, Scenario, Shape,
};
use blsmed::{fiml_loglik, ModelKind, Params, Process};
use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(model: u8, theta: f64, scenario: Scenario) -> ConditionSpec {
    ConditionSpec {
        model,
        n: 100,
        waves: 10,
        knots: if model == 1 { vec![4.5, 4.5] } else { vec![4.5, 4.5, 4.5] },
        theta,
        residual_correlation: 0.3,
        scenario,
        shape: Shape::Deceleration,
        reps: 2,
        seed: 0,
        jitter: 0.25,
        max_attempts: None,
        temporal_order: false,
    }
}

#[test]
fn loglik_matches_dense_density_for_every_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in all_kinds() {
        for n in 1..=4 {
            let p = random_params(kind, &mut rng);
            let d = random_dataset(kind, n, 5, &mut rng);
            let fast = fiml_loglik(&p, &d);
            let slow = naive_loglik(&p, &d);
            assert!((fast - slow).abs() < 1e-8, "{kind:?}: {fast} vs {slow}");
        }
    }
}

#[test]
fn loglik_on_knot_occasion_agrees_with_both_branches() {
    // an occasion exactly at the knot loads (0, 1, 0) either way
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kind = ModelKind::Univariate(Process::Y);
    let Params::Univariate(mut p) = random_params(kind, &mut rng) else {
        unreachable!()
    };
    p.knot = 2.0;
    let p = Params::Univariate(p);
    let d = random_dataset(kind, 3, 5, &mut rng);
    let rows: Vec<_> = d
        .rows()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.schedule = MeasurementSchedule::shared(&[Process::Y], vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
            r
        })
        .collect();
    let d = blsmed::Dataset::new(rows).unwrap();
    assert!((fiml_loglik(&p, &d) - naive_loglik(&p, &d)).abs() < 1e-8);
}

#[test]
fn reduced_form_matches_forward_substitution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in all_kinds() {
        for _ in 0..20 {
            let p = random_params(kind, &mut rng);
            let joint = reduced_form(&p);
            let (mean, cov) = sequential_moments(&p);
            assert!((&joint.mean - mean).amax() < 1e-10);
            assert!((&joint.cov - cov).amax() < 1e-10);
        }
    }
}

#[test]
fn implied_moments_match_branch_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for kind in all_kinds() {
        let p = random_params(kind, &mut rng);
        let d = random_dataset(kind, 3, 6, &mut rng);
        for row in d.rows() {
            let m = implied_individual_moments(&p, &row.schedule).unwrap();
            let (mean, cov) = naive_individual_moments(&p, row);
            assert!((m.mean - mean).amax() < 1e-10);
            assert!((m.cov - cov).amax() < 1e-10);
        }
    }
}

/// Kolmogorov–Smirnov statistic against the uniform law on (lo, hi).
fn ks_uniform(mut v: Vec<f64>, lo: f64, hi: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = (x - lo) / (hi - lo);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn jittered_occasions_are_uniform_in_their_window() {
    let mut rng = replication_rng(17, 0);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| {
            let s = generate_schedule(6, 0.25, &[Process::Y], &mut rng).unwrap();
            s.times(Process::Y).unwrap()[3]
        })
        .collect();
    let d = ks_uniform(draws, 2.75, 3.25);
    // asymptotic critical value at α = 0.01
    assert!(d < 1.6276 / (100_000f64).sqrt(), "D = {d}");
}

fn sample_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

#[test]
fn generated_paths_explain_the_declared_share() {
    // With no measurement noise the first slope is read off the first two
    // occasions, which both precede the knot.
    let truth = population_params(&spec(1, 0.0, Scenario::Medium)).unwrap();
    let mut rng = replication_rng(23, 0);
    let d = generate_dataset(&truth, 100_000, 10, 0.0, &mut rng).unwrap();
    let x: Vec<f64> = d.rows().iter().map(|r| r.covariate.unwrap()).collect();
    let slope: Vec<f64> = d
        .rows()
        .iter()
        .map(|r| {
            let v = r.values_of(Process::M).unwrap();
            v[1] - v[0]
        })
        .collect();
    let r2 = sample_r2(&x, &slope);
    assert!((r2 - 0.13).abs() < 0.02, "R² = {r2}");
    assert!((r2_to_coefficient(0.13, 1.0, 1.0).unwrap() - 0.13f64.sqrt()).abs() < 1e-15);
}

#[test]
fn residual_correlation_matches_design() {
    // Zero growth-factor variance leaves only residuals around the mean curve.
    let Params::Model1(mut truth) = population_params(&spec(1, 1.0, Scenario::Zero)).unwrap() else {
        unreachable!()
    };
    truth.phi_x = 0.0;
    truth.psi_m *= 0.0;
    truth.psi_y *= 0.0;
    let truth = Params::Model1(truth);
    let mut rng = replication_rng(29, 0);
    let d = generate_dataset(&truth, 100_000, 3, 0.0, &mut rng).unwrap();
    let joint = reduced_form(&truth);
    let knots = truth.knots();
    let curve = |o: usize, t: f64, k: f64| {
        let l = branch_loading(t, k);
        l[0] * joint.mean[o] + l[1] * joint.mean[o + 1] + l[2] * joint.mean[o + 2]
    };
    let (mut em, mut ey) = (Vec::new(), Vec::new());
    for r in d.rows() {
        em.push(r.values_of(Process::M).unwrap()[1] - curve(1, 1.0, knots[0]));
        ey.push(r.values_of(Process::Y).unwrap()[1] - curve(4, 1.0, knots[1]));
    }
    let rho = sample_r2(&em, &ey).sqrt();
    assert!((rho - 0.3).abs() < 0.02, "ρ = {rho}");
}

#[test]
fn metrics_match_direct_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let s = rng.random_range(2..50);
        let truth = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-3.0..3.0) };
        let est: Vec<f64> = (0..s).map(|_| truth + 0.1 + normal(&mut rng)).collect();
        let ses: Vec<Option<f64>> = (0..s)
            .map(|_| rng.random_bool(0.9).then(|| rng.random_range(0.5..1.5)))
            .collect();
        let cis: Vec<Option<(f64, f64)>> = est
            .iter()
            .zip(&ses)
            .map(|(e, se)| se.map(|s| (e - 1.96 * s, e + 1.96 * s)))
            .collect();
        let m = performance_metrics(&est, &ses, &cis, truth).unwrap();

        let sf = s as f64;
        let mean = est.iter().sum::<f64>() / sf;
        let var = est.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (sf - 1.0);
        let scale = if truth == 0.0 { 1.0 } else { truth };
        let bias = (mean - truth) / scale;
        let rmse = (est.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / sf).sqrt() / scale;
        let hits = cis
            .iter()
            .filter(|c| matches!(c, Some((lo, hi)) if *lo <= truth && truth <= *hi))
            .count();
        let present: Vec<f64> = ses.iter().flatten().copied().collect();
        assert!((m.bias - bias).abs() < 1e-12);
        assert!((m.empirical_se - var.sqrt()).abs() < 1e-12);
        assert!((m.rmse - rmse).abs() < 1e-12);
        assert!((m.mc_se_bias - (var / sf).sqrt()).abs() < 1e-12);
        assert_eq!(m.coverage, hits as f64 / sf);
        assert_eq!(m.relative, truth != 0.0);
        if !present.is_empty() {
            let ms = present.iter().sum::<f64>() / present.len() as f64;
            assert!((m.mean_se.unwrap() - ms).abs() < 1e-12);
        }
    }
}

#[test]
fn every_effect_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for kind in [ModelKind::Model1, ModelKind::Model2] {
        let theta = random_params(kind, &mut rng).to_natural();
        for def in effect_catalog(kind).iter().chain(&gf_mean_definitions(kind)) {
            let g = def.gradient(&theta);
            for i in 0..theta.len() {
                let h = 1e-6;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let fd = (def.value(&tp) - def.value(&tm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "{} d/d{i}: {} vs {fd}", def.label, g[i]);
            }
        }
    }
}

#[test]
fn mean_definitions_match_reduced_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for kind in [ModelKind::Model1, ModelKind::Model2] {
        let p = random_params(kind, &mut rng);
        let theta = p.to_natural();
        let (mean, _) = sequential_moments(&p);
        let lead = usize::from(kind == ModelKind::Model1);
        let defs = gf_mean_definitions(kind);
        assert!(defs.iter().all(|d| d.kind == EffectKind::Mean));
        for (k, d) in defs.iter().enumerate() {
            assert!((d.value(&theta) - mean[lead + k]).abs() < 1e-10, "{}", d.label);
        }
    }
}

#[test]
fn mean_standard_errors_for_model1_match_hand_gradient() {
    // mean_m1 = α_m1 + b_xm1 μx
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let p = random_params(ModelKind::Model1, &mut rng);
    let theta = p.to_natural();
    let names = p.names();
    let at = |n: &str| names.iter().position(|x| x == n).unwrap();
    let (a, b, mu) = (at("alpha_m1"), at("b_xm1"), at("mu_x"));
    let k = theta.len();
    let r = DMatrix::from_fn(k, k, |_, _| normal(&mut rng));
    let cov = &r * r.transpose();
    let defs = gf_mean_definitions(ModelKind::Model1);
    let se = delta_method_se(&theta, &cov, &defs)[0].unwrap();
    let g = [(a, 1.0), (b, theta[mu]), (mu, theta[b])];
    let mut v = 0.0;
    for &(i, gi) in &g {
        for &(j, gj) in &g {
            v += gi * cov[(i, j)] * gj;
        }
    }
    assert!((se - v.sqrt()).abs() < 1e-12);
}

/// Draws (x or η^x, η^m, η^y) by sampling the structural equations in
/// order: exogenous part, then mediator given it, then outcome given both.
fn sequential_draw(p: &Params, rng: &mut ChaCha8Rng, lx: &DMatrix<f64>, lm: &DMatrix<f64>, ly: &DMatrix<f64>) -> Vec<f64> {
    let z = |rng: &mut ChaCha8Rng, l: &DMatrix<f64>| {
        let e = nalgebra::DVector::from_fn(l.ncols(), |_, _| normal(rng));
        l * e
    };
    let (x, m, y): (Vec<f64>, nalgebra::DVector<f64>, nalgebra::DVector<f64>) = match p {
        Params::Model1(p) => {
            let x = p.mu_x + p.phi_x.sqrt() * normal(rng);
            let m = nalgebra::DVector::from_fn(3, |k, _| p.alpha_m[k] + p.b_xm.0[k] * x) + z(rng, lm);
            let bm = p.b_my.matrix() * nalgebra::Vector3::new(m[0], m[1], m[2]);
            let y = nalgebra::DVector::from_fn(3, |k, _| p.alpha_y[k] + p.b_xy.0[k] * x + bm[k]) + z(rng, ly);
            (vec![x], m, y)
        }
        Params::Model2(p) => {
            let x = nalgebra::DVector::from_fn(3, |k, _| p.mu_x[k]) + z(rng, lx);
            let xv = nalgebra::Vector3::new(x[0], x[1], x[2]);
            let bx = p.b_xm.matrix() * xv;
            let m = nalgebra::DVector::from_fn(3, |k, _| p.alpha_m[k] + bx[k]) + z(rng, lm);
            let mv = nalgebra::Vector3::new(m[0], m[1], m[2]);
            let by = p.b_xy.matrix() * xv + p.b_my.matrix() * mv;
            let y = nalgebra::DVector::from_fn(3, |k, _| p.alpha_y[k] + by[k]) + z(rng, ly);
            (x.iter().copied().collect(), m, y)
        }
        Params::Univariate(_) => unreachable!(),
    };
    x.into_iter().chain(m.iter().copied()).chain(y.iter().copied()).collect()
}

#[test]
fn reduced_form_matches_sequential_sampling() {
    let chol = |m: &nalgebra::Matrix3<f64>| {
        DMatrix::from_fn(3, 3, |r, c| m[(r, c)]).cholesky().unwrap().l()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for kind in [ModelKind::Model1, ModelKind::Model2] {
        let p = random_params(kind, &mut rng);
        let (lx, lm, ly) = match &p {
            Params::Model1(q) => (DMatrix::zeros(3, 3), chol(&q.psi_m), chol(&q.psi_y)),
            Params::Model2(q) => (chol(&q.psi_x), chol(&q.psi_m), chol(&q.psi_y)),
            Params::Univariate(_) => unreachable!(),
        };
        let joint = reduced_form(&p);
        let k = joint.mean.len();
        let draws = 1_000_000;
        let mut sum = nalgebra::DVector::zeros(k);
        let mut cross = DMatrix::zeros(k, k);
        for _ in 0..draws {
            let v = nalgebra::DVector::from_vec(sequential_draw(&p, &mut rng, &lx, &lm, &ly));
            sum += &v;
            cross.ger(1.0, &v, &v, 1.0);
        }
        let n = draws as f64;
        let mean = sum / n;
        let cov = (cross - &mean * mean.transpose() * n) / (n - 1.0);
        let s = &joint.cov;
        for a in 0..k {
            let z = (mean[a] - joint.mean[a]) / (s[(a, a)] / n).sqrt();
            assert!(z.abs() < 3.0, "{kind:?} mean {a}: z = {z}");
            for b in 0..=a {
                let se = ((s[(a, b)].powi(2) + s[(a, a)] * s[(b, b)]) / n).sqrt();
                let z = (cov[(a, b)] - s[(a, b)]) / se;
                assert!(z.abs() < 3.0, "{kind:?} cov ({a},{b}): z = {z}");
            }
        }
    }
}

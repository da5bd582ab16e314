//! Simulates one dataset from a Monte Carlo condition and fits it.
//!
//! cargo run --release --example recover -- [model] [n] [waves] [seed]

use std::time::Instant;

use blsmed::estimation::{fit, FitOptions};
use blsmed::simulation::{generate_dataset, population_params, replication_rng, ConditionSpec, Scenario, Shape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: u64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let model = arg(0, 1) as u8;
    let waves = arg(2, 10) as usize;
    let knot = if waves == 6 { 2.5 } else { 4.5 };
    let spec = ConditionSpec {
        model,
        n: arg(1, 500) as usize,
        waves,
        knots: vec![knot; if model == 1 { 2 } else { 3 }],
        theta: 1.0,
        residual_correlation: 0.3,
        scenario: Scenario::Medium,
        shape: Shape::Deceleration,
        reps: 2,
        seed: arg(3, 1),
        jitter: 0.25,
        max_attempts: None,
        temporal_order: false,
    };
    let truth = population_params(&spec)?;
    let data = generate_dataset(&truth, spec.n, spec.waves, spec.jitter, &mut replication_rng(spec.seed, 0))?;
    let t0 = Instant::now();
    let res = fit(&data, truth.kind(), &FitOptions::default())?;
    println!("status {:?} in {:.2?}, loglik {:.4}, |g| {:.2e}", res.status, t0.elapsed(), res.loglik, res.grad_norm);
    for s in &res.starts {
        println!("  start: ll {:.4} |g| {:.2e} iters {} ok {}", s.loglik, s.grad_norm, s.iterations, s.converged);
    }
    for (e, t) in res.estimates.iter().zip(truth.to_natural()) {
        println!("{:>10} {:>12.5} {:>12.5} se {:?}", e.name, t, e.estimate, e.se);
    }
    Ok(())
}

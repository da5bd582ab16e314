//! The `blsmed` command line: `fit`, `simulate` and `mc`.
//!
//! Exit status: 0 success, 1 I/O or other failure, 2 invalid input or
//! usage, 3 non-convergence, 4 partial Monte Carlo result.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{fit, FitOptions};
use crate::io::report::{
    condition_metrics_csv, effects_csv, estimates_csv, grid_summary_csv, render_text, replicates_csv,
    write_json, write_text, ConditionReport,
};
use crate::io::{read_dataset, write_dataset, EstimatorChoice, FitReport, McReport, RunConfig};
use crate::model::ModelKind;
use crate::simulation::{
    generate_dataset, population_params, quantities, replication_rng, run_condition, ConditionSpec,
    MleEstimator, Quantity, TruthEstimator,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "blsmed", version, about = "Bilinear-spline longitudinal mediation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model 1 (baseline covariate) or 2 (longitudinal covariate).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    model: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; overrides `fit.data`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Fit every process separately with a univariate bilinear model.
        #[arg(long)]
        univariate: bool,
    },
    /// Simulate one dataset with its generating values.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run a Monte Carlo condition grid.
    Mc {
        #[command(flatten)]
        common: Common,
        /// Successful replications per condition.
        #[arg(long)]
        reps: Option<usize>,
    },
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Json(_) => EXIT_FAILURE,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => EXIT_FAILURE,
        _ => EXIT_INVALID,
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.model.is_some() {
        cfg.model = common.model;
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("blsmed-out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Fit {
            common,
            data,
            univariate,
        } => {
            let cfg = load(&common)?;
            cmd_fit(&cfg, data.as_deref(), univariate)
        }
        Command::Simulate { common } => cmd_simulate(&load(&common)?),
        Command::Mc { common, reps } => cmd_mc(&load(&common)?, reps),
    }
}

fn cmd_fit(cfg: &RunConfig, data: Option<&Path>, univariate: bool) -> Result<i32> {
    let section = cfg.fit.as_ref();
    let path = data
        .map(Path::to_path_buf)
        .or_else(|| section.map(|f| f.data.clone()))
        .ok_or_else(|| Error::Config("no dataset: set fit.data or pass --data".into()))?;
    let univariate = univariate || section.is_some_and(|f| f.univariate);
    let seed = cfg.seed();
    let options = FitOptions {
        seed,
        ..section.map(|f| f.options.clone()).unwrap_or_default()
    };
    let dataset = read_dataset(&path)?;
    let kinds: Vec<ModelKind> = if univariate {
        dataset.processes().iter().map(|&p| ModelKind::Univariate(p)).collect()
    } else {
        vec![ModelKind::from_number(cfg.model()?).expect("validated model number")]
    };
    let dir = out_dir(cfg)?;
    let mut reports = Vec::new();
    for kind in kinds {
        let res = fit(&dataset, kind, &options)?;
        reports.push(FitReport::new(&res, dataset.waves(), seed));
    }
    let text: String = reports.iter().map(render_text).collect::<Vec<_>>().join("\n");
    if univariate {
        #[derive(Serialize)]
        struct Univariate<'a> {
            seed: u64,
            fits: &'a [FitReport],
        }
        write_json(&dir.join("report.json"), &Univariate { seed, fits: &reports })?;
    } else {
        write_json(&dir.join("report.json"), &reports[0])?;
    }
    write_text(&dir.join("report.txt"), &text)?;
    write_text(&dir.join("estimates.csv"), &estimates_csv(&reports)?)?;
    write_text(&dir.join("effects.csv"), &effects_csv(&reports)?)?;
    print!("{text}");
    let all_ok = reports.iter().all(|r| r.status == crate::estimation::FitStatus::Converged);
    Ok(if all_ok { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Serialize)]
struct TruthSidecar<'a> {
    seed: u64,
    condition: &'a ConditionSpec,
    parameters: Vec<(String, f64)>,
    derived: Vec<Quantity>,
}

fn cmd_simulate(cfg: &RunConfig) -> Result<i32> {
    let design = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("missing [simulate] section".into()))?;
    let seed = cfg.seed();
    // reps is irrelevant for a single dataset; 2 satisfies validation
    let spec = design.to_condition(cfg.model()?, 2, seed, None);
    let truth = population_params(&spec)?;
    let data = generate_dataset(&truth, spec.n, spec.waves, spec.jitter, &mut replication_rng(seed, 0))?;
    let dir = out_dir(cfg)?;
    write_dataset(&data, &dir.join("data.csv"))?;
    let sidecar = TruthSidecar {
        seed,
        condition: &spec,
        parameters: truth.names().into_iter().zip(truth.to_natural()).collect(),
        derived: quantities(&truth)
            .into_iter()
            .filter(|q| q.group != crate::simulation::QuantityGroup::Parameter)
            .collect(),
    };
    write_json(&dir.join("truth.json"), &sidecar)?;
    println!("wrote {} individuals to {}", data.n(), dir.join("data.csv").display());
    Ok(EXIT_OK)
}

fn cmd_mc(cfg: &RunConfig, reps: Option<usize>) -> Result<i32> {
    let mc = cfg
        .mc
        .as_ref()
        .ok_or_else(|| Error::Config("missing [mc] section".into()))?;
    if mc.conditions.is_empty() {
        return Err(Error::Config("mc.conditions is empty".into()));
    }
    let model = cfg.model()?;
    let seed = cfg.seed();
    let reps = reps.unwrap_or(mc.reps);
    let specs: Vec<ConditionSpec> = mc
        .conditions
        .iter()
        .enumerate()
        .map(|(i, d)| d.to_condition(model, reps, seed.wrapping_add(i as u64), mc.max_attempts))
        .collect();
    for s in &specs {
        s.validate()?;
    }
    let dir = out_dir(cfg)?;
    let mle = MleEstimator {
        options: mc.options.clone(),
    };
    let mut conditions = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let res = match mc.estimator {
            EstimatorChoice::Mle => run_condition(spec, &mle)?,
            EstimatorChoice::Truth => run_condition(spec, &TruthEstimator)?,
        };
        let report = ConditionReport::new(i + 1, &res);
        write_text(
            &dir.join(format!("condition_{}_metrics.csv", i + 1)),
            &condition_metrics_csv(&report)?,
        )?;
        write_text(
            &dir.join(format!("condition_{}_replicates.csv", i + 1)),
            &replicates_csv(&res)?,
        )?;
        println!(
            "condition {}: {} of {} replications converged{}",
            i + 1,
            res.successes,
            res.attempts,
            if res.partial { " (partial)" } else { "" }
        );
        conditions.push(report);
    }
    let report = McReport {
        model,
        seed,
        estimator: format!("{:?}", mc.estimator).to_lowercase(),
        conditions,
    };
    write_json(&dir.join("mc_report.json"), &report)?;
    write_text(&dir.join("grid_summary.csv"), &grid_summary_csv(&report)?)?;
    Ok(if report.conditions.iter().any(|c| c.partial) {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    })
}

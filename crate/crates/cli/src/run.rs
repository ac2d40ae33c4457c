//! `run`: execute every (solver, seed) pair of an experiment config and
//! write one CSV record plus a JSON metadata sidecar per run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use vfl_saddle::dataio::{parse_libsvm, partition_vertical, synth_regression};
use vfl_saddle::linalg::{DenseMatrix, Vector};
use vfl_saddle::metrics::{solve_ridge_oracle, OracleSolution};
use vfl_saddle::problem::{default_ridge_lambda, ProblemSpec, RegSpec};
use vfl_saddle::solvers::run_surviving_divergence;
use vfl_saddle::Error;

use crate::config::{load_config, DataSource, ExperimentConfig, LambdaRule};

/// Environment variable consulted when neither the flag nor the config set
/// an output directory.
pub const OUTDIR_ENV: &str = "VFLSIM_OUTDIR";

fn assemble_data(cfg: &ExperimentConfig) -> Result<(DenseMatrix<f64>, Vector<f64>)> {
    match &cfg.data {
        DataSource::Synthetic { samples, features, cond, noise, amplitude } => {
            let (a, b) =
                synth_regression::<f64>(*samples, *features, *cond, *noise, cfg.data_seed)?;
            if *amplitude == 1.0 {
                return Ok((a, b));
            }
            let scaled = DenseMatrix::new(
                a.rows(),
                a.cols(),
                (0..a.rows()).flat_map(|r| a.row(r).iter().map(|&v| amplitude * v)).collect(),
            )?;
            Ok((scaled, b.scale(*amplitude)))
        }
        DataSource::LibSvm { path, dimension } => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read data file {}", path.display()))?;
            Ok(parse_libsvm(&text, *dimension)?)
        }
    }
}

/// Builds the partitioned problem a config describes.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<ProblemSpec<f64>> {
    let (a, b) = assemble_data(cfg)?;
    let ds = partition_vertical(&a, &b, cfg.n_clients, cfg.data_seed, cfg.shuffle)?;
    let lambda = match cfg.lambda_rule {
        LambdaRule::Fixed(v) => v,
        LambdaRule::LmaxOver1e3 => {
            let probe = ProblemSpec::new(ds.clone(), RegSpec::none())?;
            default_ridge_lambda(probe.lambda_max_raw())
        }
    };
    let reg = if lambda == 0.0 { RegSpec::none() } else { RegSpec::ridge(lambda)? };
    Ok(ProblemSpec::new(ds, reg)?.with_lambda_max_mode(cfg.lambda_max_mode))
}

fn resolve_outdir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.outdir.clone())
        .or_else(|| std::env::var_os(OUTDIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

struct Outcome {
    label: String,
    seed: u64,
    status: String,
    subopt: f64,
    up: u64,
    down: u64,
    flops: u64,
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    values.retain(|v| !v.is_nan());
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

pub fn cmd_run(
    config_path: &Path,
    outdir_flag: Option<PathBuf>,
    seed_flag: Option<u64>,
    quiet: bool,
) -> Result<i32> {
    let started = Instant::now();
    let cfg = load_config(config_path)?;
    let outdir = resolve_outdir(outdir_flag, &cfg);
    std::fs::create_dir_all(&outdir)
        .with_context(|| format!("cannot create output directory {}", outdir.display()))?;
    let seeds = match seed_flag {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };

    let base = build_problem(&cfg)?;
    let oracle: Option<OracleSolution<f64>> = match solve_ridge_oracle(&base) {
        Ok(o) => Some(o),
        Err(Error::SingularOracle(_)) => None,
        Err(e) => return Err(e.into()),
    };

    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut all_ok = true;
    for entry in &cfg.solvers {
        let problem =
            if entry.beta_trick { base.clone().apply_beta_trick()? } else { base.clone() };
        for &seed in &seeds {
            let run_cfg = entry.solver_config(cfg.iterations, cfg.report_every, seed)?;
            match run_surviving_divergence(&run_cfg, &problem, oracle.as_ref()) {
                Ok(record) => {
                    let stem = format!("{}-{seed}", entry.label);
                    let csv = outdir.join(format!("{stem}.csv"));
                    std::fs::write(&csv, record.to_csv())
                        .with_context(|| format!("cannot write {}", csv.display()))?;
                    let meta = outdir.join(format!("{stem}.meta.json"));
                    std::fs::write(&meta, record.meta_json())
                        .with_context(|| format!("cannot write {}", meta.display()))?;
                    let last = record.rows.last().expect("records start with the initial row");
                    if record.meta.status != "completed" {
                        all_ok = false;
                    }
                    outcomes.push(Outcome {
                        label: entry.label.clone(),
                        seed,
                        status: record.meta.status.clone(),
                        subopt: last.subopt,
                        up: last.up,
                        down: last.down,
                        flops: last.flops,
                    });
                }
                Err(e) => {
                    all_ok = false;
                    eprintln!("run {}-{seed} failed: {e}", entry.label);
                    outcomes.push(Outcome {
                        label: entry.label.clone(),
                        seed,
                        status: "error".into(),
                        subopt: f64::NAN,
                        up: 0,
                        down: 0,
                        flops: 0,
                    });
                }
            }
        }
    }

    if !quiet {
        print_summary(&cfg, &seeds, &outcomes, &outdir, started);
    }
    Ok(if all_ok { 0 } else { 1 })
}

fn print_summary(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    outcomes: &[Outcome],
    outdir: &Path,
    started: Instant,
) {
    let width = outcomes.iter().map(|o| o.label.len()).max().unwrap_or(3).max(3);
    println!("{:<width$}  {:>4}  {:<9}  {:>10}  {:>12}  {:>12}  {:>14}", "run", "seed", "status", "subopt", "up", "down", "flops");
    for o in outcomes {
        println!(
            "{:<width$}  {:>4}  {:<9}  {:>10.3e}  {:>12}  {:>12}  {:>14}",
            o.label, o.seed, o.status, o.subopt, o.up, o.down, o.flops
        );
    }
    if seeds.len() > 1 {
        for entry in &cfg.solvers {
            let finals: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.label == entry.label)
                .map(|o| o.subopt)
                .collect();
            match median(finals) {
                Some(m) => println!(
                    "{:<width$}  median subopt over {} seeds: {m:.3e}",
                    entry.label,
                    seeds.len()
                ),
                None => println!("{:<width$}  median subopt undefined", entry.label),
            }
        }
    }
    println!(
        "{} runs -> {} in {:.1}s",
        outcomes.len(),
        outdir.display(),
        started.elapsed().as_secs_f64()
    );
}

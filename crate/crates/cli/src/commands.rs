//! `verify`, `train` and `sweep`.

use crate::config::{ExperimentConfig, LossVariant};
use crate::report::{history_csv, sweep_csv, HistoryRow, LossSummary, MeanStd, Summary, SweepRow};
use crate::CliError;
use rayon::prelude::*;
use setclr_core::harness::{run, RunReport, TwoViewDataset};
use setclr_core::verify::{run_suite, SUITES};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Paper-style grid: 0 to 1.875 in steps of 0.125.
pub fn default_beta_grid() -> Vec<f64> {
    (0..16).map(|k| k as f64 * 0.125).collect()
}

pub fn cmd_verify(suite: Option<&str>, out: &mut impl Write) -> Result<bool, CliError> {
    let names: Vec<&str> = match suite {
        Some(name) if SUITES.contains(&name) => vec![name],
        Some(name) => {
            return Err(CliError::Config(format!("unknown suite {name:?}; expected one of {}", SUITES.join(", "))))
        }
        None => SUITES.to_vec(),
    };
    let mut all = true;
    for name in names {
        let report = run_suite(name).expect("listed suite")?;
        all &= report.passed;
        writeln!(out, "{report}").map_err(io)?;
    }
    Ok(all)
}

fn io(e: std::io::Error) -> CliError {
    CliError::Other(e.to_string())
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force`.
fn prepare_output(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let occupied = fs::read_dir(dir).map_err(io)?.next().is_some();
        if occupied && !force {
            return Err(CliError::Config(format!(
                "output directory {} is not empty (pass --force to overwrite)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(io)
}

fn resolve_output(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    out.or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Config("output: no --out given and the config has no output".into()))
}

struct Job<'a> {
    variant: &'a LossVariant,
    beta: f64,
    seed: u64,
}

fn run_jobs(cfg: &ExperimentConfig, data: &TwoViewDataset, jobs: &[Job<'_>]) -> Result<Vec<RunReport>, CliError> {
    jobs.par_iter()
        .map(|job| {
            let loss = setclr_core::LossConfig { beta: job.beta, ..job.variant.loss.clone() };
            run(data, &cfg.train_config(&loss, job.seed))
                .map(|(_, report)| report)
                .map_err(|e| CliError::from_core(e, &format!("loss {:?}, seed {}", job.variant.name, job.seed)))
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))
}

/// Trains every loss variant for every seed; writes `history.csv` and `summary.json`.
pub fn cmd_train(config: &Path, out: Option<PathBuf>, force: bool) -> Result<PathBuf, CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = resolve_output(&cfg, out)?;
    let data = cfg.dataset()?;
    prepare_output(&dir, force)?;

    let jobs: Vec<Job> = cfg
        .losses
        .iter()
        .flat_map(|variant| cfg.seeds.iter().map(move |&seed| Job { variant, beta: variant.loss.beta, seed }))
        .collect();
    let reports = run_jobs(&cfg, &data, &jobs)?;

    let mut rows = Vec::new();
    for (job, report) in jobs.iter().zip(&reports) {
        rows.extend(report.history.iter().map(|e| HistoryRow {
            beta: job.beta,
            seed: job.seed,
            loss_name: job.variant.name.clone(),
            epoch: e.epoch,
            mean_loss: e.mean_loss,
            matching_acc: e.matching_acc,
            probe_acc: e.probe_acc,
        }));
    }
    write_file(&dir.join("history.csv"), &history_csv(&mut rows))?;

    let losses = cfg
        .losses
        .iter()
        .map(|variant| {
            let runs: Vec<&RunReport> =
                jobs.iter().zip(&reports).filter(|(j, _)| j.variant.name == variant.name).map(|(_, r)| r).collect();
            let pick = |f: fn(&RunReport) -> f64| runs.iter().map(|r| f(r)).collect::<Vec<_>>();
            LossSummary {
                loss_name: variant.name.clone(),
                kind: variant.loss.kind.to_string(),
                mode: format!("{:?}", variant.loss.mode).to_lowercase(),
                alpha: variant.loss.alpha,
                beta: variant.loss.beta,
                runs: runs.len(),
                matching_acc: MeanStd::of(&pick(|r| r.final_matching_acc)),
                probe_acc: MeanStd::of(&pick(|r| r.final_probe_acc)),
                final_loss: MeanStd::of(&pick(|r| r.history.last().map_or(f64::NAN, |e| e.mean_loss))),
                degenerate_steps: runs.iter().map(|r| r.degenerate_steps).sum(),
            }
        })
        .collect();
    let summary = Summary { seeds: cfg.seeds.clone(), random_baseline: 1.0 / data.len() as f64, losses };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Other(e.to_string()))?;
    write_file(&dir.join("summary.json"), &(json + "\n"))?;
    Ok(dir)
}

/// One run per `beta` and seed with the first loss variant; writes `sweep.csv`.
pub fn cmd_sweep(config: &Path, out: Option<PathBuf>, grid: Option<Vec<f64>>, force: bool) -> Result<PathBuf, CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let grid = grid.unwrap_or_else(default_beta_grid);
    if grid.is_empty() {
        return Err(CliError::Config("beta-grid: must not be empty".into()));
    }
    if let Some(bad) = grid.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(CliError::Config(format!("beta-grid: values must be finite and >= 0, got {bad}")));
    }
    let variant = &cfg.losses[0];
    for &beta in &grid {
        let loss = setclr_core::LossConfig { beta, ..variant.loss.clone() };
        loss.validate().map_err(|e| CliError::Config(format!("beta-grid: {e}")))?;
    }
    let dir = resolve_output(&cfg, out)?;
    let data = cfg.dataset()?;
    prepare_output(&dir, force)?;

    let jobs: Vec<Job> =
        grid.iter().flat_map(|&beta| cfg.seeds.iter().map(move |&seed| Job { variant, beta, seed })).collect();
    let reports = run_jobs(&cfg, &data, &jobs)?;
    let mut rows: Vec<SweepRow> = jobs
        .iter()
        .zip(&reports)
        .map(|(j, r)| SweepRow {
            beta: j.beta,
            seed: j.seed,
            matching_acc: r.final_matching_acc,
            probe_acc: r.final_probe_acc,
        })
        .collect();
    write_file(&dir.join("sweep.csv"), &sweep_csv(&mut rows))?;
    Ok(dir)
}

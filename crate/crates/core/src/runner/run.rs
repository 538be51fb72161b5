//! `run <config>`: ensemble, ledger CSV, report and snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::report::{ledger_invariants, RunReport};
use super::{RunError, ScenarioConfig};
use crate::feedback::run_controlled_experiment;
use crate::metrics::{run_ensemble, EnsembleRun};

pub const LEDGER_FILE: &str = "ledger.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger_csv: String,
    pub report: RunReport,
    pub snapshots_csv: Option<String>,
}

impl RunOutput {
    /// Writes every product into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: &str| -> Result<(), RunError> {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        put(LEDGER_FILE, &self.ledger_csv)?;
        put(REPORT_FILE, &self.report.render())?;
        if let Some(s) = &self.snapshots_csv {
            put(SNAPSHOT_FILE, s)?;
        }
        Ok(written)
    }
}

fn snapshots(run: &EnsembleRun) -> String {
    let grid = run.config.grid;
    let mut out = String::from("t,x,rho,rho_hat_mean\n");
    for (row, t) in run.times.iter().enumerate() {
        let prior = &run.priors[row];
        let post = run.mean_posteriors.get(row);
        for i in 0..grid.n_cells() {
            let hat = post.map_or(f64::NAN, |p| p[i]);
            let _ = writeln!(out, "{t:.16e},{:.16e},{:.16e},{hat:.16e}", grid.center(i), prior.values[i]);
        }
    }
    out
}

/// Runs a validated scenario in memory.
pub fn execute(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let model = cfg.model()?;
    let ens = cfg.ensemble_config(&model)?;
    let run = match cfg.policy()? {
        Some(policy) => run_controlled_experiment(&model, &policy, &ens)?.run,
        None => run_ensemble(&model, &ens, None)?,
    };
    if !run.ledger.all_finite() {
        return Err(RunError::Numerical("ledger contains non-finite values".into()));
    }
    if !run.is_valid() {
        return Err(RunError::Numerical(format!(
            "{} of {} trajectories excluded at one row (limit 0.1%)",
            run.max_excluded(),
            ens.n_traj
        )));
    }
    let report = RunReport {
        scenario: cfg.scenario.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        n_traj: ens.n_traj,
        excluded: run.max_excluded(),
        exclusions_valid: run.is_valid(),
        invariants: ledger_invariants(&run.ledger),
        config_echo: toml::to_string(cfg).unwrap_or_default(),
    };
    Ok(RunOutput {
        ledger_csv: run.ledger.to_csv(),
        report,
        snapshots_csv: cfg.output.snapshots.then(|| snapshots(&run)),
    })
}

/// Runs the scenario and writes its products under `scenario.output_dir`
/// (resolved against `base` when relative). Nothing is written on error.
pub fn run_scenario(cfg: &ScenarioConfig, base: &Path) -> Result<(RunOutput, Vec<PathBuf>), RunError> {
    let out = execute(cfg)?;
    let dir = if cfg.scenario.output_dir.is_absolute() {
        cfg.scenario.output_dir.clone()
    } else {
        base.join(&cfg.scenario.output_dir)
    };
    let files = out.write_to(&dir)?;
    Ok((out, files))
}

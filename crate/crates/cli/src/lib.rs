//! Experiment runner for the `nonlocal-rate` library. One INI config drives
//! one experiment; results land as CSV, JSON and an SVG plot.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod report;

use serde_json::json;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
pub use report::{Audit, Report};

/// Runs `cfg` and writes its outputs. Audit failures are left in the
/// report; see [`check_audits`].
pub fn execute(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.prepare_out()?;
    let report = experiments::run(cfg)?;
    let header = json!({
        "experiment": cfg.experiment,
        "versions": {
            "nonlocal-rate": env!("CARGO_PKG_VERSION"),
            "parallel_feature": cfg!(feature = "parallel"),
        },
        "threads": rayon::current_num_threads(),
        "seed": cfg.seed,
        "config": cfg.echo,
        "resolved": cfg,
    });
    report.write(&cfg.out, header)?;
    Ok(report)
}

/// `Err(Audit)` naming every violated bound.
pub fn check_audits(report: &Report) -> Result<()> {
    let failed = report.failures();
    if failed.is_empty() {
        return Ok(());
    }
    let names: Vec<String> = failed
        .iter()
        .map(|a| match a.h {
            Some(h) => format!("{} at h = {h}", a.bound),
            None => a.bound.clone(),
        })
        .collect();
    Err(CliError::Audit(names.join("; ")))
}

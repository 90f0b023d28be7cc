use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nonlocal_rate_cli::{check_audits, execute, CliError, Experiment, ExperimentConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Which {
    Rate1d,
    Ratend,
    SliceCheck,
    KernelReport,
    H2Probe,
    BoundsAudit,
}

impl From<Which> for Experiment {
    fn from(w: Which) -> Self {
        match w {
            Which::Rate1d => Experiment::Rate1d,
            Which::Ratend => Experiment::Ratend,
            Which::SliceCheck => Experiment::SliceCheck,
            Which::KernelReport => Experiment::KernelReport,
            Which::H2Probe => Experiment::H2Probe,
            Which::BoundsAudit => Experiment::BoundsAudit,
        }
    }
}

/// Nonlocal rate functional experiments.
#[derive(Debug, Parser)]
#[command(name = "nonlocal-rate", version)]
struct Args {
    experiment: Which,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[experiment] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[experiment] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "NONLOCAL_RATE_THREADS")]
    threads: Option<usize>,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config, args.experiment.into())?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = args.out {
        cfg = cfg.with_out(out);
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| execute(&cfg))?;
    for a in &report.audits {
        let h = a.h.map(|h| format!(" h={h}")).unwrap_or_default();
        println!(
            "{} {}{h}: {:.6e} {} {:.6e} (margin {:.3e})",
            if a.pass { "ok  " } else { "FAIL" },
            a.bound,
            a.lhs,
            a.relation,
            a.rhs,
            a.margin
        );
    }
    println!("wrote {}", cfg.out.display());
    check_audits(&report)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

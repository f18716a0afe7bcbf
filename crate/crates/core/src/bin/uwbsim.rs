use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use uwbtr::cli::{run, validate, RunConfig};
use uwbtr::Error;

/// Batch runner for TR / All-Rake impulse-radio experiments.
#[derive(Parser, Debug)]
#[command(name = "uwbsim", version, about)]
struct Args {
    /// Experiment config (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV output.
    #[arg(long, default_value = ".")]
    output: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "UWBSIM_WORKERS")]
    workers: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Only validate the config.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.workers.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("uwbsim: cannot start {n} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let mut cfg = match RunConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("uwbsim: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(s) = args.seed {
        cfg = cfg.with_seed(s);
    }
    let diags = validate(&cfg);
    for d in &diags {
        eprintln!("uwbsim: {}: {d}", args.config.display());
    }
    if diags.iter().any(|d| d.fatal) {
        return ExitCode::from(2);
    }
    if args.check {
        println!("config ok");
        return ExitCode::SUCCESS;
    }
    match run(&cfg, &args.output) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("uwbsim: check failed");
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Validation(_)) => {
            eprintln!("uwbsim: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("uwbsim: {e}");
            ExitCode::from(1)
        }
    }
}

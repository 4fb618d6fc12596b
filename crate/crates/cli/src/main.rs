//! `pat`: phantoms, forward simulation, reconstruction, metrics and plots.

mod config;
mod error;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Mode, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pat", version, about = "Sectional photoacoustic simulation and reconstruction")]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `mode` of the configuration.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = one per core); overrides the configuration.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value`, dotted keys into the configuration; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(args: &Args) -> Result<run::Summary, CliError> {
    let mut cfg = RunConfig::load(&args.config, &args.overrides)?;
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let mode = args.mode.or(cfg.mode).ok_or_else(|| CliError::Validation("no mode given".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| run::run(&cfg, mode, &args.out))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).expect("serializable summary"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("serializable report"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Batch runner that turns a JSON experiment description into a CSV table
//! and a JSON summary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use experiments::run_experiment;
pub use output::{ExperimentOutput, Table};

pub const THREADS_ENV: &str = "QRF_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qrf-sim", version, about = "Run a reference-frame experiment from a JSON config")]
pub struct Args {
    /// Must match the config's `experiment` field.
    #[arg(value_enum)]
    pub experiment: Experiment,
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination; the JSON summary goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated seed list, replacing the config's.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Worker threads; `QRF_SIM_THREADS` takes precedence.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Thread count from the environment value, else the flag; `None` means
/// the rayon default.
pub fn resolve_threads(env: Option<&str>, flag: Option<usize>) -> CliResult<Option<usize>> {
    let n = match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => Some(
            s.parse::<usize>()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV} = {s:?} is not a thread count")))?,
        ),
        None => flag,
    };
    if n == Some(0) {
        return Err(CliError::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

/// Load the config and apply command-line overrides.
pub fn load_config(args: &Args) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if cfg.experiment != args.experiment {
        return Err(CliError::Config(format!(
            "command asks for {} but the config describes {}",
            args.experiment.name(),
            cfg.experiment.name()
        )));
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = Some(s.clone());
    }
    if let Some(g) = args.gamma {
        cfg.gamma = Some(g);
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

/// Run a config on a pool of `threads` workers and write both files.
pub fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> CliResult<(PathBuf, PathBuf)> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let result = pool.install(|| run_experiment(cfg))?;
    let out = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.experiment.name())));
    output::write_outputs(cfg, &result, &out)
}

/// Entry point of the binary; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::Config(first).diagnostic());
            return 2;
        }
    };
    let run = || -> CliResult<(PathBuf, PathBuf)> {
        let threads = resolve_threads(std::env::var(THREADS_ENV).ok().as_deref(), args.threads)?;
        let cfg = load_config(&args)?;
        execute(&cfg, threads)
    };
    match run() {
        Ok((csv, json)) => {
            eprintln!("qrf-sim: wrote {} and {}", csv.display(), json.display());
            0
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}

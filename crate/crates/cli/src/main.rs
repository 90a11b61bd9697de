use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lyapmkv_cli::{run, CliError, Mode, RunConfig};

/// Estimate the top Lyapunov exponent of a Markovian matrix product.
#[derive(Debug, Parser)]
#[command(name = "lyapmkv", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the mode in the config.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for the report and trace files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn execute(args: &Args) -> Result<PathBuf, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(lyapmkv::Error::InvalidArgument("--workers must be positive".into()).into());
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| lyapmkv::Error::InvalidArgument(format!("thread pool: {e}")))?;
    let report = pool.install(|| run(&config))?;
    report.write(&args.out)?;
    Ok(args.out.join(&config.output.report))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}

use clap::Parser;
use fuyau_core::cli::{run, EXIT_CONFIG};
use fuyau_core::config::{validate_config, Mode, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

/// Solve and verify Fu-Yau Hessian equations on flat complex tori.
#[derive(Parser)]
#[command(name = "fuyau", version)]
struct Args {
    /// One of solve, manufactured, sweep, verify-all, min-scale.
    mode: Mode,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Complex dimension.
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    /// Points per real axis.
    #[arg(long = "grid-N")]
    grid_resolution: Option<usize>,
    /// Subtract the mean of mu instead of rejecting it.
    #[arg(long)]
    allow_mu_projection: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(threads) = std::env::var("FUYAU_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("warning: FUYAU_THREADS ignored: {e}");
        }
    }
    let source = match std::fs::read_to_string(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let overrides = Overrides {
        mode: Some(args.mode),
        output_dir: args.out,
        seed: args.seed,
        n: args.grid_n,
        resolution: args.grid_resolution,
        allow_mu_projection: args.allow_mu_projection,
    };
    let config = match validate_config(&source, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    ExitCode::from(run(&config) as u8)
}

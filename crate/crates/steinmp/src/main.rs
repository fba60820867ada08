use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use steinmp::config::parse_grid;
use steinmp::{run_experiment, ConfigError, ConfigFile, Experiment, ExperimentConfig, Method, Overrides, RunError};

/// Stein variational inference experiments: SVGD, message-passing SVGD and
/// an HMC reference on Gaussian, grid-MRF and image-denoising targets.
#[derive(Debug, Parser)]
#[command(name = "stein-mp", version)]
struct Cli {
    experiment: Experiment,
    /// JSON config; unset fields take per-experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// One or more of svgd, mpsvgd-s, mpsvgd-m, hmc (comma separated).
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    /// Grid size for grid-mrf, e.g. 10x10.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

fn resolve(cli: Cli) -> Result<ExperimentConfig, ConfigError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let overrides = Overrides {
        output_dir: cli.out,
        seed: cli.seed,
        methods: cli.method,
        grid: cli.grid,
        particles: cli.particles,
        iterations: cli.iterations,
    };
    ExperimentConfig::resolve(cli.experiment, file, &overrides)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = resolve(cli).map_err(RunError::from).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(manifest) => {
            println!(
                "{}: wrote {} files to {} in {:.1}s",
                manifest.config.experiment,
                manifest.outputs.len() + 1,
                manifest.config.output_dir.display(),
                manifest.duration_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

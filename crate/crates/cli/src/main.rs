mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lupi::dataset::{Scenario, SynthSpec};
use lupi::par::Execution;

use crate::commands::Grid;
use crate::failure::Failure;

/// Train detection models with privileged features and compare them against
/// standard-feature baselines.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "lupi", version)]
struct Cli {
    /// Worker threads for fold/config parallelism; 0 uses every core, 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset and its schema sidecar.
    Synth {
        /// gauss2d or latent-lupi.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        noise_standard: f64,
        #[arg(long, default_value_t = 0.1)]
        noise_privileged: f64,
        /// Fraction of gauss2d labels flipped across the boundary.
        #[arg(long, default_value_t = 0.0)]
        outliers: f64,
        /// Output table.
        #[arg(long, default_value = "data.csv")]
        out: PathBuf,
        /// Schema sidecar; defaults to the table path with a `.schema` extension.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Cross-validate an approach against its baseline and save both models.
    Run {
        /// Experiment file of dotted `key = value` lines.
        config: PathBuf,
    },
    /// Greedy privileged-feature selection.
    Select {
        config: PathBuf,
    },
    /// Dump decision values of saved 2-D models over a regular grid.
    Boundary {
        /// Saved model; repeat for paired grids (e.g. baseline.txt and model.txt).
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        /// Output file per model, in the same order.
        #[arg(long = "out", required = true)]
        outputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        y_min: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        y_max: f64,
    },
}

fn execution(jobs: usize) -> Result<Execution, Failure> {
    if jobs == 1 {
        return Ok(Execution::Sequential);
    }
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(format!("--jobs: {e}")))?;
    }
    Ok(Execution::Parallel)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let exec = execution(cli.jobs)?;
    match cli.command {
        Command::Synth { scenario, n, seed, noise_standard, noise_privileged, outliers, out, schema } => {
            let scenario: Scenario = scenario.parse().map_err(|e| Failure::usage(format!("--scenario: {e}")))?;
            let spec = SynthSpec {
                scenario,
                n,
                noise_std_standard: noise_standard,
                noise_std_privileged: noise_privileged,
                outlier_fraction: outliers,
                seed,
            };
            println!("{}", commands::synth(&spec, &out, schema.as_deref())?);
        }
        Command::Run { config } => {
            let out = commands::run(&config, exec)?;
            print!("{}", out.summary);
            println!("outputs in {}", out.dir.display());
        }
        Command::Select { config } => {
            let out = commands::select(&config, exec)?;
            print!("{}", out.summary);
            println!("report in {}", out.dir.join("selection.txt").display());
        }
        Command::Boundary { models, outputs, steps, x_min, x_max, y_min, y_max } => {
            let grid = Grid { x: (x_min, x_max), y: (y_min, y_max), steps };
            for line in commands::boundary(&models, &outputs, &grid)? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { failure::USAGE } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

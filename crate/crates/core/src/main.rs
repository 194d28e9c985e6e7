use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use corrupt_rl::harness::{emit_plot, parse_grid, run_experiment, run_sweep, ExperimentConfig};
use corrupt_rl::Error;

#[derive(Parser)]
#[command(name = "corrupt-rl", version, about = "Episodic RL under adversarial corruption: experiments and plots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config template over a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render cumulative-regret curves from CSV files.
    Plot {
        #[arg(long, num_args = 1.., required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.output_dir = out;
            }
            if cfg.output_dir.is_none() {
                cfg.output_dir = Some(PathBuf::from("runs"));
            }
            let outputs = run_experiment(&cfg)?;
            for o in &outputs {
                println!(
                    "replicate {}: cum_regret_nominal={:.4} cum_regret_eq2={:.4} corrupted_episodes={}",
                    o.log.replicate, o.log.cum_regret_nominal, o.log.cum_regret_eq2, o.log.corrupted_episodes
                );
            }
            Ok(())
        }
        Command::Sweep { config, grid, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let grid = parse_grid(&std::fs::read_to_string(grid)?)?;
            run_sweep(&cfg, &grid, &out)
        }
        Command::Plot { csv, out } => emit_plot(&csv, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

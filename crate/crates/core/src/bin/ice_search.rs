use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ice_search::cli::{cmd_baselines, cmd_rank, cmd_replay, cmd_run, RunConfig};
use ice_search::evolution::SelectionMode;

#[derive(Parser)]
#[command(
    name = "ice-search",
    version,
    about = "LM-driven evolutionary wrapper feature selection with a cross-validation harness and an exhaustive ranking oracle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full search: baselines, LM evolution, held-out scoring.
    Run(CommonArgs),
    /// Enumerate and rank every non-empty feature subset.
    Rank(CommonArgs),
    /// Score only the four classical methods plus the ensemble strategy.
    Baselines(CommonArgs),
    /// Re-run from recorded transcripts; no live operator needed.
    Replay {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory holding transcript_seed<seed>.jsonl files.
        #[arg(long)]
        transcripts: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured CSV path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Override the configured target column.
    #[arg(long)]
    target: Option<String>,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the configured seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the configured number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the final-selection mode
    /// (argmax_val | decision_randomized | decision_randomized_excluding_first).
    #[arg(long)]
    selection_mode: Option<String>,
    /// Compute the exhaustive rank table and attach ranks to reports.
    #[arg(long)]
    ranks: bool,
    /// Run seeds in parallel.
    #[arg(long)]
    parallel_seeds: bool,
}

fn apply_overrides(config: &mut RunConfig, args: &CommonArgs) -> Result<(), String> {
    if let Some(data) = &args.data {
        config.data = data.clone();
    }
    if let Some(target) = &args.target {
        config.target = target.clone();
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(epochs) = args.epochs {
        config.engine.epochs = epochs;
    }
    if let Some(mode) = &args.selection_mode {
        config.engine.selection_mode = match mode.as_str() {
            "argmax_val" => SelectionMode::ArgmaxVal,
            "decision_randomized" => SelectionMode::DecisionRandomized,
            "decision_randomized_excluding_first" => {
                SelectionMode::DecisionRandomizedExcludingFirst
            }
            other => return Err(format!("unknown selection mode {other:?}")),
        };
    }
    if args.ranks {
        config.compute_ranks = true;
    }
    if args.parallel_seeds {
        config.parallel_seeds = true;
    }
    Ok(())
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, String> {
    let mut config = RunConfig::load(&args.config).map_err(|e| e.to_string())?;
    apply_overrides(&mut config, args)?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run(args) => {
            let config = load_config(&args)?;
            let report = cmd_run(&config).map_err(|e| e.to_string())?;
            for seed in &report.seeds {
                let winner = &seed.pool[seed.winner];
                println!(
                    "seed {}: winner [{}] val {:.3}% test {:.3}%",
                    seed.seed,
                    winner.features.join(", "),
                    winner.val_pct,
                    winner.test_pct
                );
            }
            for failure in &report.failures {
                eprintln!("seed {} failed: {}", failure.seed, failure.error);
            }
            println!("report written to {}", config.output_dir.display());
            Ok(report.failures.is_empty())
        }
        Command::Rank(args) => {
            let config = load_config(&args)?;
            let files = cmd_rank(&config).map_err(|e| e.to_string())?;
            for file in files {
                println!("wrote {}", file.display());
            }
            Ok(true)
        }
        Command::Baselines(args) => {
            let config = load_config(&args)?;
            let report = cmd_baselines(&config).map_err(|e| e.to_string())?;
            for seed in &report.seeds {
                for row in &seed.rows {
                    println!(
                        "seed {}: {} [{}] val {:.3}%",
                        seed.seed,
                        row.method,
                        row.features.join(", "),
                        row.val_pct
                    );
                }
            }
            for failure in &report.failures {
                eprintln!("seed {} failed: {}", failure.seed, failure.error);
            }
            println!("report written to {}", config.output_dir.display());
            Ok(report.failures.is_empty())
        }
        Command::Replay {
            common,
            transcripts,
        } => {
            let config = load_config(&common)?;
            let report = cmd_replay(&config, &transcripts).map_err(|e| e.to_string())?;
            for failure in &report.failures {
                eprintln!("seed {} failed: {}", failure.seed, failure.error);
            }
            println!("replayed report written to {}", config.output_dir.display());
            Ok(report.failures.is_empty())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

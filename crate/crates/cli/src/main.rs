use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latent_boost_cli::{report, run, seed_from_env, CliError, ResultsTable, RunOptions};

#[derive(Parser)]
#[command(name = "latent-boost", version, about = "Metric-regularized classification sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of a config and write results.csv, runlog.jsonl and latents_test.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print a results.csv with improvements relative to the baseline row.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, threads } => {
            let opts = RunOptions { out, threads, seed: seed_from_env()? };
            let (dir, sweep) = run(&config, &opts)?;
            print!("{}", report::render(&sweep.table));
            eprintln!("wrote {}", dir.display());
        }
        Command::Report { input } => {
            let f = std::fs::File::open(&input)
                .map_err(|e| CliError::Config(format!("cannot open {}: {e}", input.display())))?;
            let table = ResultsTable::read_csv(f)?;
            print!("{}", report::render(&table));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

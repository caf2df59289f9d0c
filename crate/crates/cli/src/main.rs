use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use noisy_ibc_cli::run::{load, run_scenario, RunError};

#[derive(Parser)]
#[command(name = "noisy-ibc", version, about = "Complexity bounds for noisy linear information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a scenario.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the scenario.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` in the scenario.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let (scenario, hash) = load(&config)?;
            let dir = out
                .or_else(|| scenario.output.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            run_scenario(&scenario, &hash, &dir, seed)?;
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Validate { config } => {
            load(&config)?;
            println!("{}: ok", config.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

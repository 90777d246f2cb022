use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phonon_sim::config::{load_file, FileConfig};
use phonon_sim::{run, Overrides, RunConfig, ScenarioKind, SimError};

#[derive(Parser)]
#[command(name = "phonon-sim", version, about = "Local-phonon detection simulator for trapped-ion chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its tables and manifest.
    Run {
        /// fig2, fig3, tqd or budget
        #[arg(long)]
        scenario: Option<ScenarioKind>,
        #[arg(long, allow_negative_numbers = true)]
        shots: Option<i64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and resolve a configuration without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run { scenario, shots, seed, config, out } => {
            let file = match &config {
                Some(path) => load_file(path)?,
                None => FileConfig::default(),
            };
            let resolved = RunConfig::resolve(&file, &Overrides { scenario, shots, seed, out })?;
            let manifest = run(&resolved)?;
            for f in &manifest.files {
                println!("{}", resolved.out.join(f).display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let resolved = RunConfig::resolve(&load_file(&config)?, &Overrides::default())?;
            println!("{}", serde_json::to_string_pretty(&resolved).expect("config serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

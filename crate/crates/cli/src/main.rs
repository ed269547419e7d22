use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ellis_film_cli::{parse_scenario, run, EXIT_CONFIG};

/// Run a thin-film scenario file.
///
/// Exit codes: 0 ok, 1 configuration or I/O error, 2 rupture, 3 blowup,
/// 4 step failure.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    /// Scenario file.
    scenario: PathBuf,
    /// Write outputs here instead of the scenario's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut scenario = match parse_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", args.scenario.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(out) = args.out {
        scenario.output_dir = out;
    }
    ExitCode::from(run(&scenario) as u8)
}

use std::process::ExitCode;

use clap::Parser;
use holotel::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for path in &outcome.artifacts {
                println!("{}", path.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("holotel: validation failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("holotel: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

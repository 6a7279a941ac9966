use std::process::ExitCode;

use clap::Parser;
use noisy_tunnel_cli::{exit, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for line in &outcome.report {
                println!("{line}");
            }
            eprintln!("wrote {} rows to {}", outcome.rows, outcome.out.display());
            if outcome.exit_code == exit::VALIDATION {
                eprintln!("error: validation failed");
            }
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

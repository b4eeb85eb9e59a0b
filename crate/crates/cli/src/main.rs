use std::process::ExitCode;

use clap::Parser;
use stochlab::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = execute(&cli).and_then(|o| o.write_files(&cli.common).map(|_| o));
    match outcome {
        Ok(o) => {
            println!("{}", o.json);
            for check in &o.failed {
                eprintln!("tolerance check failed: {check}");
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("stochlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use lattes::cli::{run, Cli, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = run(&cli, &mut out);
    let _ = out.flush();
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("lattes: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("lattes: error: {e}");
            ExitCode::from(2)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = germen_cli::Cli::parse();
    match germen_cli::run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

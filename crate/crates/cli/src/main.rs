//! `lobmrr` binary entry point.

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = lobmrr_cli::Cli::parse();
    match lobmrr_cli::run(cli) {
        Ok(()) => ExitCode::from(lobmrr_cli::exit::OK),
        Err(e) => {
            let code = e.exit_code();
            match e {
                lobmrr_cli::CliError::Input(inner) => eprintln!("error: {inner:#}"),
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(code)
        }
    }
}

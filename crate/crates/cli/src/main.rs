use std::process::ExitCode;

use clap::Parser;
use tfrc_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let command = cli.command.name();
    match run(cli) {
        Ok(summary) => {
            eprintln!("{}", summary.line());
            if summary.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("summary command={command} status=error");
            ExitCode::from(2)
        }
    }
}

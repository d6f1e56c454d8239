use std::process::ExitCode;

use clap::Parser;
use lfshield::cli::{self, Cli, Command};

fn main() -> ExitCode {
    let args = Cli::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match args.command {
        Command::Run(run) => match cli::run(&run) {
            Ok(results) => {
                log::info!("finished {} cells into {}", results.len(), run.out_dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}

use std::process::ExitCode;

use clap::Parser;
use eabnet_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EABNET_LOG", "info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => {
            log::info!("done: {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

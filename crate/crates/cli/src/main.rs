use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = flowgen::Cli::parse();
    ExitCode::from(flowgen::run(cli) as u8)
}

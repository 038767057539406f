use std::process::ExitCode;

use clap::Parser;
use nash_sir::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("nash-sir: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

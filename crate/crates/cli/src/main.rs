use std::process::ExitCode;

use or_graph_kit_cli::{dispatch, LOG_ENV};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "error")).init();
    ExitCode::from(dispatch(std::env::args_os()) as u8)
}

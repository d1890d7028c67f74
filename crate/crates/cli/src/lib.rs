//! Pipeline orchestration behind the `or-graph-kit` binary.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 internal error.

mod args;
mod context;
mod eval;
mod sink;
mod stages;
mod synth;

use std::ffi::OsString;
use std::panic::{self, AssertUnwindSafe};

use anyhow::Result;
use clap::Parser;
use or_graph_kit::io::RunConfig;

pub use args::{Cli, Command};
use context::{Context, TakeInput};
use sink::OutputSink;

/// Failure of the tool itself rather than of its inputs.
#[derive(Debug)]
pub struct Internal(pub String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Internal {}

pub const LOG_ENV: &str = "OR_GRAPH_KIT_LOG";

fn execute(cli: &Cli) -> Result<()> {
    let Some(path) = cli.config.as_deref() else {
        anyhow::bail!(or_graph_kit::Error::BadConfig("--config is required".into()));
    };
    let config = RunConfig::from_file(path)?;
    let ctx = Context::new(config, cli.take.clone(), cli.seed, cli.out.clone(), cli.jobs)?;
    let mut sink = OutputSink::new(&ctx.out);
    let result = run_command(cli.command, &ctx, &mut sink);
    if result.is_err() {
        sink.rollback();
    }
    result
}

fn run_command(command: Command, ctx: &Context, sink: &mut OutputSink) -> Result<()> {
    if command == Command::Synth {
        return synth::synth_stage(ctx, sink);
    }
    let take = TakeInput::open(ctx.take_dir()?)?;
    match command {
        Command::Fuse => stages::fuse_stage(ctx, &take, sink),
        Command::Label => stages::label_stage(ctx, &take, sink),
        Command::Predict => stages::predict_stage(ctx, &take, sink),
        Command::Track => stages::track_stage(ctx, &take, sink),
        Command::Roles => stages::roles_stage(ctx, &take, sink),
        Command::Eval => eval::eval_stage(ctx, &take, sink),
        Command::ExportDot => stages::export_dot_stage(&take, sink),
        Command::RunAll => {
            stages::fuse_stage(ctx, &take, sink)?;
            stages::label_stage(ctx, &take, sink)?;
            stages::predict_stage(ctx, &take, sink)?;
            stages::track_stage(ctx, &take, sink)?;
            stages::roles_stage(ctx, &take, sink)?;
            eval::eval_stage(ctx, &take, sink)?;
            stages::export_dot_stage(&take, sink)
        }
        Command::Synth => unreachable!(),
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<Internal>().is_some() {
        2
    } else {
        1
    }
}

fn one_line(err: &anyhow::Error) -> String {
    let msg = format!("{err:#}");
    msg.lines().collect::<Vec<_>>().join(" ")
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| execute(&cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {}", one_line(&err));
            exit_code(&err)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            2
        }
    }
}

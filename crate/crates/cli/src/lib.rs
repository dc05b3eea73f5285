//! The `rob2` command line: ingestion, assessment, benchmarking and reports.
//!
//! Every command writes JSON and CSV under the output directory plus a
//! `<stem>.meta.json` file holding timestamps, and prints a short summary.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::Cli;
pub use config::{CliConfig, ConfigFile};
pub use error::CliError;

use args::{Command, EvalCommand, ReportCommand};
use commands::Ctx;
use output::Output;

pub fn run(cli: Cli, env: &dyn Fn(&str) -> Option<String>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = CliConfig::resolve(&cli.global, env)?;
    let out = Output::create(&cfg.out)?;
    let mut ctx = Ctx { cfg, out, stdout };
    match &cli.command {
        Command::Ingest { files } => commands::ingest(&mut ctx, files),
        Command::Assess(a) => commands::assess(&mut ctx, a),
        Command::Eval(EvalCommand::Retrieval { k, retriever }) => commands::eval_retrieval(&mut ctx, k, *retriever),
        Command::Eval(EvalCommand::Qa(a)) => commands::eval_qa(&mut ctx, a),
        Command::Report(r) => match r {
            ReportCommand::Usage => commands::report_usage(&mut ctx),
            ReportCommand::Table2 { runs } => commands::report_table2(&mut ctx, runs.as_deref()),
            ReportCommand::Severity { runs, layout } => commands::report_severity(&mut ctx, runs.as_deref(), (*layout).into()),
            ReportCommand::Kappa => commands::report_kappa(&mut ctx),
            ReportCommand::Distribution => commands::report_distribution(&mut ctx),
            ReportCommand::Consistency => commands::report_consistency(&mut ctx),
        },
    }
}

/// Parses `argv` and runs it. Failures are printed to `stderr` as one JSON
/// object. Returns the process exit code.
pub fn main_with<I, T>(
    argv: I,
    env: &dyn Fn(&str) -> Option<String>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = if e.use_stderr() { write!(stderr, "{}", e.render()) } else { write!(stdout, "{}", e.render()) };
            return e.exit_code();
        }
    };
    match run(cli, env, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            1
        }
    }
}

//! `veilpulse` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde::{Deserialize, Serialize};

use args::{Cli, Command};
use commands::{execute, Output};
use error::{usage, CliError, CliResult};

/// Contents of `run.json`. Thread count is deliberately absent: outputs do
/// not depend on it.
#[derive(Debug, Serialize, Deserialize)]
struct RunRecord {
    tool: String,
    version: String,
    invocation: Command,
}

fn record_path(output: &Output, explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    match output {
        Output::Dir(d) => Some(d.join("run.json")),
        Output::File(f) => {
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
            Some(f.with_file_name(format!("{stem}.run.json")))
        }
        Output::Stdout => None,
    }
}

fn write_record(cmd: &Command, output: &Output, explicit: Option<&Path>) -> CliResult<()> {
    let Some(path) = record_path(output, explicit) else {
        return Ok(());
    };
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        invocation: cmd.clone(),
    };
    Ok(veilpulse::formats::write_json(&path, &record)?)
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.jobs == 0 {
        return Err(usage("--jobs must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {} worker threads: {e}", cli.jobs)))?;
    let cmd = match cli.command {
        Command::Replay(r) => {
            let text = fs::read_to_string(&r.run)
                .map_err(|e| CliError::Core(veilpulse::Error::Io { path: r.run.clone(), source: e }))?;
            let record: RunRecord = serde_json::from_str(&text).map_err(|e| CliError::Core(e.into()))?;
            if matches!(record.invocation, Command::Replay(_)) {
                return Err(usage("a run record cannot replay another replay"));
            }
            record.invocation
        }
        other => other,
    };
    let output = pool.install(|| execute(&cmd))?;
    write_record(&cmd, &output, cli.run_json.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

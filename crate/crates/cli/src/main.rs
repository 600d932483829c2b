//! `nrsync`: command-line front end for the nonreciprocal synchronization solvers.
//!
//! Every subcommand writes a CSV table (to `--out` or stdout) and, with
//! `--out`, a JSON sidecar holding the resolved configuration and a summary.
//! Exit codes: 0 success, 1 solver or per-point failure, 2 invalid input.

mod cli;
mod commands;
mod error;

use std::path::Path;
use std::process::ExitCode;

use serde_json::json;

use crate::cli::Command;
use crate::commands::Outcome;
use crate::error::CliError;

fn sidecar(cmd: &Command, out: &Outcome) -> serde_json::Value {
    let config = match cmd {
        Command::Trajectory(a) => serde_json::to_value(a),
        Command::PhaseDiagram(a) => serde_json::to_value(a),
        Command::Hysteresis(a) => serde_json::to_value(a),
        Command::CorrelatorsVsN(a) => serde_json::to_value(a),
        Command::ExactGrid(a) => serde_json::to_value(a),
        Command::Spectrum(a) => serde_json::to_value(a),
        Command::EpScan(a) => serde_json::to_value(a),
        Command::PtCheck(a) => serde_json::to_value(a),
        Command::StabilityBoundary(a) => serde_json::to_value(a),
    }
    .unwrap_or(serde_json::Value::Null);
    json!({
        "tool": "nrsync",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "config": config,
        "tolerances": out.tolerances,
        "summary": out.summary,
        "notes": out.notes,
        "failed_points": out.failed,
        "total_points": out.total,
    })
}

fn write(cmd: &Command, out: &Outcome) -> Result<(), CliError> {
    match &cmd.common().out {
        Some(path) => {
            out.table.write_csv(path)?;
            let json_path = Path::new(path).with_extension("json");
            nrsync_core::io::write_json(&json_path, &sidecar(cmd, out))?;
            eprintln!(
                "{}: wrote {} rows to {} and {}",
                cmd.name(),
                out.table.rows.len(),
                path.display(),
                json_path.display()
            );
        }
        None => out.table.write_to(std::io::stdout().lock())?,
    }
    Ok(())
}

fn execute(raw: Vec<String>) -> Result<(), CliError> {
    let cli = cli::parse(raw)?;
    let cmd = cli.command;
    let outcome = match cmd.common().workers {
        Some(0) => return Err(CliError::config("workers", "must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::config("workers", e.to_string()))?
            .install(|| commands::run(&cmd))?,
        None => commands::run(&cmd)?,
    };
    write(&cmd, &outcome)?;
    if outcome.failed > 0 && !cmd.common().keep_going {
        return Err(CliError::PartialFailure {
            failed: outcome.failed,
            total: outcome.total,
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { 2 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

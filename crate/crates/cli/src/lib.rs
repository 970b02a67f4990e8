//! Command-line harness for the qgrad estimators: seeded runs, bound
//! sweeps and query-ledger tables, all emitted as CSV.

pub mod args;
pub mod config;
pub mod error;
pub mod ledger;
pub mod runs;
pub mod sweeps;
pub mod table;

use std::io::Write;

pub use args::{Cli, Command, RunArgs};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

use table::{
    write_table, BOUNDS_COLUMNS, BOUNDS_SCHEMA, LEDGER_COLUMNS, LEDGER_SCHEMA, RUN_COLUMNS, RUN_SCHEMA,
    SWEEP_COLUMNS, SWEEP_SCHEMA,
};

/// A finished command: its CSV, notes for stderr, and the failure (if any)
/// that should set a nonzero exit after the CSV is written.
#[derive(Debug)]
pub struct Rendered {
    pub csv: Vec<u8>,
    pub notes: Vec<String>,
    pub failure: Option<CliError>,
}

pub fn render(cfg: &RunConfig) -> CliResult<Rendered> {
    let mut csv = Vec::new();
    let mut notes = Vec::new();
    let mut failure = None;
    match cfg.command {
        "gradient" | "hessian" | "sparse-hessian" => {
            let outcome = match cfg.command {
                "gradient" => runs::run_gradient(cfg)?,
                "hessian" => runs::run_hessian(cfg)?,
                _ => runs::run_sparse_hessian(cfg)?,
            };
            write_table(&mut csv, RUN_SCHEMA, &RUN_COLUMNS, outcome.rows.iter().map(|r| r.record()))?;
            notes.extend(outcome.warnings.into_iter().map(|w| format!("warning: {w}")));
            if !outcome.failures.is_empty() {
                failure = Some(CliError::Assertion(format!(
                    "{} of {} runs did not complete:\n  {}",
                    outcome.failures.len(),
                    outcome.rows.len(),
                    outcome.failures.join("\n  ")
                )));
            }
        }
        "verify-bounds" => {
            let rows = sweeps::verify_bounds(cfg)?;
            write_table(&mut csv, BOUNDS_SCHEMA, &BOUNDS_COLUMNS, rows.iter().map(|r| r.record()))?;
            let failed: Vec<String> = rows
                .iter()
                .filter(|r| r.failed_assertion())
                .map(|r| {
                    let at = [("m", table::cell(r.m)), ("k", table::cell(r.k)), ("N", table::cell(r.n)), ("x", table::cell(r.x))]
                        .into_iter()
                        .filter(|(_, v)| !v.is_empty())
                        .map(|(k, v)| format!(" {k}={v}"))
                        .collect::<String>();
                    format!("{}{at}: {} > {}", r.check, r.lhs, r.rhs)
                })
                .collect();
            let flagged = rows.iter().filter(|r| !r.asserted && !r.holds).count();
            notes.push(format!(
                "{} checks, {} asserted failures, {} flagged-only failures",
                rows.len(),
                failed.len(),
                flagged
            ));
            if !failed.is_empty() {
                failure = Some(CliError::Assertion(format!("asserted bounds failed:\n  {}", failed.join("\n  "))));
            }
        }
        "spectral-error-sweep" => {
            let rows = sweeps::spectral_error_sweep(cfg)?;
            write_table(&mut csv, SWEEP_SCHEMA, &SWEEP_COLUMNS, rows.iter().map(|r| r.record()))?;
            if let (Some(slope), Some(first)) = (sweeps::log_error_slope(&rows, 1e-13), rows.first()) {
                notes.push(format!(
                    "log-error slope {slope:.4} per sample; bound rate ln(delta/r_tilde) = {:.4}",
                    (first.params.delta / first.params.r_tilde).ln()
                ));
            }
        }
        "query-ledger" => {
            let rows = ledger::query_ledger(cfg)?;
            write_table(&mut csv, LEDGER_SCHEMA, &LEDGER_COLUMNS, rows.iter().map(|r| r.record()))?;
        }
        other => return Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
    Ok(Rendered { csv, notes, failure })
}

/// Render, write the CSV to `--out` or stdout, and report.
pub fn execute(cfg: &RunConfig) -> CliResult<()> {
    let rendered = render(cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &rendered.csv)?,
        None => std::io::stdout().lock().write_all(&rendered.csv)?,
    }
    for note in &rendered.notes {
        eprintln!("{note}");
    }
    rendered.failure.map_or(Ok(()), Err)
}

pub fn run(command: &Command) -> CliResult<()> {
    execute(&RunConfig::from_command(command)?)
}

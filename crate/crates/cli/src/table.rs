//! CSV output. Each table starts with a `# schema: name/version` line,
//! then a fixed header; LF line endings throughout.

use std::io::Write;

use crate::error::CliResult;

pub const RUN_SCHEMA: &str = "qgrad-runs/1";

pub const RUN_COLUMNS: [&str; 17] = [
    "run_id",
    "seed",
    "function",
    "method",
    "d",
    "n",
    "N_or_m",
    "a",
    "q",
    "epsilon",
    "rho",
    "error_linf",
    "error_maxnorm",
    "success",
    "sim_calls",
    "theory_cost",
    "wall_ms",
];

/// Index of the wall-time column, the only nondeterministic one.
pub const WALL_MS_COLUMN: usize = 16;

pub const BOUNDS_SCHEMA: &str = "qgrad-bounds/1";
pub const BOUNDS_COLUMNS: [&str; 9] = ["check", "m", "k", "N", "x", "lhs", "rhs", "holds", "asserted"];

pub const SWEEP_SCHEMA: &str = "qgrad-spectral-sweep/1";
pub const SWEEP_COLUMNS: [&str; 8] = ["function", "N", "delta", "r_tilde", "kappa", "measured_error", "bound", "holds"];

pub const LEDGER_SCHEMA: &str = "qgrad-ledger/1";
pub const LEDGER_COLUMNS: [&str; 7] = ["record", "series", "variable", "value_x", "sim_calls", "theory_cost", "prediction"];

/// One (run, seed) result.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRow {
    pub run_id: String,
    pub seed: u64,
    pub function: String,
    pub method: String,
    pub d: usize,
    pub n: Option<u32>,
    pub n_or_m: Option<usize>,
    pub a: Option<f64>,
    pub q: Option<u64>,
    pub epsilon: f64,
    pub rho: f64,
    pub error_linf: Option<f64>,
    pub error_maxnorm: Option<f64>,
    pub success: Option<bool>,
    pub sim_calls: Option<u64>,
    pub theory_cost: Option<f64>,
    pub wall_ms: f64,
}

pub fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl RunRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.run_id.clone(),
            self.seed.to_string(),
            self.function.clone(),
            self.method.clone(),
            self.d.to_string(),
            cell(self.n),
            cell(self.n_or_m),
            cell(self.a),
            cell(self.q),
            self.epsilon.to_string(),
            self.rho.to_string(),
            cell(self.error_linf),
            cell(self.error_maxnorm),
            cell(self.success),
            cell(self.sim_calls),
            cell(self.theory_cost),
            format!("{:.3}", self.wall_ms),
        ]
    }
}

pub fn write_table<W, I>(out: W, schema: &str, header: &[&str], rows: I) -> CliResult<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = out;
    writeln!(out, "# schema: {schema}")?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

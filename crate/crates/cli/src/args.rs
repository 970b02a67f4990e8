//! Command-line surface. Every run option is a string keyed by its long
//! flag name, so the same keys work in a config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "qgrad", version, about = "Simulated quantum gradient and Hessian estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Estimate the gradient at 0, one CSV row per seed.
    Gradient(RunArgs),
    /// Dense Hessian by column-wise gradient estimation.
    Hessian(RunArgs),
    /// Sparse Hessian through random probes over S_q^d.
    SparseHessian(RunArgs),
    /// Sweep the stencil and spectral inequalities.
    VerifyBounds(RunArgs),
    /// Measured spectral form error against its bound as N grows.
    SpectralErrorSweep(RunArgs),
    /// Counted simulated calls against the theoretical cost formulas.
    QueryLedger(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gradient(_) => "gradient",
            Command::Hessian(_) => "hessian",
            Command::SparseHessian(_) => "sparse-hessian",
            Command::VerifyBounds(_) => "verify-bounds",
            Command::SpectralErrorSweep(_) => "spectral-error-sweep",
            Command::QueryLedger(_) => "query-ledger",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Gradient(a)
            | Command::Hessian(a)
            | Command::SparseHessian(a)
            | Command::VerifyBounds(a)
            | Command::SpectralErrorSweep(a)
            | Command::QueryLedger(a) => a,
        }
    }
}

macro_rules! run_args {
    ($( $(#[$meta:meta])* $field:ident => $key:literal ),* $(,)?) => {
        #[derive(Args, Debug, Clone, Default)]
        pub struct RunArgs {
            /// Flat key=value file; flags override its entries.
            #[arg(long)]
            pub config: Option<PathBuf>,
            $(
                $(#[$meta])*
                #[arg(long = $key)]
                pub $field: Option<String>,
            )*
        }

        impl RunArgs {
            /// `(key, value)` for every flag given on the command line.
            pub fn given(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $( if let Some(v) = self.$field.as_deref() { out.push(($key, v)); } )*
                out
            }
        }

        /// Keys accepted in config files and as flags.
        pub const KEYS: &[&str] = &[$($key),*];
    };
}

run_args! {
    /// Single seed.
    seed => "seed",
    /// Seed count (0..k) or comma-separated list.
    seeds => "seeds",
    /// Output CSV path; stdout when absent.
    out => "out",
    /// Seeds run concurrently.
    jobs => "jobs",
    /// Corpus member, `name[:params]`.
    function => "function",
    /// spectral or findiff.
    method => "method",
    epsilon => "epsilon",
    rho => "rho",
    /// Bound M on the gradient or Hessian entries.
    bound => "bound",
    /// Spectral sample count N.
    samples => "samples",
    /// Spectral circle radius delta.
    delta => "delta",
    kappa => "kappa",
    /// Analyticity radius r.
    radius => "radius",
    /// Stencil half-width m.
    half_width => "half-width",
    /// Stencil step a.
    scale => "scale",
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    scaled_probes => "scaled-probes",
    /// Prime modulus q.
    modulus => "modulus",
    modulus_constant => "modulus-constant",
    repetition_constant => "repetition-constant",
    probe_constant => "probe-constant",
    probes => "probes",
    measurement_constant => "measurement-constant",
    measurements => "measurements",
    /// Nonzeros per row and column.
    sparsity => "sparsity",
    /// Nonzeros in total.
    nonzeros => "nonzeros",
    /// auto, full or product.
    path => "path",
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    shrink_probes => "shrink-probes",
    /// e, 2 or 10.
    log_base => "log-base",
    /// Largest simulated state, in amplitudes.
    amplitude_cap => "amplitude-cap",
    /// Binary oracle accuracy in the cost model.
    eta => "eta",
    /// Inclusive half-width range, `lo..hi`.
    m_range => "m-range",
    /// Extra exponents k above 2m in the coefficient sweep.
    k_span => "k-span",
    /// Inclusive sample-count range, `lo..hi`.
    n_range => "n-range",
    /// Stencil arguments for the 1-D error check, comma-separated.
    x_values => "x-values",
    /// Grid points sampled by the multivariate check.
    fraction_samples => "fraction-samples",
    /// Dimensions for the ledger's d series, comma-separated.
    dims => "dims",
    /// Dimensions for the ledger's sparse series.
    sparse_dims => "sparse-dims",
    /// Accuracies for the ledger's epsilon series.
    epsilons => "epsilons",
}

//! Classical simulation of phase-oracle gradient and Hessian estimation.
//!
//! The pipeline: a [`oracle::FunctionOracle`] is wrapped into a phase field
//! over a dyadic or modular grid (via the spectral or finite-difference
//! forms), the field is loaded into a [`sampler::StateVector`], transformed,
//! and sampled. Every simulated oracle application is tallied on a
//! [`oracle::QueryLedger`].

pub mod config;
pub mod corpus;
pub mod error;
pub mod findiff;
pub mod gradient;
pub mod grid;
pub mod hessian;
pub mod oracle;
pub mod sampler;
pub mod spectral;

pub use config::{EstimatorConfig, SparsePath};
pub use error::{Error, Result};

/// Seeded generator used by every randomized routine.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Build the generator for a run seed.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

/// Logarithm used in repetition counts and probe budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "ln" | "natural" => Ok(LogBase::Natural),
            "2" | "log2" => Ok(LogBase::Two),
            "10" | "log10" => Ok(LogBase::Ten),
            other => Err(Error::Parameter(format!("unknown log base {other:?}"))),
        }
    }
}

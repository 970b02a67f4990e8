use crate::sampler::DEFAULT_AMPLITUDE_CAP;
use crate::LogBase;

/// How the sparse estimator simulates each probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SparsePath {
    /// Full state when `d <= 4` and it fits under the cap, product state otherwise.
    #[default]
    Auto,
    Full,
    Product,
}

impl std::str::FromStr for SparsePath {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "auto" => Ok(SparsePath::Auto),
            "full" => Ok(SparsePath::Full),
            "product" => Ok(SparsePath::Product),
            other => Err(crate::Error::Parameter(format!("unknown sparse path {other:?}"))),
        }
    }
}

/// Tunable constants and parameter overrides shared by every estimator.
/// `None` means "derive from the job and the oracle metadata".
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// `c_T` in `T = ceil(c_T log(d / rho))`.
    pub repetition_constant: f64,
    pub log_base: LogBase,
    pub amplitude_cap: usize,
    /// Accuracy of the binary oracles; enters only the theoretical cost.
    pub eta: f64,

    pub n_samples: Option<usize>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub radius: Option<f64>,

    pub half_width: Option<usize>,
    pub scale: Option<f64>,
    /// Use the scaled probe `y = (a/2) e_i` in the finite-difference
    /// dense Hessian instead of unit probes.
    pub scaled_probes: bool,

    /// `c_q` in `q = nextprime(ceil(c_q M / eps))`.
    pub modulus_constant: f64,
    pub modulus: Option<u64>,
    /// `c_k` in `k = ceil(c_k s log(q d))`.
    pub probe_constant: f64,
    pub probes: Option<usize>,
    /// `c_R` in `R = ceil(c_R log d)` measurements per probe.
    pub measurement_constant: f64,
    pub measurements: Option<usize>,
    pub sparse_path: SparsePath,
    /// Shrink sparse probes by `alpha s` (and scale the phase to match).
    pub shrink_probes: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            repetition_constant: 3.0,
            log_base: LogBase::Natural,
            amplitude_cap: DEFAULT_AMPLITUDE_CAP,
            eta: 0.01,
            n_samples: None,
            delta: None,
            kappa: None,
            radius: None,
            half_width: None,
            scale: None,
            scaled_probes: false,
            modulus_constant: 4.0,
            modulus: None,
            probe_constant: 2.0,
            probes: None,
            measurement_constant: 2.0,
            measurements: None,
            sparse_path: SparsePath::Auto,
            shrink_probes: false,
        }
    }
}

impl EstimatorConfig {
    /// `ceil(c log(x))`, at least 1.
    pub fn ceil_log(&self, c: f64, x: f64) -> usize {
        (c * self.log_base.log(x)).ceil().max(1.0) as usize
    }

    /// `T = ceil(c_T log(d / rho))`.
    pub fn repetitions(&self, d: usize, rho: f64) -> usize {
        self.ceil_log(self.repetition_constant, d as f64 / rho)
    }
}

//! Hessian estimation: dense by column-wise gradient estimation of
//! difference functions, sparse by random probes over `S_q^d` and
//! modular row recovery.

mod dense;
mod sparse;
mod zq;

pub use dense::{estimate_hessian_dense, plan_dense, DenseHessianPlan, DenseHessianResult};
pub use sparse::{
    estimate_hessian_sparse, plan_sparse, sparse_probe_measure, ProbeKind, SparseHessianResult,
    SparseRecoveryParams, SEPARABILITY_TOLERANCE,
};
pub use zq::{
    apply_mod, next_prime, recover_row, recover_rows, recover_sparse_rows, RowRecovery, ZqMatrix, PRIME_SEARCH_WINDOW,
};

use crate::config::EstimatorConfig;
use crate::error::{Error, Result};
use crate::findiff::{second_order_coeffs, StencilKind};
use crate::gradient::{spectral_params, stencil_half_width, FormEvaluator, FormPlan};
use crate::oracle::FunctionOracle;
use crate::spectral::{FormKind, SpectralKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMethod {
    SpectralDense,
    FindiffDense,
    SpectralSparse,
    FindiffSparse,
}

impl HessianMethod {
    pub fn is_sparse(self) -> bool {
        matches!(self, HessianMethod::SpectralSparse | HessianMethod::FindiffSparse)
    }

    pub fn is_spectral(self) -> bool {
        matches!(self, HessianMethod::SpectralDense | HessianMethod::SpectralSparse)
    }
}

impl std::str::FromStr for HessianMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" | "spectral-dense" => Ok(HessianMethod::SpectralDense),
            "findiff" | "findiff-dense" => Ok(HessianMethod::FindiffDense),
            "spectral-sparse" => Ok(HessianMethod::SpectralSparse),
            "findiff-sparse" => Ok(HessianMethod::FindiffSparse),
            other => Err(Error::Parameter(format!("unknown Hessian method {other:?}"))),
        }
    }
}

impl std::fmt::Display for HessianMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HessianMethod::SpectralDense => "spectral-dense",
            HessianMethod::FindiffDense => "findiff-dense",
            HessianMethod::SpectralSparse => "spectral-sparse",
            HessianMethod::FindiffSparse => "findiff-sparse",
        })
    }
}

/// Declared sparsity of the Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sparsity {
    #[default]
    None,
    /// At most `s` nonzeros per row and column.
    PerRow(usize),
    /// At most `m` nonzeros in total.
    Total(usize),
}

#[derive(Debug, Clone)]
pub struct HessianJob {
    pub oracle: FunctionOracle,
    pub method: HessianMethod,
    pub epsilon: f64,
    pub rho: f64,
    /// `M` with `|H_f(0)|_max <= M`. Dense paths default to the declared
    /// Hessian bound; sparse paths to twice it, so `H / M` fits the
    /// symmetric residue range.
    pub bound: Option<f64>,
    pub sparsity: Sparsity,
    pub config: EstimatorConfig,
}

impl HessianJob {
    pub fn new(oracle: FunctionOracle, method: HessianMethod, epsilon: f64, rho: f64) -> Self {
        Self {
            oracle,
            method,
            epsilon,
            rho,
            bound: None,
            sparsity: Sparsity::None,
            config: EstimatorConfig::default(),
        }
    }

    pub fn with_sparsity(mut self, sparsity: Sparsity) -> Self {
        self.sparsity = sparsity;
        self
    }

    pub(crate) fn declared_bound(&self) -> Result<f64> {
        self.oracle.info().hessian_bound.ok_or_else(|| {
            Error::Parameter(format!("{} declares no Hessian bound M", self.oracle.name()))
        })
    }
}

/// Second-order form for a job: spectral parameters, or the stencil
/// half-width with step `a` (override, Gevrey-free probe scale otherwise).
pub(crate) fn hessian_form(
    oracle: &FunctionOracle,
    config: &EstimatorConfig,
    epsilon: f64,
    spectral: bool,
    default_scale: impl FnOnce(usize) -> f64,
) -> Result<FormPlan> {
    if spectral {
        Ok(FormPlan::Spectral(spectral_params(oracle, config, epsilon, FormKind::Hessian)?))
    } else {
        let m = stencil_half_width(oracle, config, epsilon, StencilKind::SecondOrder)?;
        let a = config.scale.unwrap_or_else(|| default_scale(m));
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Parameter(format!("stencil step must be positive, got {a}")));
        }
        Ok(FormPlan::FiniteDifference { m, a })
    }
}

pub(crate) fn form_evaluator(form: &FormPlan) -> Result<FormEvaluator> {
    Ok(match form {
        FormPlan::Spectral(p) => FormEvaluator::Spectral(SpectralKernel::new(*p, FormKind::Hessian)?),
        FormPlan::FiniteDifference { m, .. } => FormEvaluator::Stencil(second_order_coeffs(*m)?),
    })
}

/// Step of the form argument: 1 for spectral, `a` for stencils.
pub(crate) fn form_step(form: &FormPlan) -> f64 {
    match form {
        FormPlan::Spectral(_) => 1.0,
        FormPlan::FiniteDifference { a, .. } => *a,
    }
}

//! Gradient estimation by Fourier sampling of `2^(n_eps) F(a x)` over `G_n^d`,
//! where `F` is the spectral form or a first-order stencil.

use num_complex::Complex64;
use rand::Rng;

use crate::config::EstimatorConfig;
use crate::error::{Error, Result};
use crate::findiff::{
    first_order_coeffs, gevrey_scale, probe_scale, select_findiff_params, StencilCoeffs, StencilKind,
};
use crate::grid::GridSpec;
use crate::oracle::{cost_of_phase_oracle, CostInput, CostModel, FunctionOracle, LedgerSnapshot};
use crate::sampler::jordan_sample;
use crate::spectral::{estimate_kappa, select_n, FormKind, SpectralKernel, SpectralParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Spectral,
    FiniteDifference,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Method::Spectral),
            "findiff" | "finite-difference" => Ok(Method::FiniteDifference),
            other => Err(Error::Parameter(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Spectral => "spectral",
            Method::FiniteDifference => "findiff",
        })
    }
}

/// Register sizing: `n_eps = ceil(log2(4 / (a eps)))`, `n_M = ceil(log2(3 a M))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JordanBits {
    pub n_eps: u32,
    pub n_m: i32,
    pub n: u32,
    pub a: f64,
}

impl JordanBits {
    pub fn new(epsilon: f64, a: f64, bound: f64, warnings: &mut Vec<String>) -> Result<Self> {
        if !(epsilon > 0.0 && a > 0.0 && bound > 0.0) {
            return Err(Error::Parameter(format!(
                "need eps, a, M > 0 (eps = {epsilon}, a = {a}, M = {bound})"
            )));
        }
        let raw_eps = (4.0 / (a * epsilon)).log2().ceil();
        let n_eps = if raw_eps < 1.0 {
            warnings.push(format!(
                "eps = {epsilon} >= 4/a = {}: n_eps clamped from {raw_eps} to 1",
                4.0 / a
            ));
            1
        } else {
            raw_eps as u32
        };
        let n_m = (3.0 * a * bound).log2().ceil() as i32;
        let n = n_eps as i64 + n_m as i64;
        if n < 1 {
            return Err(Error::Parameter(format!(
                "register has n = {n} bits; increase M or decrease eps"
            )));
        }
        Ok(Self {
            n_eps,
            n_m,
            n: n as u32,
            a,
        })
    }

    /// Phase multiplier `2^n_eps`.
    pub fn phase_scale(&self) -> f64 {
        (self.n_eps as f64).exp2()
    }

    /// Decode spacing `2^(-n_eps) / a`.
    pub fn resolution(&self) -> f64 {
        (-(self.n_eps as f64)).exp2() / self.a
    }
}

/// `(grid value of label) * 2^n_M / a`.
pub fn decode_axis(grid: &GridSpec, label: i64, n_m: i32, a: f64) -> Result<f64> {
    Ok(grid.label_to_value(label)? * (n_m as f64).exp2() / a)
}

#[derive(Debug, Clone)]
pub struct GradientJob {
    pub oracle: FunctionOracle,
    pub method: Method,
    pub epsilon: f64,
    pub rho: f64,
    /// `M` with `|grad f(0)|_inf <= M`; defaults to the oracle's declared bound.
    pub bound: Option<f64>,
    pub config: EstimatorConfig,
}

impl GradientJob {
    pub fn new(oracle: FunctionOracle, method: Method, epsilon: f64, rho: f64) -> Self {
        Self {
            oracle,
            method,
            epsilon,
            rho,
            bound: None,
            config: EstimatorConfig::default(),
        }
    }
}

/// The derivative form evaluated at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum FormPlan {
    Spectral(SpectralParams),
    FiniteDifference { m: usize, a: f64 },
}

impl FormPlan {
    /// `N` or `m`.
    pub fn size(&self) -> usize {
        match self {
            FormPlan::Spectral(p) => p.n_samples,
            FormPlan::FiniteDifference { m, .. } => *m,
        }
    }

    pub(crate) fn cost_model(&self, stencil: Option<&StencilCoeffs>) -> CostModel {
        match (self, stencil) {
            (FormPlan::Spectral(p), _) => CostModel::Spectral {
                n_samples: p.n_samples,
                delta: p.delta,
            },
            (FormPlan::FiniteDifference { a, .. }, Some(c)) => CostModel::FiniteDifference {
                points: c.points(),
                abs_coeff_sum: c.abs_sum(),
                a: *a,
            },
            (FormPlan::FiniteDifference { .. }, None) => unreachable!("stencil required"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientPlan {
    pub bits: JordanBits,
    pub form: FormPlan,
    pub repetitions: usize,
    pub bound: f64,
    pub warnings: Vec<String>,
}

pub(crate) fn validate_accuracy(epsilon: f64, rho: f64, bound: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < bound) {
        return Err(Error::Parameter(format!(
            "need 0 < eps < M, got eps = {epsilon}, M = {bound}"
        )));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Parameter(format!("need 0 < rho < 1, got {rho}")));
    }
    Ok(())
}

/// Spectral parameters for a form, resolving `r`, `kappa`, `delta`, `N`
/// from overrides, then metadata, then sampling (kappa only).
pub(crate) fn spectral_params(
    oracle: &FunctionOracle,
    config: &EstimatorConfig,
    epsilon: f64,
    kind: FormKind,
) -> Result<SpectralParams> {
    let r = config
        .radius
        .or(oracle.info().radius)
        .ok_or_else(|| Error::Parameter(format!("{} declares no radius r; pass one", oracle.name())))?;
    let (r_tilde, default_delta) = match kind {
        FormKind::Gradient => (2.0 * r, r),
        FormKind::Hessian => (2.0 * r / 3.0, r / 3.0),
    };
    let delta = config.delta.unwrap_or(default_delta);
    let kappa = match config.kappa.or(oracle.info().kappa) {
        Some(k) => k,
        None => {
            // Probe the all-(1/2) direction, the largest the grid reaches.
            let x = vec![0.5; oracle.d()];
            estimate_kappa(oracle, &x, r_tilde, 64)
        }
    };
    let n_samples = match config.n_samples {
        Some(n) => n,
        None => select_n(epsilon, delta, r_tilde, kappa, kind)?,
    };
    SpectralParams::new(n_samples, delta, r_tilde, kappa)
}

/// Stencil half-width: the override, else `m = ceil(log(d B / eps))`, capped
/// for polynomials at the smallest `m` whose stencil is exact on them.
pub(crate) fn stencil_half_width(
    oracle: &FunctionOracle,
    config: &EstimatorConfig,
    epsilon: f64,
    kind: StencilKind,
) -> Result<usize> {
    if let Some(m) = config.half_width {
        return Ok(m);
    }
    let info = oracle.info();
    let b = info.derivative_bound.unwrap_or(1.0);
    let radius = info.domain_radius.unwrap_or(1.0);
    let m = select_findiff_params(oracle.d(), b, epsilon, radius, config.log_base)?.m;
    let exact = info.degree.map(|deg| match kind {
        // First-order stencils are exact up to degree 2m, second-order up to 2m+1.
        StencilKind::FirstOrder => deg.div_ceil(2),
        StencilKind::SecondOrder => (deg + 1) / 2,
    });
    Ok(exact.map_or(m, |e| m.min(e)).max(1))
}

pub fn plan(job: &GradientJob) -> Result<GradientPlan> {
    let oracle = &job.oracle;
    let d = oracle.d();
    let bound = job
        .bound
        .or(oracle.info().gradient_bound)
        .ok_or_else(|| Error::Parameter(format!("{} declares no gradient bound M", oracle.name())))?;
    validate_accuracy(job.epsilon, job.rho, bound)?;
    let cfg = &job.config;
    let mut warnings = Vec::new();
    let form = match job.method {
        Method::Spectral => FormPlan::Spectral(spectral_params(oracle, cfg, job.epsilon, FormKind::Gradient)?),
        Method::FiniteDifference => {
            let info = oracle.info();
            let radius = info.domain_radius.unwrap_or(1.0);
            let m = stencil_half_width(oracle, cfg, job.epsilon, StencilKind::FirstOrder)?;
            let a = match (cfg.scale, info.gevrey) {
                (Some(a), _) => a,
                (None, Some(c)) => gevrey_scale(c, m, d, job.epsilon)?,
                (None, None) => probe_scale(m, d, radius),
            };
            FormPlan::FiniteDifference { m, a }
        }
    };
    let a = match form {
        FormPlan::Spectral(_) => 1.0,
        FormPlan::FiniteDifference { a, .. } => a,
    };
    let bits = JordanBits::new(job.epsilon, a, bound, &mut warnings)?;
    GridSpec::new(bits.n, d)?;
    crate::sampler::Lattice::Dyadic(GridSpec::new(bits.n, d)?).checked_size(cfg.amplitude_cap)?;
    Ok(GradientPlan {
        bits,
        form,
        repetitions: cfg.repetitions(d, job.rho),
        bound,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub g: Vec<f64>,
    pub labels: Vec<i64>,
    pub plan: GradientPlan,
    pub ledger: LedgerSnapshot,
}

/// A form evaluator shared by the gradient and Hessian pipelines.
pub(crate) enum FormEvaluator {
    Spectral(SpectralKernel),
    Stencil(StencilCoeffs),
}

impl FormEvaluator {
    pub(crate) fn apply(&self, oracle: &FunctionOracle, x: &[f64], buf: &mut Vec<Complex64>) -> Result<f64> {
        match self {
            FormEvaluator::Spectral(k) => k.apply(oracle, x, buf),
            FormEvaluator::Stencil(c) => Ok(c.apply_with(oracle, x, buf)),
        }
    }

    pub(crate) fn stencil(&self) -> Option<&StencilCoeffs> {
        match self {
            FormEvaluator::Stencil(c) => Some(c),
            FormEvaluator::Spectral(_) => None,
        }
    }
}

pub fn estimate_gradient<R: Rng + ?Sized>(job: &GradientJob, rng: &mut R) -> Result<GradientResult> {
    let plan = plan(job)?;
    let oracle = job.oracle.with_fresh_ledger();
    let d = oracle.d();
    let bits = plan.bits;
    let evaluator = match &plan.form {
        FormPlan::Spectral(p) => FormEvaluator::Spectral(SpectralKernel::new(*p, FormKind::Gradient)?),
        FormPlan::FiniteDifference { m, .. } => FormEvaluator::Stencil(first_order_coeffs(*m)?),
    };
    let grid = GridSpec::new(bits.n, d)?;
    let scale = bits.phase_scale();
    let mut scaled = vec![0.0; d];
    let mut buf = Vec::new();
    let sample = jordan_sample(
        grid,
        |x| {
            for (s, &v) in scaled.iter_mut().zip(x) {
                *s = bits.a * v;
            }
            Ok(scale * evaluator.apply(&oracle, &scaled, &mut buf)?)
        },
        plan.repetitions,
        job.config.amplitude_cap,
        rng,
    )?;
    let g = sample
        .median
        .iter()
        .map(|&l| decode_axis(&grid, l, bits.n_m, bits.a))
        .collect::<Result<Vec<f64>>>()?;
    let limit = (bits.n_m as f64).exp2() / (2.0 * bits.a);
    debug_assert!(g.iter().all(|v| v.abs() <= limit));

    let ledger = oracle.ledger();
    ledger.record_oracle_calls(plan.repetitions as u64);
    let cost = cost_of_phase_oracle(&CostInput {
        model: plan.form.cost_model(evaluator.stencil()),
        epsilon: job.epsilon,
        eta: job.config.eta,
        repetitions: plan.repetitions as u64,
    })?;
    ledger.record_theoretical_cost(cost.total);
    let snapshot = ledger.snapshot();
    job.oracle.ledger().absorb(&snapshot);
    Ok(GradientResult {
        g,
        labels: sample.median,
        plan,
        ledger: snapshot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::rng_from_seed;

    #[test]
    fn register_sizing_examples() {
        let mut w = Vec::new();
        let b = JordanBits::new(0.5, 1.0, 1.0, &mut w).unwrap();
        assert_eq!((b.n_eps, b.n_m, b.n), (3, 2, 5));
        assert!(w.is_empty());
        let b = JordanBits::new(4.0, 1.0, 8.0, &mut w).unwrap();
        assert_eq!(b.n_eps, 1);
        assert_eq!(w.len(), 1);
        assert!(b.resolution() <= 1.0);
        let b = JordanBits::new(0.1, 1.0, 1.0, &mut Vec::new()).unwrap();
        assert!(b.resolution() <= 0.1 / 4.0);
    }

    #[test]
    fn repetition_count_uses_natural_log() {
        assert_eq!(EstimatorConfig::default().repetitions(2, 0.1), 9);
    }

    #[test]
    fn decode_examples() {
        let g = GridSpec::new(2, 1).unwrap();
        // label 0 sits at 1/8; with n_M = 1 the decode is 1/4.
        assert_eq!(decode_axis(&g, 0, 1, 1.0).unwrap(), 0.25);
        let g3 = GridSpec::new(3, 1).unwrap();
        // label 1 sits at 3/16 = 0.1875; n_M = 0 gives it back.
        assert_eq!(decode_axis(&g3, 1, 0, 1.0).unwrap(), 0.1875);
        let top = decode_axis(&g3, g3.min_label(), 2, 0.5).unwrap();
        assert!(top.abs() <= 4.0 / (2.0 * 0.5));
    }

    #[test]
    fn exact_linear_recovery() {
        // eps = 0.5, M = 1 gives n = 5, n_M = 2: the decoder reaches the odd
        // multiples of 1/16.
        let g = [0.5625, -0.1875];
        let oracle = FunctionOracle::new("lin", 2, move |z: &[Complex64]| z[0] * g[0] + z[1] * g[1])
            .with_info(crate::oracle::AnalyticInfo {
                radius: Some(1.0),
                kappa: Some(0.75),
                gradient_bound: Some(1.0),
                real_on_real: true,
                ..Default::default()
            });
        let job = GradientJob::new(oracle, Method::Spectral, 0.5, 0.1);
        for seed in 0..10 {
            let r = estimate_gradient(&job, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(r.g, g.to_vec());
            assert_eq!(r.ledger.simulated_oracle_calls, 9);
        }
    }

    #[test]
    fn ledger_matches_cost_formula() {
        let job = GradientJob::new(corpus::linear_d3(), Method::Spectral, 0.1, 0.1);
        let r = estimate_gradient(&job, &mut rng_from_seed(3)).unwrap();
        let FormPlan::Spectral(p) = r.plan.form else { panic!() };
        let per = cost_of_phase_oracle(&CostInput {
            model: CostModel::Spectral {
                n_samples: p.n_samples,
                delta: p.delta,
            },
            epsilon: 0.1,
            eta: 0.01,
            repetitions: 1,
        })
        .unwrap()
        .per_application;
        assert_eq!(r.plan.repetitions, 11);
        assert!((r.ledger.theoretical_cost - 11.0 * per).abs() < 1e-9);
        let points = 1u64 << (3 * r.plan.bits.n);
        assert_eq!(r.ledger.pointwise_evaluations, points * p.n_samples as u64);
        assert_eq!(job.oracle.ledger().snapshot(), r.ledger);
    }

    #[test]
    fn zero_function_decodes_to_nearest_zero() {
        let zero = FunctionOracle::new("zero", 2, |_: &[Complex64]| Complex64::new(0.0, 0.0))
            .with_info(crate::oracle::AnalyticInfo {
                radius: Some(1.0),
                kappa: Some(0.0),
                gradient_bound: Some(1.0),
                ..Default::default()
            });
        let job = GradientJob::new(zero, Method::Spectral, 0.25, 0.2);
        let r = estimate_gradient(&job, &mut rng_from_seed(0)).unwrap();
        let grid = GridSpec::new(r.plan.bits.n, 1).unwrap();
        let nearest = decode_axis(&grid, grid.nearest_label(0.0), r.plan.bits.n_m, 1.0).unwrap();
        for v in &r.g {
            assert!((v.abs() - nearest.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_jobs_are_rejected() {
        let mut job = GradientJob::new(corpus::poly_d2(), Method::Spectral, 0.1, 1.5);
        assert!(plan(&job).is_err());
        job.rho = 0.1;
        job.epsilon = 2.0;
        assert!(plan(&job).is_err());
        job.epsilon = 0.001;
        job.config.amplitude_cap = 1 << 10;
        assert!(matches!(plan(&job), Err(Error::Resource { .. })));
    }

    #[test]
    fn finite_difference_path_is_accurate() {
        let mut job = GradientJob::new(corpus::poly_d2(), Method::FiniteDifference, 0.1, 0.1);
        job.config.half_width = Some(2);
        let r = estimate_gradient(&job, &mut rng_from_seed(11)).unwrap();
        let truth = &job.oracle.truth().unwrap().gradient;
        for (a, b) in r.g.iter().zip(truth) {
            assert!((a - b).abs() <= 0.1, "{a} vs {b}");
        }
    }
}

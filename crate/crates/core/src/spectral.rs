//! Derivatives from circle samples: the `n`-th Taylor coefficient of
//! `h(tau)` is estimated by `c_n / delta^n` with
//! `c_n = (1/N) sum_k w^(-kn) h(delta w^k)` and `w = exp(-2 pi i / N)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::oracle::FunctionOracle;

/// Relative tolerance on the imaginary residue of a real-valued form.
pub const REALITY_TOLERANCE: f64 = 1e-8;

/// Accuracy divisor in the gradient-to-oracle reduction, `8 * 42 * pi`.
pub const ORACLE_ACCURACY_DIVISOR: f64 = 8.0 * 42.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub n_samples: usize,
    pub delta: f64,
    pub r_tilde: f64,
    pub kappa: f64,
}

impl SpectralParams {
    pub fn new(n_samples: usize, delta: f64, r_tilde: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            n_samples,
            delta,
            r_tilde,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    /// Defaults of the gradient form: `r_tilde = 2 r`, `delta = r`.
    pub fn for_gradient(r: f64, kappa: f64, n_samples: usize) -> Result<Self> {
        Self::new(n_samples, r, 2.0 * r, kappa)
    }

    /// Defaults of the Hessian form: `r_tilde = 2 r / 3`, `delta = r_tilde / 2`.
    pub fn for_hessian(r: f64, kappa: f64, n_samples: usize) -> Result<Self> {
        let r_tilde = 2.0 * r / 3.0;
        Self::new(n_samples, r_tilde / 2.0, r_tilde, kappa)
    }

    pub fn with_samples(self, n_samples: usize) -> Result<Self> {
        Self::new(n_samples, self.delta, self.r_tilde, self.kappa)
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Parameter(format!(
                "need N >= 2 circle samples, got {}",
                self.n_samples
            )));
        }
        if !(self.delta > 0.0 && self.delta < self.r_tilde && self.r_tilde.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < delta < r_tilde, got delta = {}, r_tilde = {}",
                self.delta, self.r_tilde
            )));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::Parameter(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        Ok(())
    }

    fn ratio(&self) -> f64 {
        self.delta / self.r_tilde
    }
}

/// Which real form a kernel evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// `F(x) ~ grad f(0) . x`.
    Gradient,
    /// `~ z^T H_f(0) z`.
    Hessian,
}

impl FormKind {
    fn order(self) -> usize {
        match self {
            FormKind::Gradient => 1,
            FormKind::Hessian => 2,
        }
    }

    /// `n!`, turning the coefficient into the derivative form.
    fn scale(self) -> f64 {
        match self {
            FormKind::Gradient => 1.0,
            FormKind::Hessian => 2.0,
        }
    }
}

/// `c_n / delta^n` for a scalar function sampled on the circle of radius delta.
pub fn spectral_coeff<H>(mut h: H, params: &SpectralParams, order: usize) -> Result<Complex64>
where
    H: FnMut(Complex64) -> Complex64,
{
    params.validate()?;
    if order >= params.n_samples {
        return Err(Error::Parameter(format!(
            "order {order} must be below N = {}",
            params.n_samples
        )));
    }
    let n = params.n_samples;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let root = Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64);
        let weight = Complex64::from_polar(1.0, 2.0 * PI * ((k * order) % n) as f64 / n as f64);
        acc += weight * h(root * params.delta);
    }
    Ok(acc / (n as f64 * params.delta.powi(order as i32)))
}

/// [`spectral_coeff`] for `h(tau) = f(tau x)`.
pub fn spectral_coeff_along(
    oracle: &FunctionOracle,
    x: &[f64],
    params: &SpectralParams,
    order: usize,
) -> Result<Complex64> {
    let mut z = vec![Complex64::new(0.0, 0.0); x.len()];
    spectral_coeff(
        |tau| {
            for (zj, &xj) in z.iter_mut().zip(x) {
                *zj = tau * xj;
            }
            oracle.evaluate(&z)
        },
        params,
        order,
    )
}

/// Precomputed circle points and weights for repeated form evaluations.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    params: SpectralParams,
    kind: FormKind,
    points: Vec<Complex64>,
    weights: Vec<Complex64>,
}

impl SpectralKernel {
    pub fn new(params: SpectralParams, kind: FormKind) -> Result<Self> {
        params.validate()?;
        let n = params.n_samples;
        let order = kind.order();
        if order >= n {
            return Err(Error::Parameter(format!(
                "the {kind:?} form needs N > {order}, got {n}"
            )));
        }
        let norm = kind.scale() / (n as f64 * params.delta.powi(order as i32));
        let points = (0..n)
            .map(|k| Complex64::from_polar(params.delta, -2.0 * PI * k as f64 / n as f64))
            .collect();
        let weights = (0..n)
            .map(|k| {
                Complex64::from_polar(norm, 2.0 * PI * ((k * order) % n) as f64 / n as f64)
            })
            .collect();
        Ok(Self {
            params,
            kind,
            points,
            weights,
        })
    }

    pub fn params(&self) -> &SpectralParams {
        &self.params
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    /// The real form at `x`, rejecting inputs whose imaginary residue is
    /// not round-off. Counts `N` pointwise evaluations.
    pub fn apply(&self, oracle: &FunctionOracle, x: &[f64], buf: &mut Vec<Complex64>) -> Result<f64> {
        buf.clear();
        buf.resize(x.len(), Complex64::new(0.0, 0.0));
        let mut acc = Complex64::new(0.0, 0.0);
        for (point, weight) in self.points.iter().zip(&self.weights) {
            for (zj, &xj) in buf.iter_mut().zip(x) {
                *zj = point * xj;
            }
            acc += weight * oracle.evaluate_uncounted(buf);
        }
        oracle.ledger().record_evaluations(self.points.len() as u64);
        real_part(acc)
    }
}

fn real_part(v: Complex64) -> Result<f64> {
    if v.im.abs() > REALITY_TOLERANCE * (1.0 + v.re.abs()) || !v.re.is_finite() {
        return Err(Error::RealityViolation {
            imag: v.im,
            real: v.re,
        });
    }
    Ok(v.re)
}

/// `F(x) = (1/(N delta)) sum_k w^(-k) f(delta w^k x)`, approximating
/// `grad f(0) . x`.
pub fn spectral_gradient_form(oracle: &FunctionOracle, x: &[f64], params: &SpectralParams) -> Result<f64> {
    SpectralKernel::new(*params, FormKind::Gradient)?.apply(oracle, x, &mut Vec::new())
}

/// `(2/(N delta^2)) sum_k w^(-2k) f(delta w^k z)`, approximating `z^T H z`.
pub fn spectral_hessian_form(oracle: &FunctionOracle, z: &[f64], params: &SpectralParams) -> Result<f64> {
    SpectralKernel::new(*params, FormKind::Hessian)?.apply(oracle, z, &mut Vec::new())
}

/// `kappa r_tilde^(-n) rho^N / (1 - rho^N)` with `rho = delta / r_tilde`.
pub fn spectral_error_bound(params: &SpectralParams, order: usize) -> Result<f64> {
    params.validate()?;
    let rho_n = params.ratio().powi(params.n_samples as i32);
    Ok(params.kappa * params.r_tilde.powi(-(order as i32)) * rho_n / (1.0 - rho_n))
}

/// Error bound of a whole form: the coefficient bound times `n!`.
pub fn form_error_bound(params: &SpectralParams, kind: FormKind) -> Result<f64> {
    Ok(kind.scale() * spectral_error_bound(params, kind.order())?)
}

/// Largest sample count [`select_n`] will return.
pub const MAX_SAMPLES: usize = 4096;

/// Smallest `N >= 2` whose form error bound is at most `eps / (8 * 42 pi)`.
pub fn select_n(epsilon: f64, delta: f64, r_tilde: f64, kappa: f64, kind: FormKind) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let target = epsilon / ORACLE_ACCURACY_DIVISOR;
    let first = kind.order() + 1;
    for n in first.max(2)..=MAX_SAMPLES {
        let params = SpectralParams::new(n, delta, r_tilde, kappa)?;
        if form_error_bound(&params, kind)? <= target {
            return Ok(n);
        }
    }
    Err(Error::Parameter(format!(
        "no N <= {MAX_SAMPLES} reaches accuracy {epsilon}"
    )))
}

/// Twice the largest modulus of `tau -> f(tau x)` over `N` points of the
/// circle `|tau| = r_tilde`; a stand-in for the circle supremum.
pub fn estimate_kappa(oracle: &FunctionOracle, x: &[f64], r_tilde: f64, n_samples: usize) -> f64 {
    let mut z = vec![Complex64::new(0.0, 0.0); x.len()];
    let n = n_samples.max(2);
    let mut best = 0.0f64;
    for k in 0..n {
        let tau = Complex64::from_polar(r_tilde, -2.0 * PI * k as f64 / n as f64);
        for (zj, &xj) in z.iter_mut().zip(x) {
            *zj = tau * xj;
        }
        best = best.max(oracle.evaluate(&z).norm());
    }
    2.0 * best
}

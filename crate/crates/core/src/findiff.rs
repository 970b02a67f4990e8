//! Central-difference stencils of degree `2m` and the inequalities that
//! bound their error.
//!
//! Coefficients are computed exactly as rationals and converted once.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::oracle::FunctionOracle;
use crate::spectral::ORACLE_ACCURACY_DIVISOR;
use crate::LogBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilKind {
    /// Approximates `grad f(0) . x`.
    FirstOrder,
    /// Approximates `x^T H_f(0) x`.
    SecondOrder,
}

/// Coefficients for offsets `-m..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilCoeffs {
    m: usize,
    kind: StencilKind,
    exact: Vec<BigRational>,
    values: Vec<f64>,
}

impl StencilCoeffs {
    fn from_exact(m: usize, kind: StencilKind, exact: Vec<BigRational>) -> Self {
        let values = exact.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        Self {
            m,
            kind,
            exact,
            values,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> StencilKind {
        self.kind
    }

    pub fn offsets(&self) -> impl Iterator<Item = i64> + '_ {
        -(self.m as i64)..=self.m as i64
    }

    fn index(&self, t: i64) -> usize {
        assert!(t.unsigned_abs() as usize <= self.m, "offset {t} outside the stencil");
        (t + self.m as i64) as usize
    }

    pub fn coeff(&self, t: i64) -> f64 {
        self.values[self.index(t)]
    }

    pub fn exact(&self, t: i64) -> &BigRational {
        &self.exact[self.index(t)]
    }

    /// Number of offsets with a nonzero coefficient.
    pub fn points(&self) -> usize {
        self.exact.iter().filter(|c| !c.is_zero()).count()
    }

    /// Total weight mass `sum_t |coeff(t)|`.
    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|c| c.abs()).sum()
    }

    /// `sum_t coeff(t) f(t x)` (real part), reusing `buf` for the argument.
    pub fn apply_with(&self, oracle: &FunctionOracle, x: &[f64], buf: &mut Vec<Complex64>) -> f64 {
        buf.clear();
        buf.resize(x.len(), Complex64::new(0.0, 0.0));
        let mut acc = 0.0;
        let mut calls = 0;
        for t in self.offsets() {
            let c = self.coeff(t);
            if c == 0.0 {
                continue;
            }
            for (zj, &xj) in buf.iter_mut().zip(x) {
                *zj = Complex64::new(t as f64 * xj, 0.0);
            }
            acc += c * oracle.evaluate_uncounted(buf).re;
            calls += 1;
        }
        oracle.ledger().record_evaluations(calls);
        acc
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn binomial(n: usize, k: usize) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn check_half_width(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Parameter("stencil half-width m must be at least 1".into()));
    }
    Ok(())
}

fn sign(t: i64) -> BigInt {
    // (-1)^(t-1)
    if (t.unsigned_abs() - 1) % 2 == 0 {
        BigInt::one()
    } else {
        -BigInt::one()
    }
}

/// `a_t = (-1)^(t-1) (2 / t^2) m!^2 / ((m+t)! (m-t)!)`, `a_0 = -sum a_t`.
pub fn second_order_coeffs(m: usize) -> Result<StencilCoeffs> {
    check_half_width(m)?;
    let mi = m as i64;
    let mf2 = factorial(m) * factorial(m);
    let mut exact: Vec<BigRational> = (-mi..=mi)
        .map(|t| {
            if t == 0 {
                return BigRational::zero();
            }
            let num = sign(t) * BigInt::from(2) * &mf2;
            let den = BigInt::from(t * t)
                * factorial((mi + t) as usize)
                * factorial((mi - t) as usize);
            BigRational::new(num, den)
        })
        .collect();
    let total: BigRational = exact.iter().fold(BigRational::zero(), |a, c| a + c);
    exact[m] = -total;
    Ok(StencilCoeffs::from_exact(m, StencilKind::SecondOrder, exact))
}

/// `c_l = ((-1)^(l-1) / l) C(m, |l|) / C(m + |l|, |l|)`, `c_0 = 0`.
pub fn first_order_coeffs(m: usize) -> Result<StencilCoeffs> {
    check_half_width(m)?;
    let mi = m as i64;
    let exact = (-mi..=mi)
        .map(|l| {
            if l == 0 {
                return BigRational::zero();
            }
            let k = l.unsigned_abs() as usize;
            let num = sign(l) * binomial(m, k);
            let den = BigInt::from(l) * binomial(m + k, k);
            BigRational::new(num, den)
        })
        .collect();
    Ok(StencilCoeffs::from_exact(m, StencilKind::FirstOrder, exact))
}

/// `sum_t coeff(t) f(t x)`.
pub fn apply_stencil(oracle: &FunctionOracle, x: &[f64], coeffs: &StencilCoeffs) -> f64 {
    coeffs.apply_with(oracle, x, &mut Vec::new())
}

/// One side-by-side comparison of an inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `sum_t |a_t t^(k+1)| <= 24 e^(-7m/6) m^(k + 3/2)` for `k >= 2m`.
pub fn coeff_bound_check(m: usize, k: usize) -> Result<BoundCheck> {
    check_half_width(m)?;
    if k < 2 * m {
        return Err(Error::Precondition(format!("need k >= 2m, got k = {k}, m = {m}")));
    }
    let coeffs = second_order_coeffs(m)?;
    let lhs_exact = coeffs
        .offsets()
        .map(|t| {
            coeffs.exact(t).abs() * BigRational::from_integer(BigInt::from(t).pow(k as u32 + 1).abs())
        })
        .fold(BigRational::zero(), |a, b| a + b);
    let lhs = lhs_exact.to_f64().unwrap_or(f64::INFINITY);
    let mf = m as f64;
    let rhs = 24.0 * (-7.0 * mf / 6.0).exp() * mf.powf(k as f64 + 1.5);
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Coefficient mass of the second-order stencil against its two claimed caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsSumCheck {
    /// `sum_{t=1}^m |a_t|`.
    pub sum: f64,
    /// `sum_{t=1}^m 1 / t^2`.
    pub inverse_squares: f64,
    /// `sum <= inverse_squares` (equality allowed, it is attained at m = 1).
    pub within_inverse_squares: bool,
    /// `sum < pi^2 / 6`.
    pub within_basel: bool,
}

impl AbsSumCheck {
    /// Only the `pi^2 / 6` cap is asserted; the intermediate comparison is
    /// reported for information.
    pub fn holds(&self) -> bool {
        self.within_basel
    }
}

pub fn abs_sum_check(m: usize) -> Result<AbsSumCheck> {
    let coeffs = second_order_coeffs(m)?;
    let sum: f64 = (1..=m as i64).map(|t| coeffs.coeff(t).abs()).sum();
    let inverse_squares: f64 = (1..=m).map(|t| 1.0 / (t * t) as f64).sum();
    Ok(AbsSumCheck {
        sum,
        inverse_squares,
        within_inverse_squares: sum <= inverse_squares,
        within_basel: sum < PI * PI / 6.0,
    })
}

/// `4 e^(-m/2) B |x|^(2m+1)`, where `B` bounds `|f^(2m+1)|` on `[-m x, m x]`.
pub fn error_bound_1d(m: usize, x: f64, deriv_bound: f64) -> Result<f64> {
    check_half_width(m)?;
    if !(deriv_bound >= 0.0) {
        return Err(Error::Parameter(format!("derivative bound must be >= 0, got {deriv_bound}")));
    }
    Ok(4.0 * (-(m as f64) / 2.0).exp() * deriv_bound * x.abs().powi(2 * m as i32 + 1))
}

/// `sum_{k >= 2m+1} r^k = r^(2m+1) / (1 - r)` with `r = 13 a c m sqrt(d)`.
pub fn error_bound_multivariate(m: usize, a: f64, c: f64, d: usize) -> Result<f64> {
    check_half_width(m)?;
    if !(a >= 0.0 && c >= 0.0) || d == 0 {
        return Err(Error::Parameter("need a, c >= 0 and d >= 1".into()));
    }
    let ratio = 13.0 * a * c * m as f64 * (d as f64).sqrt();
    if ratio >= 1.0 {
        return Err(Error::Divergence { ratio });
    }
    Ok(ratio.powi(2 * m as i32 + 1) / (1.0 - ratio))
}

/// The additive constant of the 1-D stencil error: the gap between the
/// centre weight and `-2 sum 1/j^2`, times `f(0)`. The weights satisfy
/// `a_0 = -2 sum_{j<=m} 1/j^2` identically, so this is always zero.
pub fn offset_constant(coeffs: &StencilCoeffs, f0: f64) -> f64 {
    let m = coeffs.m();
    let target = (1..=m).fold(BigRational::zero(), |acc, j| {
        acc + BigRational::new(BigInt::from(-2), BigInt::from(j * j))
    });
    let gap = (coeffs.exact(0) - target).to_f64().unwrap_or(f64::NAN);
    gap * f0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FindiffParams {
    pub m: usize,
    pub a: f64,
}

/// `m = ceil(log(d B / eps))` (at least 1) and
/// `a = min(2 / (sqrt(d) (2m+1)), 2 R / m)`.
pub fn select_findiff_params(
    d: usize,
    deriv_bound: f64,
    epsilon: f64,
    domain_radius: f64,
    log_base: LogBase,
) -> Result<FindiffParams> {
    for (what, v) in [
        ("derivative bound", deriv_bound),
        ("epsilon", epsilon),
        ("domain radius", domain_radius),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("{what} must be positive, got {v}")));
        }
    }
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    let m = (log_base.log(d as f64 * deriv_bound / epsilon).ceil().max(1.0)) as usize;
    Ok(FindiffParams {
        m,
        a: probe_scale(m, d, domain_radius),
    })
}

/// `min(2 / (sqrt(d) (2m+1)), 2 R / m)`.
pub fn probe_scale(m: usize, d: usize, domain_radius: f64) -> f64 {
    (2.0 / ((d as f64).sqrt() * (2 * m + 1) as f64)).min(2.0 * domain_radius / m as f64)
}

/// Scale for Gevrey functions:
/// `1/a = 14 c m sqrt(d) (196 * 8 * 42 pi c m sqrt(d) / eps)^(1/(2m))`.
pub fn gevrey_scale(c: f64, m: usize, d: usize, epsilon: f64) -> Result<f64> {
    check_half_width(m)?;
    if !(c > 0.0 && epsilon > 0.0) || d == 0 {
        return Err(Error::Parameter("need c, eps > 0 and d >= 1".into()));
    }
    let cms = c * m as f64 * (d as f64).sqrt();
    let inner = 196.0 * ORACLE_ACCURACY_DIVISOR * cms / epsilon;
    Ok(1.0 / (14.0 * cms * inner.powf(1.0 / (2 * m) as f64)))
}

/// `|x^2 - f_(2m)(x) - c|` for `f = exp`, in exact arithmetic. `exp(t x)`
/// is replaced by its Taylor polynomial of degree `terms`, whose remainder
/// is far below the quantities compared here for `m |x| <= 2`.
pub fn exp_stencil_error_exact(m: usize, x: &BigRational, terms: usize) -> Result<f64> {
    let coeffs = second_order_coeffs(m)?;
    let exp_taylor = |y: &BigRational| {
        let mut term = BigRational::one();
        let mut sum = BigRational::one();
        for j in 1..=terms {
            term = term * y / BigRational::from_integer(BigInt::from(j));
            sum += &term;
        }
        sum
    };
    let mut stencil = BigRational::zero();
    for t in coeffs.offsets() {
        let c = coeffs.exact(t);
        if c.is_zero() {
            continue;
        }
        let y = x * BigRational::from_integer(BigInt::from(t));
        stencil += c * exp_taylor(&y);
    }
    let err = (x * x - stencil).to_f64().unwrap_or(f64::INFINITY);
    Ok((err - offset_constant(&coeffs, 1.0)).abs())
}

/// Outcome of sampling grid points against the multivariate bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationCount {
    pub violations: usize,
    pub samples: usize,
    pub bound: f64,
    pub worst_error: f64,
}

impl ViolationCount {
    pub fn fraction(&self) -> f64 {
        self.violations as f64 / self.samples as f64
    }
}

/// Draw `samples` uniform points `x` of `a G_n^d` and count those with
/// `|f_(2m)(x) - x^T H x| > error_bound_multivariate(m, a, c, d)`, where `H`
/// is the oracle's stored Hessian and `c` its Gevrey constant.
pub fn multivariate_violations<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    m: usize,
    a: f64,
    n: u32,
    samples: usize,
    rng: &mut R,
) -> Result<ViolationCount> {
    let truth = oracle
        .truth()
        .ok_or_else(|| Error::Parameter("the oracle has no stored Hessian".into()))?;
    let c = oracle
        .info()
        .gevrey
        .ok_or_else(|| Error::Parameter("the oracle has no Gevrey constant".into()))?;
    let d = oracle.d();
    let bound = error_bound_multivariate(m, a, c, d)?;
    let grid = GridSpec::with_scale(n, d, a)?;
    let coeffs = second_order_coeffs(m)?;
    let mut x = vec![0.0; d];
    let mut buf = Vec::new();
    let mut violations = 0;
    let mut worst_error = 0.0f64;
    for _ in 0..samples {
        for xj in x.iter_mut() {
            let label = rng.gen_range(grid.min_label()..=grid.max_label());
            *xj = grid.label_to_value(label)?;
        }
        let quad: f64 = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| x[i] * truth.hessian[(i, j)] * x[j])
            .sum();
        let err = (coeffs.apply_with(oracle, &x, &mut buf) - quad).abs();
        worst_error = worst_error.max(err);
        if err > bound {
            violations += 1;
        }
    }
    Ok(ViolationCount {
        violations,
        samples,
        bound,
        worst_error,
    })
}

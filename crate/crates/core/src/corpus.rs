//! Test functions with closed-form gradients and Hessians at the origin.
//!
//! Polynomial members derive their truth from the monomial list, so the
//! stored values are exact by construction. The `fjk` family is the
//! lower-bound construction `eps * x_j * x_k * exp(-c |x|^2 / 2)`; its
//! Hessian at 0 is `eps` at `(j,k)` and `(k,j)` for `j != k` and `2 eps` at
//! `(j,j)` when `j == k`.

use std::f64::consts::E;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::oracle::{AnalyticInfo, FunctionOracle, KnownTruth};

/// A named oracle with its truth at 0.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub oracle: FunctionOracle,
    pub truth: KnownTruth,
}

impl CorpusEntry {
    fn new(oracle: FunctionOracle) -> Self {
        let truth = oracle.truth().cloned().expect("corpus oracles carry truth");
        Self {
            name: oracle.name().to_string(),
            oracle,
            truth,
        }
    }
}

/// Sum of monomials `coef * prod z_j^e_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    d: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(d: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == d), "exponent length must equal d");
        Self { d, terms }
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, exps)| {
                exps.iter()
                    .zip(z)
                    .filter(|(&e, _)| e > 0)
                    .fold(Complex64::new(*c, 0.0), |acc, (&e, zj)| match e {
                        1 => acc * zj,
                        _ => acc * zj.powu(e),
                    })
            })
            .sum()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, e)| e.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn gradient_at_zero(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for (c, e) in &self.terms {
            if e.iter().sum::<u32>() == 1 {
                let j = e.iter().position(|&p| p == 1).unwrap();
                g[j] += c;
            }
        }
        g
    }

    pub fn hessian_at_zero(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.d, self.d);
        for (c, e) in &self.terms {
            if e.iter().sum::<u32>() != 2 {
                continue;
            }
            let idx: Vec<usize> = e
                .iter()
                .enumerate()
                .flat_map(|(j, &p)| std::iter::repeat(j).take(p as usize))
                .collect();
            let (j, k) = (idx[0], idx[1]);
            if j == k {
                h[(j, j)] += 2.0 * c;
            } else {
                h[(j, k)] += c;
                h[(k, j)] += c;
            }
        }
        h
    }

    /// `sup |p|` over the closed polydisc of radius `r`, bounded termwise.
    pub fn polydisc_bound(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c.abs() * r.powi(e.iter().sum::<u32>() as i32))
            .sum()
    }

    /// `x^T A x` for a (not necessarily symmetric) matrix.
    pub fn quadratic_form(a: &DMatrix<f64>) -> Self {
        let d = a.nrows();
        let mut terms = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if a[(i, j)] != 0.0 {
                    let mut e = vec![0u32; d];
                    e[i] += 1;
                    e[j] += 1;
                    terms.push((a[(i, j)], e));
                }
            }
        }
        Self::new(d, terms)
    }
}

/// Wrap a polynomial as an oracle with truth and termwise bounds.
pub fn polynomial_oracle(
    name: &str,
    poly: Polynomial,
    gradient_bound: f64,
    hessian_bound: f64,
) -> FunctionOracle {
    let d = poly.d;
    let truth = KnownTruth {
        gradient: poly.gradient_at_zero(),
        hessian: poly.hessian_at_zero(),
    };
    let degree = poly.degree();
    let info = AnalyticInfo {
        radius: Some(1.0),
        kappa: Some(poly.polydisc_bound(1.0)),
        gradient_bound: Some(gradient_bound),
        hessian_bound: Some(hessian_bound),
        derivative_bound: Some(poly.polydisc_bound(1.0) * factorial(degree)),
        degree: Some(degree),
        gevrey: None,
        domain_radius: Some(1.0),
        real_on_real: true,
        quadratic: degree <= 2,
    };
    FunctionOracle::new(name, d, move |z: &[Complex64]| poly.eval(z))
        .with_info(info)
        .with_truth(truth)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn mono(d: usize, powers: &[(usize, u32)]) -> Vec<u32> {
    let mut e = vec![0u32; d];
    for &(j, p) in powers {
        e[j] += p;
    }
    e
}

/// Gradient `(13, -29, 7) / 128`: exactly representable by the decoder at
/// `n = 6` (`eps = 0.1`, `M = 1/4`) and at `n = 8` (`eps = 0.1`, `M = 1`).
pub fn linear_d3() -> FunctionOracle {
    let g = [13.0 / 128.0, -29.0 / 128.0, 7.0 / 128.0];
    let poly = Polynomial::new(
        3,
        g.iter()
            .enumerate()
            .map(|(j, &c)| (c, mono(3, &[(j, 1)])))
            .collect(),
    );
    polynomial_oracle("linear_d3", poly, 0.25, 0.25)
}

pub fn quad_dense_d3() -> FunctionOracle {
    let a = DMatrix::from_row_slice(3, 3, &[0.3, 0.1, -0.2, 0.1, -0.25, 0.15, -0.2, 0.15, 0.2]);
    polynomial_oracle("quad_dense_d3", Polynomial::quadratic_form(&a), 0.25, 1.0)
}

/// Integer lattice matrix behind `quad_sparse_d8`: symmetric, at most two
/// nonzeros per row, entries in `[-3, 3]`.
pub fn sparse_d8_lattice() -> DMatrix<i64> {
    let mut l = DMatrix::<i64>::zeros(8, 8);
    for &(i, j, v) in &[(0, 3, 2), (1, 6, -3), (2, 5, 1), (4, 7, 3)] {
        l[(i, j)] = v;
        l[(j, i)] = v;
    }
    l[(0, 0)] = -1;
    l[(1, 1)] = 2;
    l[(4, 4)] = -2;
    l[(6, 6)] = 0;
    l
}

/// `x^T H x / 2` with `H = L / 7`, so `H / M` lies on the `q = 7` lattice
/// for the sparse estimator's `M = 2 * hessian_bound = 1`.
pub fn quad_sparse_d8() -> FunctionOracle {
    let h = sparse_d8_lattice().map(|v| v as f64 / 7.0);
    lattice_quadratic("quad_sparse_d8", &h, 0.5)
}

/// `x^T H x / 2`, whose Hessian is `H`.
pub fn lattice_quadratic(name: &str, h: &DMatrix<f64>, hessian_bound: f64) -> FunctionOracle {
    polynomial_oracle(name, Polynomial::quadratic_form(&(h * 0.5)), 1.0, hessian_bound)
}

pub fn boolean_d4_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, 1.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 1.0,
        ],
    )
}

pub fn quad_boolean_d4() -> FunctionOracle {
    let b = boolean_d4_matrix();
    polynomial_oracle("quad_boolean_d4", Polynomial::quadratic_form(&b), 1.0, 2.0)
}

pub fn poly_d2() -> FunctionOracle {
    let d = 2;
    let poly = Polynomial::new(
        d,
        vec![
            (0.3, mono(d, &[(0, 1)])),
            (-0.7, mono(d, &[(1, 1)])),
            (0.4, mono(d, &[(0, 2)])),
            (0.5, mono(d, &[(0, 1), (1, 1)])),
            (-0.2, mono(d, &[(1, 2)])),
            (0.1, mono(d, &[(0, 3)])),
            (-0.15, mono(d, &[(0, 1), (1, 2)])),
            (0.05, mono(d, &[(1, 4)])),
        ],
    );
    polynomial_oracle("poly_d2", poly, 1.0, 1.0)
}

/// Quartic with `|H|_max = 0.24`, kept small so the dense Hessian grid
/// stays at six bits per axis.
pub fn quartic_d3() -> FunctionOracle {
    let d = 3;
    let poly = Polynomial::new(
        d,
        vec![
            (0.1, mono(d, &[(0, 1)])),
            (0.12, mono(d, &[(0, 2)])),
            (-0.08, mono(d, &[(1, 2)])),
            (0.1, mono(d, &[(2, 2)])),
            (0.05, mono(d, &[(0, 1), (1, 1)])),
            (-0.07, mono(d, &[(1, 1), (2, 1)])),
            (0.09, mono(d, &[(0, 1), (2, 1)])),
            (0.04, mono(d, &[(0, 1), (1, 1), (2, 1)])),
            (0.02, mono(d, &[(0, 4)])),
            (-0.03, mono(d, &[(0, 2), (1, 2)])),
            (0.01, mono(d, &[(2, 4)])),
        ],
    );
    polynomial_oracle("quartic_d3", poly, 0.25, 0.3)
}

/// `exp(u . x)`.
pub fn exp_linear(name: &str, u: Vec<f64>) -> FunctionOracle {
    let d = u.len();
    let l1: f64 = u.iter().map(|v| v.abs()).sum();
    let l2: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let hessian = DMatrix::from_fn(d, d, |i, j| u[i] * u[j]);
    let info = AnalyticInfo {
        radius: Some(1.0),
        kappa: Some(l1.exp()),
        gradient_bound: Some((2.0 * u.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(1.0)),
        hessian_bound: Some((2.0 * hessian.amax()).max(0.5)),
        // |(u . v)^k e^(u . x)| on the unit box, for unit directions v.
        derivative_bound: (l2 <= 1.0).then(|| l1.exp()),
        degree: None,
        gevrey: None,
        domain_radius: Some(1.0),
        real_on_real: true,
        quadratic: false,
    };
    let truth = KnownTruth {
        gradient: u.clone(),
        hessian,
    };
    FunctionOracle::new(name, d, move |z: &[Complex64]| {
        z.iter()
            .zip(&u)
            .map(|(zj, uj)| zj * *uj)
            .sum::<Complex64>()
            .exp()
    })
    .with_info(info)
    .with_truth(truth)
}

pub fn exp_d2() -> FunctionOracle {
    exp_linear("exp_d2", vec![0.6, -0.4])
}

/// `exp(0.5 x1) cos(0.3 x2)`.
pub fn expcos_d2() -> FunctionOracle {
    let info = AnalyticInfo {
        radius: Some(1.0),
        kappa: Some(0.5f64.exp() * 0.3f64.cosh()),
        gradient_bound: Some(1.0),
        hessian_bound: Some(0.5),
        derivative_bound: Some(0.5f64.exp() * 0.3f64.cosh()),
        degree: None,
        gevrey: None,
        domain_radius: Some(1.0),
        real_on_real: true,
        quadratic: false,
    };
    let truth = KnownTruth {
        gradient: vec![0.5, 0.0],
        hessian: DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, -0.09]),
    };
    FunctionOracle::new("expcos_d2", 2, |z: &[Complex64]| {
        (z[0] * 0.5).exp() * (z[1] * 0.3).cos()
    })
    .with_info(info)
    .with_truth(truth)
}

pub fn exp_1d() -> FunctionOracle {
    let info = AnalyticInfo {
        radius: Some(1.0),
        kappa: Some(E),
        gradient_bound: Some(2.0),
        hessian_bound: Some(2.0),
        derivative_bound: Some(E),
        degree: None,
        gevrey: Some(1.0),
        domain_radius: Some(1.0),
        real_on_real: true,
        quadratic: false,
    };
    let truth = KnownTruth {
        gradient: vec![1.0],
        hessian: DMatrix::from_element(1, 1, 1.0),
    };
    FunctionOracle::new("exp_1d", 1, |z: &[Complex64]| z[0].exp())
        .with_info(info)
        .with_truth(truth)
}

/// `1 / (1 - x)`, analytic only on `|x| < 1`. Its spectral error attains the
/// geometric bound exactly, unlike entire functions.
pub fn pole_1d() -> FunctionOracle {
    let info = AnalyticInfo {
        radius: Some(0.5),
        kappa: Some(2.0),
        gradient_bound: Some(2.0),
        hessian_bound: Some(4.0),
        derivative_bound: None,
        degree: None,
        gevrey: None,
        domain_radius: Some(0.5),
        real_on_real: true,
        quadratic: false,
    };
    let truth = KnownTruth {
        gradient: vec![1.0],
        hessian: DMatrix::from_element(1, 1, 2.0),
    };
    FunctionOracle::new("pole_1d", 1, |z: &[Complex64]| (Complex64::new(1.0, 0.0) - z[0]).inv())
        .with_info(info)
        .with_truth(truth)
}

/// `eps * x_j * x_k * exp(-c |x|^2 / 2)` with 1-based `j`, `k`.
pub fn fjk(j: usize, k: usize, eps: f64, c: f64, d: usize) -> Result<FunctionOracle> {
    if j == 0 || k == 0 || j > d || k > d {
        return Err(Error::Parameter(format!(
            "fjk indices ({j}, {k}) must lie in 1..={d}"
        )));
    }
    if !(eps > 0.0) || !(c >= 0.0) {
        return Err(Error::Parameter("fjk needs eps > 0 and c >= 0".into()));
    }
    let (j0, k0) = (j - 1, k - 1);
    let mut hessian = DMatrix::zeros(d, d);
    if j0 == k0 {
        hessian[(j0, j0)] = 2.0 * eps;
    } else {
        hessian[(j0, k0)] = eps;
        hessian[(k0, j0)] = eps;
    }
    let kappa = eps * (c * d as f64 / 2.0).exp();
    let info = AnalyticInfo {
        radius: Some(1.0),
        kappa: Some(kappa),
        gradient_bound: Some(1.0),
        hessian_bound: Some(2.0 * eps),
        derivative_bound: Some(kappa),
        degree: None,
        gevrey: None,
        domain_radius: Some(1.0),
        real_on_real: true,
        quadratic: false,
    };
    let truth = KnownTruth {
        gradient: vec![0.0; d],
        hessian,
    };
    let name = format!("fjk:{j},{k}:{eps}:{c}:{d}");
    Ok(FunctionOracle::new(name, d, move |z: &[Complex64]| {
        let norm2: Complex64 = z.iter().map(|v| v * v).sum();
        z[j0] * z[k0] * eps * (-norm2 * (c / 2.0)).exp()
    })
    .with_info(info)
    .with_truth(truth))
}

/// `exp(c (x1 - x2 + x3 - ...))`; every derivative of order `k` at 0 has
/// modulus `c^k`, so it meets the Gevrey condition with constant `c`.
pub fn gevrey(c: f64, d: usize) -> Result<FunctionOracle> {
    if !(c > 0.0) || d == 0 {
        return Err(Error::Parameter("gevrey needs c > 0 and d >= 1".into()));
    }
    let signs: Vec<f64> = (0..d).map(|j| if j % 2 == 0 { c } else { -c }).collect();
    let oracle = exp_linear(&format!("gevrey:{c}:{d}"), signs);
    let mut info = oracle.info().clone();
    info.gevrey = Some(c);
    Ok(oracle.with_info(info))
}

/// Every fixed member plus default instances of the parametric families.
pub fn corpus() -> Vec<CorpusEntry> {
    let mut oracles = vec![
        linear_d3(),
        quad_dense_d3(),
        quad_sparse_d8(),
        quad_boolean_d4(),
        poly_d2(),
        quartic_d3(),
        exp_d2(),
        expcos_d2(),
        exp_1d(),
        pole_1d(),
    ];
    oracles.push(fjk(1, 2, 0.1, 1.0, 2).expect("valid parameters"));
    oracles.push(fjk(2, 2, 0.1, 1.0, 3).expect("valid parameters"));
    oracles.push(gevrey(0.5, 4).expect("valid parameters"));
    oracles.into_iter().map(CorpusEntry::new).collect()
}

/// Resolve a CLI function name such as `poly_d2`, `fjk:1,2:0.1:1[:d]`, or
/// `gevrey:c[:d]`. `gevrey_d4` is an alias for `gevrey:0.5:4`.
pub fn lookup(spec: &str) -> Result<CorpusEntry> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Parameter(format!("bad number {s:?} in {spec:?}")))
    };
    let int = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::Parameter(format!("bad integer {s:?} in {spec:?}")))
    };
    let oracle = match parts[0] {
        "fjk" => {
            if parts.len() < 4 || parts.len() > 5 {
                return Err(Error::Parameter(format!(
                    "expected fjk:j,k:eps:c[:d], got {spec:?}"
                )));
            }
            let (j, k) = parts[1]
                .split_once(',')
                .ok_or_else(|| Error::Parameter(format!("expected j,k in {spec:?}")))?;
            let (j, k) = (int(j)?, int(k)?);
            let d = match parts.get(4) {
                Some(s) => int(s)?,
                None => j.max(k).max(2),
            };
            fjk(j, k, num(parts[2])?, num(parts[3])?, d)?
        }
        "gevrey" => {
            let c = num(parts.get(1).copied().unwrap_or("0.5"))?;
            let d = match parts.get(2) {
                Some(s) => int(s)?,
                None => 4,
            };
            gevrey(c, d)?
        }
        "gevrey_d4" if parts.len() == 1 => gevrey(0.5, 4)?,
        name if parts.len() == 1 => corpus()
            .into_iter()
            .find(|e| e.name == name)
            .map(|e| e.oracle)
            .ok_or_else(|| Error::Parameter(format!("unknown function {name:?}")))?,
        _ => return Err(Error::Parameter(format!("unknown function {spec:?}"))),
    };
    Ok(CorpusEntry::new(oracle))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(x: &[f64]) -> Vec<Complex64> {
        x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }

    #[test]
    fn fjk_value_matches_closed_form() {
        let f = fjk(1, 2, 0.1, 1.0, 2).unwrap();
        let v = f.evaluate(&real(&[1.0, 1.0]));
        assert!((v.re - 0.1 * (-1.0f64).exp()).abs() < 1e-15);
        let h = &f.truth().unwrap().hessian;
        assert_eq!(h[(0, 1)], 0.1);
        assert_eq!(h[(1, 0)], 0.1);
        assert_eq!(h[(0, 0)], 0.0);
    }

    #[test]
    fn boolean_hessian_is_b_plus_bt() {
        let b = boolean_d4_matrix();
        let f = quad_boolean_d4();
        assert_eq!(f.truth().unwrap().hessian, &b + b.transpose());
    }

    #[test]
    fn linear_truth_is_stored_gradient() {
        let f = linear_d3();
        assert_eq!(
            f.truth().unwrap().gradient,
            vec![13.0 / 128.0, -29.0 / 128.0, 7.0 / 128.0]
        );
    }

    #[test]
    fn sparse_lattice_is_two_sparse_and_symmetric() {
        let l = sparse_d8_lattice();
        assert_eq!(l, l.transpose());
        for i in 0..8 {
            assert!(l.row(i).iter().filter(|&&v| v != 0).count() <= 2);
        }
        let oracle = quad_sparse_d8();
        let h = &oracle.truth().unwrap().hessian;
        assert!((h[(1, 6)] + 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn lookup_parses_parameters() {
        let e = lookup("fjk:1,2:0.1:1").unwrap();
        assert_eq!(e.oracle.d(), 2);
        let e = lookup("fjk:2,3:0.2:1:5").unwrap();
        assert_eq!(e.oracle.d(), 5);
        assert_eq!(e.truth.hessian[(1, 2)], 0.2);
        assert_eq!(lookup("gevrey_d4").unwrap().oracle.d(), 4);
        assert_eq!(lookup("poly_d2").unwrap().name, "poly_d2");
        assert!(lookup("nope").is_err());
        assert!(lookup("fjk:1,9:0.1:1:3").is_err());
        assert!(lookup("fjk:1:0.1").is_err());
    }

    #[test]
    fn names_are_unique() {
        let c = corpus();
        let mut names: Vec<_> = c.iter().map(|e| e.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), c.len());
    }
}

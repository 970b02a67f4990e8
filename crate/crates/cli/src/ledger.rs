//! `query-ledger`: counted simulated calls next to the theoretical cost
//! and the asymptotic prediction, with log-log slope fits per series.

use nalgebra::DMatrix;
use qgrad::corpus::{lattice_quadratic, lookup, poly_d2};
use qgrad::gradient::{estimate_gradient, GradientJob, Method};
use qgrad::hessian::{estimate_hessian_dense, estimate_hessian_sparse, HessianJob, HessianMethod, Sparsity};
use qgrad::oracle::{FunctionOracle, LedgerSnapshot};
use qgrad::rng_from_seed;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::sweeps::least_squares_slope;
use crate::table::cell;

/// Modulus of the sparse series unless overridden.
pub const LEDGER_MODULUS: u64 = 7;

/// Row support of the sparse series.
pub const LEDGER_SPARSITY: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub record: &'static str,
    pub series: String,
    pub variable: &'static str,
    pub value_x: Option<f64>,
    pub sim_calls: Option<f64>,
    pub theory_cost: Option<f64>,
    pub prediction: Option<f64>,
}

impl LedgerRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.record.to_string(),
            self.series.clone(),
            self.variable.to_string(),
            cell(self.value_x),
            cell(self.sim_calls),
            cell(self.theory_cost),
            cell(self.prediction),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub variable: &'static str,
    /// `(x, counted calls, theoretical cost, prediction)`.
    pub points: Vec<(f64, f64, f64, f64)>,
}

impl Series {
    fn new(name: impl Into<String>, variable: &'static str) -> Self {
        Self {
            name: name.into(),
            variable,
            points: Vec::new(),
        }
    }

    fn push(&mut self, x: f64, ledger: &LedgerSnapshot, prediction: f64) {
        self.points
            .push((x, ledger.simulated_oracle_calls as f64, ledger.theoretical_cost, prediction));
    }

    /// Log-log slopes of counted calls, theoretical cost and prediction.
    pub fn slopes(&self) -> Option<(f64, f64, f64)> {
        let fit = |pick: fn(&(f64, f64, f64, f64)) -> f64| {
            let pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.0.ln(), pick(p).ln())).collect();
            least_squares_slope(&pts)
        };
        Some((fit(|p| p.1)?, fit(|p| p.2)?, fit(|p| p.3)?))
    }

    fn rows(&self) -> Vec<LedgerRow> {
        let mut rows: Vec<LedgerRow> = self
            .points
            .iter()
            .map(|&(x, calls, theory, prediction)| LedgerRow {
                record: "point",
                series: self.name.clone(),
                variable: self.variable,
                value_x: Some(x),
                sim_calls: Some(calls),
                theory_cost: Some(theory),
                prediction: Some(prediction),
            })
            .collect();
        if let Some((calls, theory, prediction)) = self.slopes() {
            rows.push(LedgerRow {
                record: "fit",
                series: self.name.clone(),
                variable: self.variable,
                value_x: None,
                sim_calls: Some(calls),
                theory_cost: Some(theory),
                prediction: Some(prediction),
            });
        }
        rows
    }
}

/// Tridiagonal quadratic used for the dense d series.
pub fn dense_series_oracle(d: usize) -> FunctionOracle {
    let h = DMatrix::from_fn(d, d, |i, j| match i.abs_diff(j) {
        0 => 0.2,
        1 => -0.1,
        _ => 0.0,
    });
    lattice_quadratic(&format!("tridiag_d{d}"), &h, 0.25)
}

/// Ring-coupled lattice `L` with two nonzeros per row (one for d = 2),
/// entries cycling through 1, 2, 3, -1, -2, -3.
pub fn ring_lattice(d: usize) -> DMatrix<i64> {
    const VALUES: [i64; 6] = [1, 2, 3, -1, -2, -3];
    let mut l = DMatrix::zeros(d, d);
    for i in 0..d {
        let j = (i + 1) % d;
        if i != j {
            l[(i, j)] = VALUES[i % VALUES.len()];
            l[(j, i)] = VALUES[i % VALUES.len()];
        }
    }
    l
}

/// `x^T H x / 2` with `H = L / q`, so `M = 1` puts it on the `q` lattice.
pub fn sparse_series_oracle(d: usize, q: u64) -> FunctionOracle {
    let h = ring_lattice(d).map(|v| v as f64 / q as f64);
    lattice_quadratic(&format!("ring_d{d}"), &h, 0.5)
}

pub fn dense_series(cfg: &RunConfig, seed: u64) -> CliResult<Series> {
    let mut series = Series::new("dense_spectral_hessian", "d");
    for &d in &cfg.dims {
        let mut job = HessianJob::new(dense_series_oracle(d), HessianMethod::SpectralDense, cfg.epsilon, cfg.rho);
        job.config = cfg.estimator.clone();
        let r = estimate_hessian_dense(&job, &mut rng_from_seed(seed))?;
        let df = d as f64;
        series.push(df, &r.ledger, df * (df / cfg.rho).ln() / cfg.epsilon);
    }
    Ok(series)
}

/// Spectral and finite-difference sparse series plus their counted ratio.
pub fn sparse_series(cfg: &RunConfig, seed: u64) -> CliResult<(Series, Series, Series)> {
    let q = cfg.estimator.modulus.unwrap_or(LEDGER_MODULUS);
    let mut spectral = Series::new("sparse_spectral", "d");
    let mut findiff = Series::new("sparse_findiff", "d");
    let mut ratio = Series::new("sparse_findiff_over_spectral", "d");
    for &d in &cfg.sparse_dims {
        let mut ledgers = Vec::new();
        for (method, series) in [
            (HessianMethod::SpectralSparse, &mut spectral),
            (HessianMethod::FindiffSparse, &mut findiff),
        ] {
            let mut job = HessianJob::new(sparse_series_oracle(d, q), method, cfg.epsilon, cfg.rho)
                .with_sparsity(Sparsity::PerRow(cfg.sparsity.unwrap_or(LEDGER_SPARSITY)));
            job.config = cfg.estimator.clone();
            job.config.modulus = Some(q);
            let r = estimate_hessian_sparse(&job, &mut rng_from_seed(seed))?;
            series.push(d as f64, &r.ledger, r.predicted_cost);
            ledgers.push(r.ledger);
        }
        let df = d as f64;
        ratio.points.push((
            df,
            ledgers[1].simulated_oracle_calls as f64 / ledgers[0].simulated_oracle_calls as f64,
            ledgers[1].theoretical_cost / ledgers[0].theoretical_cost,
            df.sqrt(),
        ));
    }
    Ok((spectral, findiff, ratio))
}

pub fn epsilon_series(cfg: &RunConfig, seed: u64) -> CliResult<Series> {
    let oracle = match &cfg.function {
        Some(name) => lookup(name).map_err(|e| CliError::Usage(e.to_string()))?.oracle,
        None => poly_d2(),
    };
    let mut series = Series::new(format!("gradient_spectral_{}", oracle.name()), "epsilon");
    let d = oracle.d() as f64;
    for &eps in &cfg.epsilons {
        let mut job = GradientJob::new(oracle.clone(), Method::Spectral, eps, cfg.rho);
        job.bound = cfg.bound;
        job.config = cfg.estimator.clone();
        let r = estimate_gradient(&job, &mut rng_from_seed(seed))?;
        series.push(eps, &r.ledger, (d / cfg.rho).ln() / eps);
    }
    Ok(series)
}

pub fn query_ledger(cfg: &RunConfig) -> CliResult<Vec<LedgerRow>> {
    let seed = cfg.seeds[0];
    let (spectral, findiff, ratio) = sparse_series(cfg, seed)?;
    let mut rows = dense_series(cfg, seed)?.rows();
    rows.extend(spectral.rows());
    rows.extend(findiff.rows());
    rows.extend(ratio.rows().into_iter().map(|r| LedgerRow {
        record: if r.record == "point" { "ratio" } else { r.record },
        ..r
    }));
    rows.extend(epsilon_series(cfg, seed)?.rows());
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qgrad::hessian::ZqMatrix;

    #[test]
    fn ring_lattice_shape() {
        let l = ring_lattice(5);
        assert_eq!(l, l.transpose());
        let z = ZqMatrix::new(7, l).unwrap();
        assert_eq!(z.max_row_support(), 2);
        assert_eq!(ring_lattice(2).iter().filter(|v| **v != 0).count(), 2);
    }

    #[test]
    fn slopes_of_power_laws() {
        let mut s = Series::new("t", "x");
        for x in [1.0f64, 2.0, 4.0] {
            s.points.push((x, x * x, 3.0 * x, 1.0 / x));
        }
        let (a, b, c) = s.slopes().unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
        assert_eq!(s.rows().last().unwrap().record, "fit");
    }
}

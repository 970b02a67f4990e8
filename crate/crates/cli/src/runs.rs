//! Seeded estimator runs: one CSV row per seed.

use std::time::Instant;

use qgrad::corpus::lookup;
use qgrad::gradient::{estimate_gradient, plan, FormPlan, GradientJob, Method};
use qgrad::hessian::{
    estimate_hessian_dense, estimate_hessian_sparse, plan_dense, plan_sparse, HessianJob, HessianMethod, Sparsity,
};
use qgrad::oracle::{FunctionOracle, LedgerSnapshot};
use qgrad::{rng_from_seed, Error};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::table::RunRow;

/// Rows in seed order plus the failures that were not data outcomes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutcome {
    pub rows: Vec<RunRow>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

/// Estimator errors that describe the data rather than the run: the row is
/// written with `success = false` and the exit code is unaffected.
pub fn is_data_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::Ambiguity { .. } | Error::Inconsistency { .. } | Error::RealityViolation { .. } | Error::Divergence { .. }
    )
}

/// Apply `work` to every seed on up to `jobs` threads; results keep seed order.
pub fn run_seeds<T, F>(seeds: &[u64], jobs: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    if seeds.is_empty() {
        return Vec::new();
    }
    let chunk = seeds.len().div_ceil(jobs.clamp(1, seeds.len()));
    let mut slots: Vec<Option<T>> = seeds.iter().map(|_| None).collect();
    let work = &work;
    std::thread::scope(|scope| {
        for (out, batch) in slots.chunks_mut(chunk).zip(seeds.chunks(chunk)) {
            scope.spawn(move || {
                for (slot, &seed) in out.iter_mut().zip(batch) {
                    *slot = Some(work(seed));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every seed ran")).collect()
}

fn oracle(cfg: &RunConfig) -> CliResult<FunctionOracle> {
    let name = cfg.function.as_deref().ok_or_else(|| CliError::Usage("missing --function".into()))?;
    Ok(lookup(name).map_err(|e| CliError::Usage(e.to_string()))?.oracle)
}

fn spectral_method(cfg: &RunConfig) -> bool {
    cfg.method.as_deref().is_none_or(|m| m == "spectral")
}

fn form_step(form: &FormPlan) -> Option<f64> {
    match form {
        FormPlan::Spectral(_) => None,
        FormPlan::FiniteDifference { a, .. } => Some(*a),
    }
}

struct Base<'a> {
    cfg: &'a RunConfig,
    function: String,
    method: String,
    d: usize,
}

impl Base<'_> {
    fn row(&self, index: usize, seed: u64) -> RunRow {
        RunRow {
            run_id: format!("{}/{index}", self.cfg.command),
            seed,
            function: self.function.clone(),
            method: self.method.clone(),
            d: self.d,
            epsilon: self.cfg.epsilon,
            rho: self.cfg.rho,
            ..RunRow::default()
        }
    }
}

fn ledger_cells(row: &mut RunRow, ledger: &LedgerSnapshot) {
    row.sim_calls = Some(ledger.simulated_oracle_calls);
    row.theory_cost = Some(ledger.theoretical_cost);
}

/// Turn per-seed results into rows, splitting data failures from run failures.
fn collect<F>(base: &Base, results: Vec<(u64, f64, qgrad::Result<RunRow>)>, fill_failure: F) -> RunOutcome
where
    F: Fn(&mut RunRow),
{
    let mut outcome = RunOutcome::default();
    for (index, (seed, wall_ms, result)) in results.into_iter().enumerate() {
        let row = match result {
            Ok(mut row) => {
                row.run_id = format!("{}/{index}", base.cfg.command);
                row.wall_ms = wall_ms;
                row
            }
            Err(e) => {
                let mut row = base.row(index, seed);
                fill_failure(&mut row);
                row.success = Some(false);
                row.wall_ms = wall_ms;
                if !is_data_failure(&e) {
                    outcome.failures.push(format!("seed {seed}: {e}"));
                }
                row
            }
        };
        outcome.rows.push(row);
    }
    outcome
}

fn timed<T>(work: impl FnOnce() -> T) -> (f64, T) {
    let start = Instant::now();
    let value = work();
    (start.elapsed().as_secs_f64() * 1e3, value)
}

pub fn run_gradient(cfg: &RunConfig) -> CliResult<RunOutcome> {
    let method = if spectral_method(cfg) { Method::Spectral } else { Method::FiniteDifference };
    let mut job = GradientJob::new(oracle(cfg)?, method, cfg.epsilon, cfg.rho);
    job.bound = cfg.bound;
    job.config = cfg.estimator.clone();
    let planned = plan(&job)?;
    let truth = job.oracle.truth().map(|t| t.gradient.clone());
    let base = Base {
        cfg,
        function: job.oracle.name().to_string(),
        method: method.to_string(),
        d: job.oracle.d(),
    };

    let results = run_seeds(&cfg.seeds, cfg.jobs, |seed| {
        let (ms, result) = timed(|| estimate_gradient(&job, &mut rng_from_seed(seed)));
        let row = result.map(|r| {
            let mut row = base.row(0, seed);
            row.n = Some(r.plan.bits.n);
            row.n_or_m = Some(r.plan.form.size());
            row.a = Some(r.plan.bits.a);
            if let Some(t) = &truth {
                let err = r.g.iter().zip(t).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                row.error_linf = Some(err);
                row.success = Some(err <= cfg.epsilon);
            }
            ledger_cells(&mut row, &r.ledger);
            row
        });
        (seed, ms, row)
    });
    let mut outcome = collect(&base, results, |row| {
        row.n = Some(planned.bits.n);
        row.n_or_m = Some(planned.form.size());
        row.a = Some(planned.bits.a);
    });
    outcome.warnings = planned.warnings;
    Ok(outcome)
}

pub fn run_hessian(cfg: &RunConfig) -> CliResult<RunOutcome> {
    let method = if spectral_method(cfg) { HessianMethod::SpectralDense } else { HessianMethod::FindiffDense };
    let mut job = HessianJob::new(oracle(cfg)?, method, cfg.epsilon, cfg.rho);
    job.bound = cfg.bound;
    job.config = cfg.estimator.clone();
    let planned = plan_dense(&job)?;
    let truth = job.oracle.truth().map(|t| t.hessian.clone());
    let base = Base {
        cfg,
        function: job.oracle.name().to_string(),
        method: method.to_string(),
        d: job.oracle.d(),
    };

    let results = run_seeds(&cfg.seeds, cfg.jobs, |seed| {
        let (ms, result) = timed(|| estimate_hessian_dense(&job, &mut rng_from_seed(seed)));
        let row = result.map(|r| {
            let mut row = base.row(0, seed);
            row.n = Some(r.plan.bits.n);
            row.n_or_m = Some(r.plan.form.size());
            row.a = Some(r.plan.bits.a);
            if let Some(t) = &truth {
                let err = (&r.h - t).amax();
                row.error_maxnorm = Some(err);
                row.success = Some(err <= cfg.epsilon);
            }
            ledger_cells(&mut row, &r.ledger);
            row
        });
        (seed, ms, row)
    });
    let mut outcome = collect(&base, results, |row| {
        row.n = Some(planned.bits.n);
        row.n_or_m = Some(planned.form.size());
        row.a = Some(planned.bits.a);
    });
    outcome.warnings = planned.warnings;
    Ok(outcome)
}

pub fn run_sparse_hessian(cfg: &RunConfig) -> CliResult<RunOutcome> {
    let method = if spectral_method(cfg) { HessianMethod::SpectralSparse } else { HessianMethod::FindiffSparse };
    let sparsity = match (cfg.sparsity, cfg.nonzeros) {
        (Some(s), _) => Sparsity::PerRow(s),
        (None, Some(m)) => Sparsity::Total(m),
        (None, None) => return Err(CliError::Usage("sparse-hessian needs --sparsity or --nonzeros".into())),
    };
    let mut job = HessianJob::new(oracle(cfg)?, method, cfg.epsilon, cfg.rho).with_sparsity(sparsity);
    job.bound = cfg.bound;
    job.config = cfg.estimator.clone();
    let params = plan_sparse(&job)?;
    let truth = job.oracle.truth().map(|t| t.hessian.clone());
    let base = Base {
        cfg,
        function: job.oracle.name().to_string(),
        method: method.to_string(),
        d: job.oracle.d(),
    };
    let fill = |row: &mut RunRow| {
        row.n_or_m = Some(params.form.size());
        row.a = form_step(&params.form);
        row.q = Some(params.q);
    };

    let results = run_seeds(&cfg.seeds, cfg.jobs, |seed| {
        let (ms, result) = timed(|| estimate_hessian_sparse(&job, &mut rng_from_seed(seed)));
        let row = result.map(|r| {
            let mut row = base.row(0, seed);
            fill(&mut row);
            if let Some(t) = &truth {
                let err = (&r.h - t).amax();
                row.error_maxnorm = Some(err);
                row.success = Some(err <= cfg.epsilon);
            }
            ledger_cells(&mut row, &r.ledger);
            row
        });
        (seed, ms, row)
    });
    Ok(collect(&base, results, fill))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_keep_their_order_across_threads() {
        let seeds: Vec<u64> = (0..23).rev().collect();
        for jobs in [1, 2, 5, 64] {
            assert_eq!(run_seeds(&seeds, jobs, |s| s * 2), seeds.iter().map(|s| s * 2).collect::<Vec<_>>());
        }
        assert!(run_seeds(&[], 4, |s| s).is_empty());
    }

    #[test]
    fn data_failures_are_classified() {
        assert!(is_data_failure(&Error::Ambiguity { row: 0, candidates: 2 }));
        assert!(is_data_failure(&Error::Divergence { ratio: 2.0 }));
        assert!(!is_data_failure(&Error::Precondition("x".into())));
        assert!(!is_data_failure(&Error::Resource {
            requested: 1,
            limit: 0,
            suggestion: String::new()
        }));
    }
}

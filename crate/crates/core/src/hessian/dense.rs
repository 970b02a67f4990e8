use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::{form_evaluator, form_step, hessian_form, HessianJob};
use crate::error::{Error, Result};
use crate::findiff::{gevrey_scale, probe_scale};
use crate::gradient::{decode_axis, validate_accuracy, FormPlan, JordanBits};
use crate::grid::GridSpec;
use crate::oracle::{cost_of_phase_oracle, CostInput, LedgerSnapshot};
use crate::sampler::{jordan_sample_field, Lattice, PhaseField};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHessianPlan {
    pub bits: JordanBits,
    pub form: FormPlan,
    /// Probe length `lambda` in `y = lambda e_i`.
    pub probe_length: f64,
    /// Failure budget of each column.
    pub column_rho: f64,
    /// Repetitions per column.
    pub repetitions: usize,
    pub bound: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHessianResult {
    /// Symmetrized estimate.
    pub h: DMatrix<f64>,
    /// Column estimates before symmetrization.
    pub raw: DMatrix<f64>,
    /// `|raw - raw^T|_max`.
    pub asymmetry: f64,
    pub plan: DenseHessianPlan,
    pub ledger: LedgerSnapshot,
}

pub fn plan_dense(job: &HessianJob) -> Result<DenseHessianPlan> {
    if job.method.is_sparse() {
        return Err(Error::Parameter(format!("{} is not a dense method", job.method)));
    }
    let oracle = &job.oracle;
    let d = oracle.d();
    let cfg = &job.config;
    let bound = match job.bound {
        Some(b) => b,
        None => job.declared_bound()?,
    };
    validate_accuracy(job.epsilon, job.rho, bound)?;
    let info = oracle.info();
    let form = hessian_form(oracle, cfg, job.epsilon, job.method.is_spectral(), |m| match info.gevrey {
        Some(c) => gevrey_scale(c, m, d, job.epsilon).unwrap_or(f64::NAN),
        None => probe_scale(m, d, info.domain_radius.unwrap_or(1.0)),
    })?;
    if let FormPlan::FiniteDifference { m, .. } = form {
        check_stencil_precondition(job, m)?;
    }
    let a = form_step(&form);
    let probe_length = if cfg.scaled_probes && !job.method.is_spectral() {
        a / 2.0
    } else {
        1.0
    };
    let mut warnings = Vec::new();
    let bits = JordanBits::new(job.epsilon, a * probe_length, bound, &mut warnings)?;
    Lattice::Dyadic(GridSpec::new(bits.n, d)?).checked_size(cfg.amplitude_cap)?;
    let column_rho = d as f64 * job.rho / (d as f64 + job.rho);
    Ok(DenseHessianPlan {
        bits,
        form,
        probe_length,
        column_rho,
        repetitions: cfg.repetitions(d, column_rho),
        bound,
        warnings,
    })
}

/// `m >= log(d B / eps)`, with `B = 0` for polynomials the stencil is exact on.
fn check_stencil_precondition(job: &HessianJob, m: usize) -> Result<()> {
    let info = job.oracle.info();
    if info.degree.is_some_and(|deg| deg < 2 * m + 1) {
        return Ok(());
    }
    let b = info.derivative_bound.ok_or_else(|| {
        Error::Precondition(format!(
            "{} declares no derivative bound B; m >= log(d B / eps) cannot be checked",
            job.oracle.name()
        ))
    })?;
    let need = job.config.log_base.log(job.oracle.d() as f64 * b / job.epsilon);
    if (m as f64) < need {
        return Err(Error::Precondition(format!(
            "stencil half-width m = {m} is below log(d B / eps) = {need:.3}"
        )));
    }
    Ok(())
}

pub fn estimate_hessian_dense<R: Rng + ?Sized>(job: &HessianJob, rng: &mut R) -> Result<DenseHessianResult> {
    let plan = plan_dense(job)?;
    let oracle = job.oracle.with_fresh_ledger();
    let d = oracle.d();
    let cap = job.config.amplitude_cap;
    let evaluator = form_evaluator(&plan.form)?;
    let a = form_step(&plan.form);
    let bits = plan.bits;
    let grid = GridSpec::new(bits.n, d)?;
    let lattice = Lattice::Dyadic(grid);
    let mut buf: Vec<Complex64> = Vec::new();
    let mut z = vec![0.0; d];

    let base = PhaseField::from_fn(lattice.clone(), cap, |x| {
        for (zj, &xj) in z.iter_mut().zip(x) {
            *zj = a * xj;
        }
        evaluator.apply(&oracle, &z, &mut buf)
    })?;
    let scale = bits.phase_scale();
    let mut raw = DMatrix::<f64>::zeros(d, d);
    for col in 0..d {
        let mut point = 0;
        let field = PhaseField::from_fn(lattice.clone(), cap, |x| {
            for (zj, &xj) in z.iter_mut().zip(x) {
                *zj = a * xj;
            }
            z[col] += plan.probe_length;
            let shifted = evaluator.apply(&oracle, &z, &mut buf)?;
            let value = scale * 0.5 * (shifted - base.phases()[point]);
            point += 1;
            Ok(value)
        })?;
        let sample = jordan_sample_field(&field, plan.repetitions, cap, rng)?;
        for (row, &label) in sample.median.iter().enumerate() {
            raw[(row, col)] = decode_axis(&grid, label, bits.n_m, bits.a)?;
        }
    }
    let h = (&raw + raw.transpose()) * 0.5;
    let asymmetry = (&raw - raw.transpose()).amax();

    let ledger = oracle.ledger();
    let calls = (d * plan.repetitions) as u64;
    ledger.record_oracle_calls(calls);
    // Each difference phase needs two form evaluations.
    let cost = cost_of_phase_oracle(&CostInput {
        model: plan.form.cost_model(evaluator.stencil()),
        epsilon: job.epsilon,
        eta: job.config.eta,
        repetitions: 2 * calls,
    })?;
    ledger.record_theoretical_cost(cost.total);
    let snapshot = ledger.snapshot();
    job.oracle.ledger().absorb(&snapshot);
    Ok(DenseHessianResult {
        h,
        raw,
        asymmetry,
        plan,
        ledger: snapshot,
    })
}

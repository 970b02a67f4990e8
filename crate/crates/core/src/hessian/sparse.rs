use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::zq::{check_symmetric, next_prime, recover_rows, recover_sparse_rows, RowRecovery, ZqMatrix};
use super::{form_evaluator, form_step, hessian_form, HessianJob, Sparsity};
use crate::config::SparsePath;
use crate::error::{Error, Result};
use crate::findiff::probe_scale;
use crate::gradient::{validate_accuracy, FormEvaluator, FormPlan};
use crate::grid::{symmetric_residue, SqSpec};
use crate::oracle::{cost_of_phase_oracle, CostInput, FunctionOracle, LedgerSnapshot};
use crate::sampler::{
    build_state, inverse_zq_axiswise, sample_axis, zq_axis_distribution, Lattice, OutcomeSampler, PhaseField,
};

/// Largest distance (in cycles) from an integer tolerated when checking
/// that a probe's phase field is a sum of per-axis phases.
pub const SEPARABILITY_TOLERANCE: f64 = 1e-6;

/// Random points used by the separability spot check.
const SEPARABILITY_CHECKS: usize = 4;

/// Largest `d` for which [`SparsePath::Auto`] simulates the full state.
const FULL_STATE_MAX_D: usize = 4;

/// Shrink factor `alpha` of the optional probe scaling `y / (alpha s)`.
const SHRINK_ALPHA: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    /// `y in {0, 1}^d`.
    Binary,
    /// `y in {-1, 1}^d / sqrt(d)`.
    Signed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRecoveryParams {
    pub q: u64,
    pub probes: usize,
    pub probe_kind: ProbeKind,
    /// Row support `s` searched during recovery.
    pub support_bound: usize,
    /// Total-nonzero budget; rows failing the sparse search are then
    /// re-read with basis probes.
    pub total_budget: Option<usize>,
    /// Measurements per probe, combined by per-coordinate mode.
    pub measurements: usize,
    pub form: FormPlan,
    /// `M` in `H = M L / q`.
    pub bound: f64,
    /// Real probe is `magnitude * (integer probe)`.
    pub probe_magnitude: f64,
    /// Phase (in cycles) per unit of the difference function.
    pub phase_scale: f64,
    /// Resolved to [`SparsePath::Full`] or [`SparsePath::Product`].
    pub path: SparsePath,
    pub amplitude_cap: usize,
}

impl SparseRecoveryParams {
    /// Superposition calls per measurement: two forms, each applied
    /// `ceil(phase_scale)` times.
    pub fn calls_per_measurement(&self) -> u64 {
        2 * self.phase_scale.ceil() as u64
    }

    pub fn calls_per_probe(&self) -> u64 {
        self.measurements as u64 * self.calls_per_measurement()
    }

    fn d_log(&self, d: usize) -> f64 {
        (self.q as f64 * d as f64).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseHessianResult {
    pub l: ZqMatrix,
    /// `M L / q`.
    pub h: DMatrix<f64>,
    pub params: SparseRecoveryParams,
    /// Rows re-read with basis probes.
    pub dense_rows: Vec<usize>,
    /// Probes actually measured, basis probes included.
    pub probes_used: usize,
    /// `s log^2(q d) / eps`, times `sqrt(d) / a` on the finite-difference path.
    pub predicted_cost: f64,
    pub ledger: LedgerSnapshot,
}

pub fn plan_sparse(job: &HessianJob) -> Result<SparseRecoveryParams> {
    if !job.method.is_sparse() {
        return Err(Error::Parameter(format!("{} is not a sparse method", job.method)));
    }
    let oracle = &job.oracle;
    let d = oracle.d();
    let cfg = &job.config;
    let bound = match job.bound {
        Some(b) => b,
        None => 2.0 * job.declared_bound()?,
    };
    validate_accuracy(job.epsilon, job.rho, bound)?;
    let q = match cfg.modulus {
        Some(q) => {
            SqSpec::new(q, d)?;
            q
        }
        None => next_prime((cfg.modulus_constant * bound / job.epsilon).ceil() as u64)?,
    };
    let qd = (q as f64 * d as f64).ln();
    let (support_bound, total_budget) = match job.sparsity {
        Sparsity::PerRow(s) => (s, None),
        Sparsity::Total(m) => (((m as f64 / qd).sqrt().floor() as usize).max(1), Some(m)),
        Sparsity::None => {
            return Err(Error::Parameter(
                "sparse estimation needs a sparsity declaration (s per row or m total)".into(),
            ))
        }
    };
    let probes = cfg
        .probes
        .unwrap_or_else(|| (cfg.probe_constant * support_bound.max(1) as f64 * qd).ceil() as usize);
    if probes == 0 {
        return Err(Error::Parameter("need at least one probe".into()));
    }
    let measurements = cfg
        .measurements
        .unwrap_or_else(|| cfg.ceil_log(cfg.measurement_constant, d as f64));
    let info = oracle.info();
    let spectral = job.method.is_spectral();
    let form = hessian_form(oracle, cfg, job.epsilon, spectral, |m| {
        if info.quadratic {
            1.0
        } else {
            probe_scale(m, d, info.domain_radius.unwrap_or(1.0))
        }
    })?;
    let shrink = if cfg.shrink_probes {
        SHRINK_ALPHA * support_bound.max(1) as f64
    } else {
        1.0
    };
    let (probe_kind, unit) = if spectral {
        (ProbeKind::Binary, 1.0)
    } else {
        (ProbeKind::Signed, 1.0 / (d as f64).sqrt())
    };
    let probe_magnitude = unit / shrink;
    let a = form_step(&form);
    let phase_scale = q as f64 / (a * bound * probe_magnitude);
    let full_size = (q as u128).checked_pow(d as u32);
    let fits = full_size.is_some_and(|n| n <= cfg.amplitude_cap as u128);
    let path = match cfg.sparse_path {
        SparsePath::Auto if d <= FULL_STATE_MAX_D && fits => SparsePath::Full,
        SparsePath::Auto => SparsePath::Product,
        SparsePath::Full => {
            Lattice::Modular(SqSpec::new(q, d)?).checked_size(cfg.amplitude_cap)?;
            SparsePath::Full
        }
        SparsePath::Product => SparsePath::Product,
    };
    Ok(SparseRecoveryParams {
        q,
        probes,
        probe_kind,
        support_bound,
        total_budget,
        measurements,
        form,
        bound,
        probe_magnitude,
        phase_scale,
        path,
        amplitude_cap: cfg.amplitude_cap,
    })
}

/// `F_y(x) = (form(a x + y) - form(a x)) / 2`.
struct DifferenceField<'a> {
    oracle: &'a FunctionOracle,
    evaluator: &'a FormEvaluator,
    a: f64,
    y: &'a [f64],
    buf: Vec<Complex64>,
    z: Vec<f64>,
}

impl DifferenceField<'_> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        for (zj, &xj) in self.z.iter_mut().zip(x) {
            *zj = self.a * xj;
        }
        let base = self.evaluator.apply(self.oracle, &self.z, &mut self.buf)?;
        for (zj, &yj) in self.z.iter_mut().zip(self.y) {
            *zj += yj;
        }
        let shifted = self.evaluator.apply(self.oracle, &self.z, &mut self.buf)?;
        Ok(0.5 * (shifted - base))
    }
}

/// Smallest most frequent value.
fn mode(values: &[i64]) -> i64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mut best = (0usize, sorted[0]);
    let mut i = 0;
    while i < sorted.len() {
        let run = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if run > best.0 {
            best = (run, sorted[i]);
        }
        i += run;
    }
    best.1
}

/// Measure `(L y) mod q` for an integer probe `y` (binary or signed): each
/// coordinate is the mode of `params.measurements` samples.
pub fn sparse_probe_measure<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    probe: &[i64],
    params: &SparseRecoveryParams,
    rng: &mut R,
) -> Result<Vec<i64>> {
    let evaluator = form_evaluator(&params.form)?;
    measure_with(oracle, &evaluator, probe, params, rng)
}

fn measure_with<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    evaluator: &FormEvaluator,
    probe: &[i64],
    params: &SparseRecoveryParams,
    rng: &mut R,
) -> Result<Vec<i64>> {
    let d = oracle.d();
    let spec = SqSpec::new(params.q, d)?;
    if probe.len() != d {
        return Err(Error::Parameter(format!("probe has length {}, expected {d}", probe.len())));
    }
    let y: Vec<f64> = probe.iter().map(|&v| v as f64 * params.probe_magnitude).collect();
    let mut field = DifferenceField {
        oracle,
        evaluator,
        a: form_step(&params.form),
        y: &y,
        buf: Vec::new(),
        z: vec![0.0; d],
    };
    let scale = params.phase_scale;
    let reps = params.measurements.max(1);
    let samples: Vec<Vec<i64>> = match params.path {
        SparsePath::Full | SparsePath::Auto => {
            let f = PhaseField::from_fn(Lattice::Modular(spec), params.amplitude_cap, |x| Ok(scale * field.eval(x)?))?;
            let state = inverse_zq_axiswise(build_state(&f, params.amplitude_cap)?)?;
            let sampler = OutcomeSampler::new(&state);
            (0..reps).map(|_| sampler.sample(rng).labels).collect()
        }
        SparsePath::Product => {
            let axes = product_phases(&mut field, &spec, scale, rng)?;
            let dists = axes
                .iter()
                .map(|p| zq_axis_distribution(p))
                .collect::<Result<Vec<_>>>()?;
            (0..reps)
                .map(|_| dists.iter().map(|p| sample_axis(p, rng)).collect())
                .collect()
        }
    };
    Ok((0..d)
        .map(|j| {
            let column: Vec<i64> = samples.iter().map(|s| s[j]).collect();
            symmetric_residue(mode(&column), params.q)
        })
        .collect())
}

/// Per-axis phases along lines through the origin, after checking on
/// random points that they add up to the full field.
fn product_phases<R: Rng + ?Sized>(
    field: &mut DifferenceField<'_>,
    spec: &SqSpec,
    scale: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let d = spec.d();
    let half = spec.half();
    let origin = vec![0.0; d];
    let f0 = field.eval(&origin)?;
    let mut axes = vec![vec![0.0; spec.axis_len()]; d];
    let mut x = origin.clone();
    for (j, axis) in axes.iter_mut().enumerate() {
        for k in -half..=half {
            if k == 0 {
                continue;
            }
            x[j] = spec.sq_value(k)?;
            axis[(k + half) as usize] = scale * (field.eval(&x)? - f0);
        }
        x[j] = 0.0;
    }
    for _ in 0..SEPARABILITY_CHECKS {
        let labels: Vec<i64> = (0..d).map(|_| rng.gen_range(-half..=half)).collect();
        let point = labels.iter().map(|&k| spec.sq_value(k)).collect::<Result<Vec<f64>>>()?;
        let full = scale * (field.eval(&point)? - f0);
        let sum: f64 = labels
            .iter()
            .enumerate()
            .map(|(j, &k)| axes[j][(k + half) as usize])
            .sum();
        let gap = full - sum;
        if (gap - gap.round()).abs() > SEPARABILITY_TOLERANCE {
            return Err(Error::Precondition(format!(
                "probe phase does not separate across axes (gap {gap:.3e} cycles); use the full-state path"
            )));
        }
    }
    Ok(axes)
}

fn random_probe<R: Rng + ?Sized>(kind: ProbeKind, d: usize, rng: &mut R) -> Vec<i64> {
    (0..d)
        .map(|_| match kind {
            ProbeKind::Binary => i64::from(rng.gen::<bool>()),
            ProbeKind::Signed => {
                if rng.gen::<bool>() {
                    1
                } else {
                    -1
                }
            }
        })
        .collect()
}

pub fn estimate_hessian_sparse<R: Rng + ?Sized>(job: &HessianJob, rng: &mut R) -> Result<SparseHessianResult> {
    let params = plan_sparse(job)?;
    let oracle = job.oracle.with_fresh_ledger();
    let d = oracle.d();
    let q = params.q;
    let evaluator = form_evaluator(&params.form)?;

    let probes: Vec<Vec<i64>> = (0..params.probes)
        .map(|_| random_probe(params.probe_kind, d, rng))
        .collect();
    let residues = probes
        .iter()
        .map(|y| measure_with(&oracle, &evaluator, y, &params, rng))
        .collect::<Result<Vec<_>>>()?;
    let mut probes_used = probes.len();
    let mut dense_rows = Vec::new();

    let l = match params.total_budget {
        None => recover_sparse_rows(&probes, &residues, q, params.support_bound)?,
        Some(_) => {
            let mut entries = DMatrix::<i64>::zeros(d, d);
            for (row, outcome) in recover_rows(&probes, &residues, q, params.support_bound)?
                .into_iter()
                .enumerate()
            {
                match outcome {
                    RowRecovery::Unique(values) => entries.row_mut(row).copy_from_slice(&values),
                    RowRecovery::Inconsistent => dense_rows.push(row),
                    RowRecovery::Ambiguous(candidates) => return Err(Error::Ambiguity { row, candidates }),
                }
            }
            if !dense_rows.is_empty() {
                // Column k of L, read off the basis probe e_k.
                for k in 0..d {
                    let e: Vec<i64> = (0..d).map(|j| i64::from(j == k)).collect();
                    let column = measure_with(&oracle, &evaluator, &e, &params, rng)?;
                    for &row in &dense_rows {
                        entries[(row, k)] = column[row];
                    }
                }
                probes_used += d;
            }
            let l = ZqMatrix::new(q, entries)?;
            check_symmetric(&l)?;
            l
        }
    };

    let ledger = oracle.ledger();
    let calls = probes_used as u64 * params.calls_per_probe();
    ledger.record_oracle_calls(calls);
    let cost = cost_of_phase_oracle(&CostInput {
        model: params.form.cost_model(evaluator.stencil()),
        epsilon: job.epsilon,
        eta: job.config.eta,
        repetitions: calls,
    })?;
    ledger.record_theoretical_cost(cost.total);
    let snapshot = ledger.snapshot();
    job.oracle.ledger().absorb(&snapshot);

    let s = params.support_bound.max(1) as f64;
    let log2 = params.d_log(d).powi(2);
    let predicted_cost = match params.probe_kind {
        ProbeKind::Binary => s * log2 / job.epsilon,
        ProbeKind::Signed => s * (d as f64).sqrt() * log2 / (form_step(&params.form) * job.epsilon),
    };
    Ok(SparseHessianResult {
        h: l.to_real(params.bound),
        l,
        params,
        dense_rows,
        probes_used,
        predicted_cost,
        ledger: snapshot,
    })
}

//! Evaluatable analytic functions, their known truths, and query accounting.

use std::f64::consts::PI;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Evaluator = dyn Fn(&[Complex64]) -> Complex64 + Send + Sync;

/// Closed-form gradient and Hessian at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownTruth {
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// Declared analytic properties. Every field is optional; estimators that
/// need a missing one either estimate it or ask for an override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyticInfo {
    /// Radius `r` of a closed polydisc on which `f` is analytic.
    pub radius: Option<f64>,
    /// Bound on `|f|` over that polydisc.
    pub kappa: Option<f64>,
    /// Bound on `|grad f(0)|_inf` (the gradient estimator's `M`).
    pub gradient_bound: Option<f64>,
    /// Bound on `|H_f(0)|_max` (the Hessian estimator's `M`).
    pub hessian_bound: Option<f64>,
    /// Uniform bound on high-order directional derivatives on the domain.
    pub derivative_bound: Option<f64>,
    /// Total degree, for polynomials.
    pub degree: Option<usize>,
    /// Gevrey constant `c` with `|D^alpha f| <= c^(k+1) k^k`.
    pub gevrey: Option<f64>,
    /// Radius of the real domain the finite-difference stencils may probe.
    pub domain_radius: Option<f64>,
    pub real_on_real: bool,
    /// `f` is a quadratic form plus lower-order terms, so difference probes
    /// produce phase fields that separate across axes.
    pub quadratic: bool,
}

/// Totals observed on a [`QueryLedger`] at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LedgerSnapshot {
    pub simulated_oracle_calls: u64,
    pub pointwise_evaluations: u64,
    pub domain_warnings: u64,
    pub theoretical_cost: f64,
}

/// Thread-safe, monotone query counters.
#[derive(Debug, Default)]
pub struct QueryLedger {
    simulated_oracle_calls: AtomicU64,
    pointwise_evaluations: AtomicU64,
    domain_warnings: AtomicU64,
    theoretical_cost_bits: AtomicU64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_oracle_calls(&self, calls: u64) {
        self.simulated_oracle_calls.fetch_add(calls, Ordering::SeqCst);
    }

    pub fn record_evaluations(&self, evaluations: u64) {
        self.pointwise_evaluations
            .fetch_add(evaluations, Ordering::SeqCst);
    }

    pub fn record_domain_warning(&self) {
        self.domain_warnings.fetch_add(1, Ordering::SeqCst);
    }

    /// Adds a non-negative amount to the theoretical cost.
    pub fn record_theoretical_cost(&self, cost: f64) {
        if !(cost > 0.0) {
            return;
        }
        let mut current = self.theoretical_cost_bits.load(Ordering::SeqCst);
        loop {
            let next = (f64::from_bits(current) + cost).to_bits();
            match self.theoretical_cost_bits.compare_exchange_weak(
                current,
                next,
                Ordering::SeqCst,
                Ordering::SeqCst,
            ) {
                Ok(_) => return,
                Err(seen) => current = seen,
            }
        }
    }

    pub fn absorb(&self, other: &LedgerSnapshot) {
        self.record_oracle_calls(other.simulated_oracle_calls);
        self.record_evaluations(other.pointwise_evaluations);
        self.domain_warnings
            .fetch_add(other.domain_warnings, Ordering::SeqCst);
        self.record_theoretical_cost(other.theoretical_cost);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            simulated_oracle_calls: self.simulated_oracle_calls.load(Ordering::SeqCst),
            pointwise_evaluations: self.pointwise_evaluations.load(Ordering::SeqCst),
            domain_warnings: self.domain_warnings.load(Ordering::SeqCst),
            theoretical_cost: f64::from_bits(self.theoretical_cost_bits.load(Ordering::SeqCst)),
        }
    }
}

/// An analytic `f: C^d -> C` with metadata and a shared ledger.
#[derive(Clone)]
pub struct FunctionOracle {
    name: String,
    d: usize,
    evaluator: Arc<Evaluator>,
    truth: Option<KnownTruth>,
    info: AnalyticInfo,
    ledger: Arc<QueryLedger>,
}

impl fmt::Debug for FunctionOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionOracle")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("info", &self.info)
            .finish_non_exhaustive()
    }
}

impl FunctionOracle {
    pub fn new<F>(name: impl Into<String>, d: usize, evaluator: F) -> Self
    where
        F: Fn(&[Complex64]) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            d,
            evaluator: Arc::new(evaluator),
            truth: None,
            info: AnalyticInfo::default(),
            ledger: Arc::new(QueryLedger::new()),
        }
    }

    pub fn with_truth(mut self, truth: KnownTruth) -> Self {
        assert_eq!(truth.gradient.len(), self.d, "gradient length must equal d");
        assert_eq!(truth.hessian.shape(), (self.d, self.d), "Hessian must be d x d");
        self.truth = Some(truth);
        self
    }

    pub fn with_info(mut self, info: AnalyticInfo) -> Self {
        self.info = info;
        self
    }

    /// Same function, counted on a new empty ledger.
    pub fn with_fresh_ledger(&self) -> Self {
        Self {
            ledger: Arc::new(QueryLedger::new()),
            ..self.clone()
        }
    }

    /// `x -> f(x0 + x)`, sharing this oracle's ledger. Truth and bounds are
    /// dropped since they refer to the origin.
    pub fn translated(&self, x0: &[f64]) -> Self {
        assert_eq!(x0.len(), self.d, "shift length must equal d");
        let inner = Arc::clone(&self.evaluator);
        let shift: Vec<Complex64> = x0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let evaluator = move |z: &[Complex64]| {
            let moved: Vec<Complex64> = z.iter().zip(&shift).map(|(a, b)| a + b).collect();
            inner(&moved)
        };
        Self {
            name: format!("{}@shifted", self.name),
            d: self.d,
            evaluator: Arc::new(evaluator),
            truth: None,
            info: AnalyticInfo {
                real_on_real: self.info.real_on_real,
                ..AnalyticInfo::default()
            },
            ledger: Arc::clone(&self.ledger),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn truth(&self) -> Option<&KnownTruth> {
        self.truth.as_ref()
    }

    pub fn info(&self) -> &AnalyticInfo {
        &self.info
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    /// `f(z)`, counted as one pointwise evaluation.
    pub fn evaluate(&self, z: &[Complex64]) -> Complex64 {
        self.ledger.record_evaluations(1);
        self.evaluate_uncounted(z)
    }

    /// `(Re f(z), Im f(z))`.
    pub fn real_imag(&self, z: &[Complex64]) -> (f64, f64) {
        let v = self.evaluate(z);
        (v.re, v.im)
    }

    pub fn evaluate_real(&self, x: &[f64]) -> Complex64 {
        let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.evaluate(&z)
    }

    /// Evaluation for hot loops that tally pointwise calls in bulk through
    /// [`QueryLedger::record_evaluations`]. Domain warnings are still recorded.
    pub(crate) fn evaluate_uncounted(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.d, "input length must equal d");
        if let Some(r) = self.info.radius {
            let limit = (r * (1.0 + 1e-12)).powi(2);
            if z.iter().any(|c| c.norm_sqr() > limit) {
                self.ledger.record_domain_warning();
            }
        }
        (self.evaluator)(z)
    }
}

/// Which phase-oracle construction a cost refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    /// Circle sampling with `n_samples` points at radius `delta`.
    Spectral { n_samples: usize, delta: f64 },
    /// A stencil with `points` evaluations, total coefficient mass
    /// `abs_coeff_sum`, applied at step `a`.
    FiniteDifference {
        points: usize,
        abs_coeff_sum: f64,
        a: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostInput {
    pub model: CostModel,
    pub epsilon: f64,
    pub eta: f64,
    /// Applications of the phase oracle over the whole run.
    pub repetitions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOracleCost {
    /// Distinct evaluation points per application.
    pub evaluation_points: usize,
    /// Queries to each of the real- and imaginary-part binary oracles per
    /// phase-oracle application.
    pub per_application: f64,
    pub total: f64,
}

/// Query cost of building a phase oracle from binary oracles:
/// `pi / (2 eps) * scale + P ln(P / eta)` per application, where `scale`
/// is the weight mass of the linear combination and `P` its point count.
pub fn cost_of_phase_oracle(input: &CostInput) -> Result<PhaseOracleCost> {
    let positive = |what: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Parameter(format!("{what} must be positive, got {v}")))
        }
    };
    positive("epsilon", input.epsilon)?;
    positive("eta", input.eta)?;
    let (points, scale) = match input.model {
        CostModel::Spectral { n_samples, delta } => {
            if n_samples < 2 {
                return Err(Error::Parameter(format!(
                    "spectral cost needs N >= 2, got {n_samples}"
                )));
            }
            positive("delta", delta)?;
            (n_samples, 1.0 / delta)
        }
        CostModel::FiniteDifference {
            points,
            abs_coeff_sum,
            a,
        } => {
            if points == 0 {
                return Err(Error::Parameter("stencil must have points".into()));
            }
            positive("a", a)?;
            positive("coefficient mass", abs_coeff_sum)?;
            (points, abs_coeff_sum / a)
        }
    };
    let p = points as f64;
    let per_application = PI / (2.0 * input.epsilon) * scale + p * (p / input.eta).ln();
    Ok(PhaseOracleCost {
        evaluation_points: points,
        per_application,
        total: per_application * input.repetitions as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluate_examples() {
        let quad = FunctionOracle::new("q", 2, |z: &[Complex64]| z[0] * z[1] * 2.0);
        assert_eq!(quad.evaluate(&[c(1.0, 0.0), c(1.0, 0.0)]), c(2.0, 0.0));
        let cube = FunctionOracle::new("cube", 1, |z: &[Complex64]| z[0] * z[0] * z[0]);
        let v = cube.evaluate(&[c(0.0, 1.0)]);
        assert!((v - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(cube.ledger().snapshot().pointwise_evaluations, 1);
    }

    #[test]
    fn real_imag_examples() {
        let sq = FunctionOracle::new("sq", 1, |z: &[Complex64]| z[0] * z[0]);
        assert_eq!(sq.real_imag(&[c(1.0, 1.0)]), (0.0, 2.0));
        let id = FunctionOracle::new("id", 1, |z: &[Complex64]| z[0]);
        assert_eq!(id.real_imag(&[c(3.0, 0.0)]), (3.0, 0.0));
        let exp = FunctionOracle::new("exp", 1, |z: &[Complex64]| z[0].exp());
        let (re, im) = exp.real_imag(&[c(0.0, PI)]);
        assert!((re + 1.0).abs() < 1e-15 && im.abs() < 1e-15);
    }

    #[test]
    fn domain_violation_warns() {
        let f = FunctionOracle::new("id", 1, |z: &[Complex64]| z[0]).with_info(AnalyticInfo {
            radius: Some(1.0),
            ..Default::default()
        });
        f.evaluate(&[c(0.5, 0.0)]);
        assert_eq!(f.ledger().snapshot().domain_warnings, 0);
        f.evaluate(&[c(0.0, 2.0)]);
        assert_eq!(f.ledger().snapshot().domain_warnings, 1);
    }

    #[test]
    fn translation_shares_ledger() {
        let f = FunctionOracle::new("id", 1, |z: &[Complex64]| z[0]);
        let g = f.translated(&[2.0]);
        assert_eq!(g.evaluate_real(&[1.0]), c(3.0, 0.0));
        assert_eq!(f.ledger().snapshot().pointwise_evaluations, 1);
        let h = f.with_fresh_ledger();
        h.evaluate_real(&[1.0]);
        assert_eq!(f.ledger().snapshot().pointwise_evaluations, 1);
    }

    #[test]
    fn spectral_cost_matches_closed_form() {
        let cost = cost_of_phase_oracle(&CostInput {
            model: CostModel::Spectral {
                n_samples: 16,
                delta: 1.0,
            },
            epsilon: 0.1,
            eta: 0.01,
            repetitions: 3,
        })
        .unwrap();
        // pi/0.2 + 16 ln 1600
        assert!((cost.per_application - 133.752_105_799_594_9).abs() < 1e-9);
        assert!((cost.total - 3.0 * cost.per_application).abs() < 1e-9);
        assert_eq!(cost.evaluation_points, 16);
    }

    #[test]
    fn stencil_cost_counts_points() {
        let cost = cost_of_phase_oracle(&CostInput {
            model: CostModel::FiniteDifference {
                points: 3,
                abs_coeff_sum: 4.0,
                a: 1.0,
            },
            epsilon: 0.1,
            eta: 0.01,
            repetitions: 1,
        })
        .unwrap();
        assert_eq!(cost.evaluation_points, 3);
    }

    #[test]
    fn degenerate_costs_are_rejected() {
        let base = CostInput {
            model: CostModel::Spectral {
                n_samples: 1,
                delta: 1.0,
            },
            epsilon: 0.1,
            eta: 0.01,
            repetitions: 1,
        };
        assert!(matches!(cost_of_phase_oracle(&base), Err(Error::Parameter(_))));
        let neg = CostInput {
            epsilon: -1.0,
            model: CostModel::Spectral {
                n_samples: 4,
                delta: 1.0,
            },
            ..base
        };
        assert!(cost_of_phase_oracle(&neg).is_err());
    }

    proptest! {
        #[test]
        fn ledger_is_monotone(steps in proptest::collection::vec((0u64..5, 0.0f64..3.0), 1..40)) {
            let ledger = QueryLedger::new();
            let mut prev = ledger.snapshot();
            let mut evals = 0;
            for (k, cost) in steps {
                ledger.record_evaluations(k);
                ledger.record_oracle_calls(k);
                ledger.record_theoretical_cost(cost);
                evals += k;
                let now = ledger.snapshot();
                prop_assert!(now.pointwise_evaluations >= prev.pointwise_evaluations);
                prop_assert!(now.simulated_oracle_calls >= prev.simulated_oracle_calls);
                prop_assert!(now.theoretical_cost >= prev.theoretical_cost);
                prev = now;
            }
            prop_assert_eq!(prev.pointwise_evaluations, evals);
        }
    }

    #[test]
    fn concurrent_increments_are_all_seen() {
        let ledger = Arc::new(QueryLedger::new());
        std::thread::scope(|s| {
            for _ in 0..4 {
                let l = Arc::clone(&ledger);
                s.spawn(move || {
                    for _ in 0..1000 {
                        l.record_evaluations(1);
                        l.record_theoretical_cost(0.5);
                    }
                });
            }
        });
        let snap = ledger.snapshot();
        assert_eq!(snap.pointwise_evaluations, 4000);
        assert!((snap.theoretical_cost - 2000.0).abs() < 1e-9);
    }
}

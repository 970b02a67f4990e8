//! Fourier sampling: phase field -> state -> per-axis inverse QFT -> Born
//! sampling.
//!
//! Both lattices use a centred DFT. With axis length `L` and centre
//! `alpha` (`2^(n-1) - 1/2` for `G_n`, `(q-1)/2` for `Z_q`), the inverse
//! transform is `w[j] = L^(-1/2) sum_j' exp(-2 pi i (j - alpha)(j' - alpha) / L) v[j']`.
//! It factors as `C * D[j] * FFT(D * v)[j]` with `D[j] = exp(2 pi i alpha j / L)`
//! and `C = exp(-2 pi i alpha^2 / L)`, so a plain FFT does the work.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{is_prime, GridSpec, SqSpec};

/// Largest state simulated unless overridden.
pub const DEFAULT_AMPLITUDE_CAP: usize = 1 << 24;

/// Environment variable overriding [`DEFAULT_AMPLITUDE_CAP`].
pub const AMPLITUDE_CAP_ENV: &str = "QGRAD_AMPLITUDE_CAP";

/// The amplitude cap, honouring [`AMPLITUDE_CAP_ENV`] when it parses.
pub fn amplitude_cap_from_env() -> usize {
    std::env::var(AMPLITUDE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_AMPLITUDE_CAP)
}

/// The register a state lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lattice {
    Dyadic(GridSpec),
    Modular(SqSpec),
}

impl Lattice {
    pub fn d(&self) -> usize {
        match self {
            Lattice::Dyadic(g) => g.d(),
            Lattice::Modular(s) => s.d(),
        }
    }

    pub fn axis_len(&self) -> usize {
        match self {
            Lattice::Dyadic(g) => g.axis_len(),
            Lattice::Modular(s) => s.axis_len(),
        }
    }

    pub fn size(&self) -> Option<u128> {
        match self {
            Lattice::Dyadic(g) => g.size(),
            Lattice::Modular(s) => s.size(),
        }
    }

    pub fn axis_values(&self) -> Vec<f64> {
        match self {
            Lattice::Dyadic(g) => g.axis_values(),
            Lattice::Modular(s) => s.axis_values(),
        }
    }

    pub fn index_to_label(&self, index: usize) -> i64 {
        match self {
            Lattice::Dyadic(g) => g.index_to_label(index),
            Lattice::Modular(s) => s.index_to_label(index),
        }
    }

    /// Centre of the DFT kernel.
    fn alpha(&self) -> f64 {
        match self {
            Lattice::Dyadic(g) => (g.axis_len() as f64 - 1.0) / 2.0,
            Lattice::Modular(s) => s.half() as f64,
        }
    }

    /// Point count, or a resource error if it exceeds `cap`.
    pub fn checked_size(&self, cap: usize) -> Result<usize> {
        let requested = self.size().unwrap_or(u128::MAX);
        if requested > cap as u128 {
            return Err(Error::Resource {
                requested,
                limit: cap,
                suggestion: "reduce the bits per axis or the dimension, or raise the amplitude cap"
                    .into(),
            });
        }
        Ok(requested as usize)
    }
}

/// Phase per lattice point, in cycles (the multiplier of `2 pi i`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    lattice: Lattice,
    phases: Vec<f64>,
}

impl PhaseField {
    /// Evaluate `phase` at every point, passing the coordinate values.
    pub fn from_fn<F>(lattice: Lattice, cap: usize, mut phase: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let size = lattice.checked_size(cap)?;
        let axis = lattice.axis_values();
        let d = lattice.d();
        let mut idx = vec![0usize; d];
        let mut point: Vec<f64> = vec![axis[0]; d];
        let mut phases = Vec::with_capacity(size);
        for _ in 0..size {
            let v = phase(&point)?;
            if !v.is_finite() {
                return Err(Error::Parameter(format!("non-finite phase at {point:?}")));
            }
            phases.push(v);
            // Row-major odometer: the last axis varies fastest.
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < axis.len() {
                    point[j] = axis[idx[j]];
                    break;
                }
                idx[j] = 0;
                point[j] = axis[0];
            }
        }
        Ok(Self { lattice, phases })
    }

    pub fn from_values(lattice: Lattice, phases: Vec<f64>) -> Result<Self> {
        if lattice.size() != Some(phases.len() as u128) {
            return Err(Error::Parameter("phase count does not match the lattice".into()));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::Parameter("phases must be finite".into()));
        }
        Ok(Self { lattice, phases })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    lattice: Lattice,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(lattice: Lattice, amplitudes: Vec<Complex64>) -> Result<Self> {
        if lattice.size() != Some(amplitudes.len() as u128) {
            return Err(Error::Parameter("amplitude count does not match the lattice".into()));
        }
        Ok(Self {
            lattice,
            amplitudes,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Labels of the point at a flat index.
    pub fn labels_at(&self, mut flat: usize) -> Vec<i64> {
        let len = self.lattice.axis_len();
        let mut labels = vec![0; self.lattice.d()];
        for slot in labels.iter_mut().rev() {
            *slot = self.lattice.index_to_label(flat % len);
            flat /= len;
        }
        labels
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `exp(2 pi i phase(x)) / sqrt(size)` at every point.
pub fn build_state(field: &PhaseField, cap: usize) -> Result<StateVector> {
    let size = field.lattice.checked_size(cap)?;
    let norm = 1.0 / (size as f64).sqrt();
    let amplitudes = field
        .phases
        .iter()
        .map(|&p| Complex64::from_polar(norm, 2.0 * PI * p.rem_euclid(1.0)))
        .collect();
    Ok(StateVector {
        lattice: field.lattice,
        amplitudes,
    })
}

/// Centred DFT applied to one contiguous line in place.
struct CentredDft {
    fft: Arc<dyn Fft<f64>>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl CentredDft {
    /// `sign = -1` is the inverse QFT, `+1` the forward one.
    fn new(len: usize, alpha: f64, sign: f64) -> Self {
        let l = len as f64;
        let direction = if sign < 0.0 {
            FftDirection::Forward
        } else {
            FftDirection::Inverse
        };
        let fft = FftPlanner::new().plan_fft(len, direction);
        let pre: Vec<Complex64> = (0..len)
            .map(|j| Complex64::from_polar(1.0, -sign * 2.0 * PI * alpha * j as f64 / l))
            .collect();
        let constant = Complex64::from_polar(1.0 / l.sqrt(), sign * 2.0 * PI * alpha * alpha / l);
        let post = pre.iter().map(|p| p * constant).collect();
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self {
            fft,
            pre,
            post,
            scratch,
        }
    }

    fn apply(&mut self, line: &mut [Complex64]) {
        for (v, p) in line.iter_mut().zip(&self.pre) {
            *v *= p;
        }
        self.fft.process_with_scratch(line, &mut self.scratch);
        for (v, p) in line.iter_mut().zip(&self.post) {
            *v *= p;
        }
    }
}

fn transform_axiswise(mut state: StateVector, sign: f64) -> StateVector {
    let len = state.lattice.axis_len();
    let d = state.lattice.d();
    let mut dft = CentredDft::new(len, state.lattice.alpha(), sign);
    let mut line = vec![Complex64::new(0.0, 0.0); len];
    let total = state.amplitudes.len();
    for axis in 0..d {
        let stride = len.pow((d - 1 - axis) as u32);
        let block = stride * len;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = state.amplitudes[base + i * stride];
                }
                dft.apply(&mut line);
                for (i, v) in line.iter().enumerate() {
                    state.amplitudes[base + i * stride] = *v;
                }
            }
        }
    }
    state
}

fn require_dyadic(state: &StateVector) -> Result<()> {
    match state.lattice {
        Lattice::Dyadic(_) => Ok(()),
        Lattice::Modular(_) => Err(Error::WrongLattice(
            "the G_n transform needs a dyadic state; use the Z_q transform".into(),
        )),
    }
}

fn require_modular(state: &StateVector) -> Result<()> {
    match state.lattice {
        Lattice::Modular(_) => Ok(()),
        Lattice::Dyadic(_) => Err(Error::WrongLattice(
            "the Z_q transform needs a modular state".into(),
        )),
    }
}

/// Inverse of `|x> -> 2^(-n/2) sum_k exp(2 pi i 2^n x k) |k>` on every axis.
pub fn inverse_qft_axiswise(state: StateVector) -> Result<StateVector> {
    require_dyadic(&state)?;
    Ok(transform_axiswise(state, -1.0))
}

/// The forward `G_n` transform on every axis.
pub fn qft_axiswise(state: StateVector) -> Result<StateVector> {
    require_dyadic(&state)?;
    Ok(transform_axiswise(state, 1.0))
}

/// Inverse length-`q` DFT on every axis of a modular state.
pub fn inverse_zq_axiswise(state: StateVector) -> Result<StateVector> {
    require_modular(&state)?;
    Ok(transform_axiswise(state, -1.0))
}

/// Inverse unitary DFT of one axis of length `q`, indexed by centred labels
/// `-(q-1)/2..=(q-1)/2`. The input `exp(2 pi i k b / q) / sqrt(q)` maps to
/// the basis vector of label `b`.
pub fn zq_transform_axis(phases: &[Complex64]) -> Result<Vec<Complex64>> {
    let q = phases.len();
    if q <= 2 || !is_prime(q as u64) {
        return Err(Error::Parameter(format!("axis length {q} is not an odd prime")));
    }
    let mut line = phases.to_vec();
    CentredDft::new(q, ((q - 1) / 2) as f64, -1.0).apply(&mut line);
    Ok(line)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub labels: Vec<i64>,
    pub values: Vec<f64>,
}

/// Inverse-CDF sampler over a fixed distribution.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    lattice: Lattice,
    cumulative: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(state: &StateVector) -> Self {
        let mut acc = 0.0;
        let cumulative = state
            .amplitudes
            .iter()
            .map(|a| {
                acc += a.norm_sqr();
                acc
            })
            .collect();
        Self {
            lattice: state.lattice,
            cumulative,
        }
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty state");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MeasurementOutcome {
        let mut flat = self.sample_index(rng);
        let len = self.lattice.axis_len();
        let axis = self.lattice.axis_values();
        let d = self.lattice.d();
        let mut labels = vec![0; d];
        let mut values = vec![0.0; d];
        for j in (0..d).rev() {
            let i = flat % len;
            labels[j] = self.lattice.index_to_label(i);
            values[j] = axis[i];
            flat /= len;
        }
        MeasurementOutcome { labels, values }
    }
}

/// One Born-rule measurement.
pub fn sample_outcome<R: Rng + ?Sized>(state: &StateVector, rng: &mut R) -> MeasurementOutcome {
    OutcomeSampler::new(state).sample(rng)
}

/// Median per axis; an even count takes the lower middle.
pub fn coordinatewise_median(samples: &[Vec<i64>]) -> Vec<i64> {
    assert!(!samples.is_empty(), "median of no samples");
    let d = samples[0].len();
    (0..d)
        .map(|j| {
            let mut column: Vec<i64> = samples.iter().map(|s| s[j]).collect();
            column.sort_unstable();
            column[(column.len() - 1) / 2]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanSample {
    pub median: Vec<i64>,
    pub samples: Vec<Vec<i64>>,
}

/// Prepare the phase state once, transform it, and take `repetitions`
/// independent measurements. Identical circuits yield the same
/// distribution, so one simulation serves every repetition.
pub fn jordan_sample<F, R>(
    grid: GridSpec,
    phase: F,
    repetitions: usize,
    cap: usize,
    rng: &mut R,
) -> Result<JordanSample>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    if repetitions == 0 {
        return Err(Error::Parameter("need at least one repetition".into()));
    }
    let field = PhaseField::from_fn(Lattice::Dyadic(grid), cap, phase)?;
    jordan_sample_field(&field, repetitions, cap, rng)
}

/// [`jordan_sample`] for an already computed field.
pub fn jordan_sample_field<R: Rng + ?Sized>(
    field: &PhaseField,
    repetitions: usize,
    cap: usize,
    rng: &mut R,
) -> Result<JordanSample> {
    let state = inverse_qft_axiswise(build_state(field, cap)?)?;
    let sampler = OutcomeSampler::new(&state);
    let samples: Vec<Vec<i64>> = (0..repetitions).map(|_| sampler.sample(rng).labels).collect();
    Ok(JordanSample {
        median: coordinatewise_median(&samples),
        samples,
    })
}

/// Outcome distribution of one axis of a product state over `Z_q` whose
/// phases (in cycles) are given in label order.
pub fn zq_axis_distribution(phases: &[f64]) -> Result<Vec<f64>> {
    let norm = 1.0 / (phases.len() as f64).sqrt();
    let amps: Vec<Complex64> = phases
        .iter()
        .map(|&p| Complex64::from_polar(norm, 2.0 * PI * p.rem_euclid(1.0)))
        .collect();
    Ok(zq_transform_axis(&amps)?.iter().map(|a| a.norm_sqr()).collect())
}

/// Draw a centred label from a per-axis distribution.
pub fn sample_axis<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> i64 {
    let total: f64 = probabilities.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let half = (probabilities.len() as i64 - 1) / 2;
    for (i, p) in probabilities.iter().enumerate() {
        if u < *p {
            return i as i64 - half;
        }
        u -= p;
    }
    probabilities.len() as i64 - 1 - half
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    /// Direct `O(L^2)` matrix of the centred inverse transform on one axis,
    /// built from the grid values themselves.
    fn direct_inverse(values: &[f64], scale: f64, v: &[Complex64]) -> Vec<Complex64> {
        let l = values.len() as f64;
        values
            .iter()
            .map(|&k| {
                values
                    .iter()
                    .zip(v)
                    .map(|(&x, a)| a * Complex64::from_polar(1.0 / l.sqrt(), -2.0 * PI * scale * x * k))
                    .sum()
            })
            .collect()
    }

    fn random_state(lattice: Lattice, seed: u64) -> StateVector {
        let mut rng = rng_from_seed(seed);
        let size = lattice.size().unwrap() as usize;
        let mut amps: Vec<Complex64> = (0..size)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::new(lattice, amps).unwrap()
    }

    #[test]
    fn dyadic_transform_matches_direct_matrix() {
        for n in 1..=6 {
            let g = GridSpec::new(n, 1).unwrap();
            let lattice = Lattice::Dyadic(g);
            let s = random_state(lattice, n as u64);
            let fast = inverse_qft_axiswise(s.clone()).unwrap();
            let slow = direct_inverse(&g.axis_values(), g.axis_len() as f64, s.amplitudes());
            for (a, b) in fast.amplitudes().iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn modular_transform_matches_direct_matrix() {
        for q in [3u64, 5, 7, 11, 13] {
            let s = SqSpec::new(q, 1).unwrap();
            let state = random_state(Lattice::Modular(s), q);
            let fast = zq_transform_axis(state.amplitudes()).unwrap();
            let slow = direct_inverse(&s.axis_values(), q as f64, state.amplitudes());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12, "q = {q}");
            }
        }
        assert!(zq_transform_axis(&[Complex64::new(1.0, 0.0); 9]).is_err());
    }

    #[test]
    fn fourier_basis_state_decodes_exactly() {
        let g = GridSpec::new(5, 2).unwrap();
        let target = [3i64, -11];
        let kv: Vec<f64> = target.iter().map(|&l| g.label_to_value(l).unwrap()).collect();
        let scale = g.axis_len() as f64;
        let field = PhaseField::from_fn(Lattice::Dyadic(g), 1 << 20, |x| {
            Ok(scale * (x[0] * kv[0] + x[1] * kv[1]))
        })
        .unwrap();
        let state = build_state(&field, 1 << 20).unwrap();
        assert!((state.norm() - 1.0).abs() < 1e-12);
        let out = inverse_qft_axiswise(state).unwrap();
        let probs = out.probabilities();
        let best = (0..probs.len())
            .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
            .unwrap();
        assert!((probs[best] - 1.0).abs() < 1e-12);
        assert_eq!(out.labels_at(best), target.to_vec());
        let mut rng = rng_from_seed(1);
        assert_eq!(sample_outcome(&out, &mut rng).labels, target.to_vec());
    }

    #[test]
    fn zero_field_is_uniform_and_splits_around_zero() {
        let g = GridSpec::new(2, 1).unwrap();
        let field = PhaseField::from_values(Lattice::Dyadic(g), vec![0.0; 4]).unwrap();
        let state = build_state(&field, 16).unwrap();
        assert!(state.amplitudes().iter().all(|a| (a.re - 0.5).abs() < 1e-15 && a.im == 0.0));
        let out = inverse_qft_axiswise(state.clone()).unwrap();
        let direct = direct_inverse(&g.axis_values(), 4.0, state.amplitudes());
        let probs = out.probabilities();
        for (p, a) in probs.iter().zip(&direct) {
            assert!((p - a.norm_sqr()).abs() < 1e-12);
        }
        // The two labels nearest zero frequency share most of the mass.
        assert!((probs[1] - probs[2]).abs() < 1e-12);
        assert!(probs[1] + probs[2] > 0.8);
    }

    #[test]
    fn pure_modular_modes_concentrate() {
        for (q, b) in [(5usize, 2i64), (7, 0), (5, -2)] {
            let h = ((q - 1) / 2) as i64;
            let phases: Vec<f64> = (-h..=h).map(|k| (k * b) as f64 / q as f64).collect();
            let p = zq_axis_distribution(&phases).unwrap();
            assert!((p[(b + h) as usize] - 1.0).abs() < 1e-12, "q={q} b={b}");
        }
        // Off-lattice slope: the nearest label still wins, with the Fejer weight.
        let q = 7usize;
        let theta = 0.1;
        let phases: Vec<f64> = (-3..=3).map(|k| k as f64 * (2.0 + theta) / q as f64).collect();
        let p = zq_axis_distribution(&phases).unwrap();
        let best = (0..q).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(best as i64 - 3, 2);
        let fejer = (PI * theta).sin().powi(2) / (q as f64 * (PI * theta / q as f64).sin()).powi(2);
        assert!((p[best] - fejer).abs() < 1e-12);
    }

    #[test]
    fn modular_state_needs_modular_transform() {
        let s = SqSpec::new(5, 1).unwrap();
        let state = random_state(Lattice::Modular(s), 3);
        assert!(matches!(inverse_qft_axiswise(state.clone()), Err(Error::WrongLattice(_))));
        let out = inverse_zq_axiswise(state).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let g = GridSpec::new(10, 3).unwrap();
        let err = PhaseField::from_fn(Lattice::Dyadic(g), 1 << 24, |_| Ok(0.0)).unwrap_err();
        assert!(matches!(err, Error::Resource { limit, .. } if limit == 1 << 24));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = GridSpec::new(2, 1).unwrap();
        let field = PhaseField::from_values(Lattice::Dyadic(g), vec![0.0, 0.1, 0.3, 0.7]).unwrap();
        let state = build_state(&field, 16).unwrap();
        let a: Vec<_> = {
            let mut rng = rng_from_seed(9);
            (0..20).map(|_| sample_outcome(&state, &mut rng).labels).collect()
        };
        let b: Vec<_> = {
            let mut rng = rng_from_seed(9);
            (0..20).map(|_| sample_outcome(&state, &mut rng).labels).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn born_frequencies_match_two_point_superposition() {
        let g = GridSpec::new(3, 1).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        let p: f64 = 0.3;
        amps[1] = Complex64::new(p.sqrt(), 0.0);
        amps[6] = Complex64::new(0.0, (1.0 - p).sqrt());
        let state = StateVector::new(Lattice::Dyadic(g), amps).unwrap();
        let sampler = OutcomeSampler::new(&state);
        let mut rng = rng_from_seed(2024);
        let n = 10_000;
        let hits = (0..n).filter(|_| sampler.sample_index(&mut rng) == 1).count();
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - n as f64 * p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn median_takes_lower_middle() {
        let s = vec![vec![4, 1], vec![1, 2], vec![3, 3], vec![2, 4]];
        assert_eq!(coordinatewise_median(&s), vec![2, 2]);
        assert_eq!(coordinatewise_median(&[vec![7]]), vec![7]);
    }

    #[test]
    fn product_state_distribution_factorises() {
        let g = GridSpec::new(4, 2).unwrap();
        let f0 = |x: f64| 0.37 * x * 16.0 + 0.2 * x * x;
        let f1 = |x: f64| -2.1 * x * 16.0 + 0.05 * (3.0 * x).sin();
        let field = PhaseField::from_fn(Lattice::Dyadic(g), 1 << 10, |x| Ok(f0(x[0]) + f1(x[1]))).unwrap();
        let joint = inverse_qft_axiswise(build_state(&field, 1 << 10).unwrap())
            .unwrap()
            .probabilities();
        let g1 = GridSpec::new(4, 1).unwrap();
        let marginal = |f: &dyn Fn(f64) -> f64| {
            let field =
                PhaseField::from_fn(Lattice::Dyadic(g1), 16, |x| Ok(f(x[0]))).unwrap();
            inverse_qft_axiswise(build_state(&field, 16).unwrap())
                .unwrap()
                .probabilities()
        };
        let (p0, p1) = (marginal(&f0), marginal(&f1));
        let tv: f64 = (0..256)
            .map(|i| (joint[i] - p0[i / 16] * p1[i % 16]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn unitary_and_round_trip(n in 1u32..=5, d in 1usize..=4, seed in 0u64..1000) {
            prop_assume!(n as usize * d <= 20);
            let lattice = Lattice::Dyadic(GridSpec::new(n, d).unwrap());
            let s = random_state(lattice, seed);
            let back = inverse_qft_axiswise(s.clone()).unwrap();
            prop_assert!((back.norm() - 1.0).abs() < 1e-9);
            let round = qft_axiswise(back).unwrap();
            for (a, b) in round.amplitudes().iter().zip(s.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-9);
            }
        }
    }
}

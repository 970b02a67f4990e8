//! Sampling lattices: the dyadic grid `G_n^d` and the modular grid `S_q^d`.
//!
//! Labels are signed integers centred on zero. A dyadic label `l` sits at
//! `a * (l / 2^n + 1 / 2^(n+1))`; a modular label `k` sits at `a * k / q`.

use crate::error::{Error, Result};

/// Largest supported bits per axis; keeps every grid value exact in an f64.
pub const MAX_BITS: u32 = 40;

/// Dyadic grid with `2^n` points per axis in `(-a/2, a/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: u32,
    d: usize,
    a: f64,
}

impl GridSpec {
    pub fn new(n: u32, d: usize) -> Result<Self> {
        Self::with_scale(n, d, 1.0)
    }

    pub fn with_scale(n: u32, d: usize, a: f64) -> Result<Self> {
        if n == 0 || n > MAX_BITS {
            return Err(Error::Range {
                what: "bits per axis",
                value: n as f64,
                min: 1.0,
                max: MAX_BITS as f64,
            });
        }
        if d == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Parameter(format!("grid scale must be positive, got {a}")));
        }
        Ok(Self { n, d, a })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Points per axis, `2^n`.
    pub fn axis_len(&self) -> usize {
        1usize << self.n
    }

    /// Total point count `2^(n d)`, or `None` if it overflows `u128`.
    pub fn size(&self) -> Option<u128> {
        let bits = self.n as u128 * self.d as u128;
        (bits < 128).then(|| 1u128 << bits)
    }

    pub fn min_label(&self) -> i64 {
        -(1i64 << (self.n - 1))
    }

    pub fn max_label(&self) -> i64 {
        (1i64 << (self.n - 1)) - 1
    }

    pub fn label_to_value(&self, label: i64) -> Result<f64> {
        if label < self.min_label() || label > self.max_label() {
            return Err(Error::Range {
                what: "grid label",
                value: label as f64,
                min: self.min_label() as f64,
                max: self.max_label() as f64,
            });
        }
        Ok(self.value_unchecked(label))
    }

    fn value_unchecked(&self, label: i64) -> f64 {
        let step = (-(self.n as f64)).exp2();
        self.a * (label as f64 * step + 0.5 * step)
    }

    /// Exact inverse of [`label_to_value`](Self::label_to_value).
    pub fn value_to_label(&self, value: f64) -> Result<i64> {
        let t = value / self.a * self.axis_len() as f64 - 0.5;
        if !t.is_finite() {
            return Err(Error::NotGridPoint { value });
        }
        let label = t.round() as i64;
        if label < self.min_label() || label > self.max_label() {
            return Err(Error::NotGridPoint { value });
        }
        if self.value_unchecked(label) != value {
            return Err(Error::NotGridPoint { value });
        }
        Ok(label)
    }

    /// Closest label; exact midpoints go to the smaller label and values
    /// beyond the grid clamp to the end labels.
    pub fn nearest_label(&self, value: f64) -> i64 {
        let t = value / self.a * self.axis_len() as f64 - 0.5;
        if t.is_nan() {
            return self.min_label();
        }
        let lo = (t.floor().max(self.min_label() as f64) as i64).min(self.max_label());
        let hi = (lo + 1).min(self.max_label());
        let d_lo = (self.value_unchecked(lo) - value).abs();
        let d_hi = (self.value_unchecked(hi) - value).abs();
        if d_hi < d_lo {
            hi
        } else {
            lo
        }
    }

    /// Label of the `index`-th point along an axis (index 0 is the smallest).
    pub fn index_to_label(&self, index: usize) -> i64 {
        index as i64 + self.min_label()
    }

    pub fn label_to_index(&self, label: i64) -> usize {
        (label - self.min_label()) as usize
    }

    /// All axis values in index order.
    pub fn axis_values(&self) -> Vec<f64> {
        (self.min_label()..=self.max_label())
            .map(|l| self.value_unchecked(l))
            .collect()
    }

    /// Point at a row-major flat index (axis 0 varies slowest).
    pub fn point(&self, flat_index: usize) -> GridPoint {
        let mut labels = vec![0i64; self.d];
        let mut rest = flat_index;
        for slot in labels.iter_mut().rev() {
            *slot = self.index_to_label(rest % self.axis_len());
            rest /= self.axis_len();
        }
        let values = labels.iter().map(|&l| self.value_unchecked(l)).collect();
        GridPoint { labels, values }
    }
}

/// A point of a [`GridSpec`] with its labels and coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub labels: Vec<i64>,
    pub values: Vec<f64>,
}

/// Modular grid `{a k / q}` with `q` an odd prime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqSpec {
    q: u64,
    d: usize,
    a: f64,
}

impl SqSpec {
    pub fn new(q: u64, d: usize) -> Result<Self> {
        Self::with_scale(q, d, 1.0)
    }

    pub fn with_scale(q: u64, d: usize, a: f64) -> Result<Self> {
        if q <= 2 || !is_prime(q) {
            return Err(Error::Parameter(format!("q = {q} is not an odd prime")));
        }
        if d == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Parameter(format!("grid scale must be positive, got {a}")));
        }
        Ok(Self { q, d, a })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `(q - 1) / 2`, the largest label.
    pub fn half(&self) -> i64 {
        ((self.q - 1) / 2) as i64
    }

    pub fn axis_len(&self) -> usize {
        self.q as usize
    }

    pub fn size(&self) -> Option<u128> {
        (self.q as u128).checked_pow(self.d as u32)
    }

    pub fn sq_value(&self, k: i64) -> Result<f64> {
        if k.abs() > self.half() {
            return Err(Error::Range {
                what: "modular label",
                value: k as f64,
                min: -self.half() as f64,
                max: self.half() as f64,
            });
        }
        Ok(self.a * k as f64 / self.q as f64)
    }

    pub fn index_to_label(&self, index: usize) -> i64 {
        index as i64 - self.half()
    }

    pub fn axis_values(&self) -> Vec<f64> {
        (-self.half()..=self.half())
            .map(|k| self.a * k as f64 / self.q as f64)
            .collect()
    }
}

/// Deterministic primality by trial division; adequate for the moduli used here.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut f = 3u64;
    while f.saturating_mul(f) <= n {
        if n % f == 0 {
            return false;
        }
        f += 2;
    }
    true
}

/// Map an integer to the symmetric residue range `[-(q-1)/2, (q-1)/2]`.
pub fn symmetric_residue(x: i64, q: u64) -> i64 {
    let q = q as i64;
    let r = x.rem_euclid(q);
    if r > (q - 1) / 2 {
        r - q
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_values_match_examples() {
        let g1 = GridSpec::new(1, 1).unwrap();
        assert_eq!(g1.label_to_value(-1).unwrap(), -0.25);
        assert_eq!(g1.label_to_value(0).unwrap(), 0.25);
        let g4 = GridSpec::new(4, 1).unwrap();
        assert_eq!(g4.label_to_value(-8).unwrap(), -15.0 / 32.0);
        assert!(matches!(g4.label_to_value(8), Err(Error::Range { .. })));
    }

    #[test]
    fn value_to_label_inverts_and_rejects_off_grid() {
        let g1 = GridSpec::new(1, 1).unwrap();
        assert_eq!(g1.value_to_label(0.25).unwrap(), 0);
        let g4 = GridSpec::new(4, 1).unwrap();
        assert_eq!(g4.value_to_label(-15.0 / 32.0).unwrap(), -8);
        let g = GridSpec::with_scale(2, 1, 0.5).unwrap();
        assert!(matches!(g.value_to_label(0.3), Err(Error::NotGridPoint { .. })));
    }

    #[test]
    fn nearest_label_ties_and_clamps() {
        let g2 = GridSpec::new(2, 1).unwrap();
        assert_eq!(g2.nearest_label(0.0), -1);
        assert_eq!(g2.nearest_label(3.0), 1);
        assert_eq!(g2.nearest_label(-3.0), -2);
        let g4 = GridSpec::new(4, 1).unwrap();
        assert_eq!(g4.nearest_label(0.47), 7);
    }

    #[test]
    fn sq_values() {
        let s5 = SqSpec::new(5, 1).unwrap();
        assert_eq!(s5.sq_value(2).unwrap(), 2.0 / 5.0);
        assert_eq!(s5.sq_value(-2).unwrap(), -2.0 / 5.0);
        assert!(s5.sq_value(3).is_err());
        assert_eq!(SqSpec::new(7, 1).unwrap().sq_value(0).unwrap(), 0.0);
        assert!(SqSpec::new(9, 1).is_err());
        assert!(SqSpec::new(2, 1).is_err());
    }

    #[test]
    fn bijection_is_exhaustive_up_to_twelve_bits() {
        for n in 1..=12 {
            let g = GridSpec::new(n, 1).unwrap();
            for l in g.min_label()..=g.max_label() {
                let v = g.label_to_value(l).unwrap();
                assert_eq!(g.value_to_label(v).unwrap(), l);
                assert_eq!(g.nearest_label(v), l);
                assert!(v > -0.5 && v < 0.5);
            }
        }
    }

    #[test]
    fn spacing_is_uniform() {
        let g = GridSpec::with_scale(5, 1, 0.75).unwrap();
        let v = g.axis_values();
        for w in v.windows(2) {
            assert!((w[1] - w[0] - 0.75 / 32.0).abs() < 1e-15);
        }
        let s = SqSpec::with_scale(11, 1, 2.0).unwrap();
        let v = s.axis_values();
        for w in v.windows(2) {
            assert!((w[1] - w[0] - 2.0 / 11.0).abs() < 1e-15);
        }
        assert!(v.iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn flat_points_are_row_major() {
        let g = GridSpec::new(2, 3).unwrap();
        assert_eq!(g.size(), Some(64));
        assert_eq!(g.point(0).labels, vec![-2, -2, -2]);
        assert_eq!(g.point(1).labels, vec![-2, -2, -1]);
        assert_eq!(g.point(63).labels, vec![1, 1, 1]);
    }

    #[test]
    fn residues_are_symmetric() {
        assert_eq!(symmetric_residue(4, 7), -3);
        assert_eq!(symmetric_residue(-4, 7), 3);
        assert_eq!(symmetric_residue(3, 7), 3);
        assert!(is_prime(41) && !is_prime(39) && !is_prime(1));
    }

    proptest! {
        #[test]
        fn scaled_bijection(n in 1u32..=20, frac in 0.0f64..1.0, a in 0.01f64..10.0) {
            let g = GridSpec::with_scale(n, 1, a).unwrap();
            let span = (g.max_label() - g.min_label()) as f64;
            let l = g.min_label() + (frac * span).round() as i64;
            let v = g.label_to_value(l).unwrap();
            prop_assert_eq!(g.value_to_label(v).unwrap(), l);
            prop_assert_eq!(g.nearest_label(v), l);
            prop_assert!(v.abs() < a / 2.0);
        }

        #[test]
        fn nearest_label_minimises_distance(n in 1u32..=8, x in -1.0f64..1.0) {
            let g = GridSpec::new(n, 1).unwrap();
            let best = g.nearest_label(x);
            let dbest = (g.label_to_value(best).unwrap() - x).abs();
            for l in g.min_label()..=g.max_label() {
                prop_assert!((g.label_to_value(l).unwrap() - x).abs() >= dbest);
            }
        }
    }
}

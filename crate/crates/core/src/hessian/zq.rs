//! Arithmetic over `Z_q` and sparse row recovery from probe residues.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{is_prime, symmetric_residue};

/// How far above the start [`next_prime`] searches.
pub const PRIME_SEARCH_WINDOW: u64 = 100_000;

/// Smallest odd prime `>= from`.
pub fn next_prime(from: u64) -> Result<u64> {
    let start = from.max(3);
    (start..start.saturating_add(PRIME_SEARCH_WINDOW))
        .find(|&p| is_prime(p))
        .ok_or_else(|| {
            Error::Parameter(format!(
                "no prime in [{start}, {start} + {PRIME_SEARCH_WINDOW})"
            ))
        })
}

/// A `d x d` integer matrix reduced into `[-(q-1)/2, (q-1)/2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZqMatrix {
    q: u64,
    entries: DMatrix<i64>,
}

impl ZqMatrix {
    pub fn new(q: u64, entries: DMatrix<i64>) -> Result<Self> {
        if q <= 2 || !is_prime(q) {
            return Err(Error::Parameter(format!("q = {q} is not an odd prime")));
        }
        if !entries.is_square() {
            return Err(Error::Parameter("residue matrix must be square".into()));
        }
        Ok(Self {
            q,
            entries: entries.map(|v| symmetric_residue(v, q)),
        })
    }

    pub fn zeros(q: u64, d: usize) -> Result<Self> {
        Self::new(q, DMatrix::zeros(d, d))
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<i64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[(i, j)]
    }

    /// First `(i, j)` with `L_ij != L_ji`.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        let d = self.d();
        (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .find(|&(i, j)| self.entries[(i, j)] != self.entries[(j, i)])
    }

    /// `scale * L / q`.
    pub fn to_real(&self, scale: f64) -> DMatrix<f64> {
        self.entries.map(|v| scale * v as f64 / self.q as f64)
    }

    /// Nonzeros in the fullest row.
    pub fn max_row_support(&self) -> usize {
        self.entries
            .row_iter()
            .map(|r| r.iter().filter(|&&v| v != 0).count())
            .max()
            .unwrap_or(0)
    }
}

fn to_mod(x: i64, q: u64) -> u64 {
    x.rem_euclid(q as i64) as u64
}

fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

fn inv_mod(a: u64, q: u64) -> u64 {
    // Fermat: a^(q-2).
    let mut result = 1;
    let mut base = a % q;
    let mut exp = q - 2;
    while exp > 0 {
        if exp & 1 == 1 {
            result = mul_mod(result, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    result
}

/// Solution set `{particular + span(nullspace)}` of `A x = b` over `Z_q`,
/// or `None` if inconsistent.
fn solve_mod(mut a: Vec<Vec<u64>>, mut b: Vec<u64>, cols: usize, q: u64) -> Option<(Vec<u64>, Vec<Vec<u64>>)> {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| a[i][c] != 0) else {
            continue;
        };
        a.swap(r, p);
        b.swap(r, p);
        let inv = inv_mod(a[r][c], q);
        for v in a[r].iter_mut() {
            *v = mul_mod(*v, inv, q);
        }
        b[r] = mul_mod(b[r], inv, q);
        for i in 0..rows {
            if i != r && a[i][c] != 0 {
                let f = a[i][c];
                for k in 0..cols {
                    a[i][k] = (a[i][k] + q - mul_mod(f, a[r][k], q)) % q;
                }
                b[i] = (b[i] + q - mul_mod(f, b[r], q)) % q;
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    if b[r..].iter().any(|&v| v != 0) {
        return None;
    }
    let mut particular = vec![0; cols];
    for (i, &c) in pivots.iter().enumerate() {
        particular[c] = b[i];
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let nullspace = free
        .iter()
        .map(|&f| {
            let mut v = vec![0; cols];
            v[f] = 1;
            for (i, &c) in pivots.iter().enumerate() {
                v[c] = (q - a[i][f]) % q;
            }
            v
        })
        .collect();
    Some((particular, nullspace))
}

/// Visit every `k`-subset of `0..d` in lexicographic order.
fn for_each_subset(d: usize, k: usize, mut visit: impl FnMut(&[usize]) -> bool) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > d {
        return;
    }
    loop {
        if !visit(&idx) {
            return;
        }
        let Some(i) = (0..k).rev().find(|&i| idx[i] < d - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Candidates kept per row before a row is declared hopelessly ambiguous.
const CANDIDATE_LIMIT: usize = 64;

/// Rows `l` with at most `s` nonzeros and `l . y_i = b_i (mod q)` for every
/// probe `y_i`, stopping once more than `limit` are found.
fn row_candidates(probes: &[Vec<i64>], residues: &[i64], q: u64, s: usize, limit: usize) -> Vec<Vec<i64>> {
    let d = probes.first().map_or(0, Vec::len);
    let rhs: Vec<u64> = residues.iter().map(|&v| to_mod(v, q)).collect();
    let mut found: Vec<Vec<i64>> = Vec::new();
    for size in 0..=s.min(d) {
        for_each_subset(d, size, |support| {
            let a: Vec<Vec<u64>> = probes
                .iter()
                .map(|y| support.iter().map(|&j| to_mod(y[j], q)).collect())
                .collect();
            let Some((base, null)) = solve_mod(a, rhs.clone(), size, q) else {
                return true;
            };
            let mut coeffs = vec![0u64; null.len()];
            loop {
                let x: Vec<u64> = (0..size)
                    .map(|c| {
                        null.iter()
                            .zip(&coeffs)
                            .fold(base[c], |acc, (v, &t)| (acc + mul_mod(t, v[c], q)) % q)
                    })
                    .collect();
                // Exact support only, so each row appears under one subset.
                if x.iter().all(|&v| v != 0) {
                    let mut full = vec![0i64; d];
                    for (&j, &v) in support.iter().zip(&x) {
                        full[j] = symmetric_residue(v as i64, q);
                    }
                    found.push(full);
                    if found.len() > limit {
                        return false;
                    }
                }
                let Some(pos) = coeffs.iter().position(|&t| t + 1 < q) else {
                    break;
                };
                coeffs[pos] += 1;
                for t in &mut coeffs[..pos] {
                    *t = 0;
                }
            }
            true
        });
        if found.len() > limit {
            break;
        }
    }
    found
}

fn check_lengths(probes: &[Vec<i64>], residues: usize) -> Result<()> {
    if probes.len() != residues {
        return Err(Error::Parameter(format!(
            "{} probes but {residues} residues",
            probes.len()
        )));
    }
    Ok(())
}

/// The unique row with at most `s` nonzeros matching the residues of one
/// coordinate, judged on that row alone.
pub fn recover_row(probes: &[Vec<i64>], residues: &[i64], q: u64, s: usize, row: usize) -> Result<Vec<i64>> {
    check_lengths(probes, residues.len())?;
    let mut found = row_candidates(probes, residues, q, s, 1);
    match found.len() {
        1 => Ok(found.pop().expect("one candidate")),
        0 => Err(Error::Inconsistency {
            row,
            detail: format!("no row with at most {s} nonzeros matches the residues"),
        }),
        n => Err(Error::Ambiguity { row, candidates: n }),
    }
}

/// Outcome of recovering one row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowRecovery {
    Unique(Vec<i64>),
    /// This many candidates survive (a lower bound when the search stopped early).
    Ambiguous(usize),
    Inconsistent,
}

/// Recover all rows. Rows with several candidates are narrowed using
/// symmetry: a candidate must agree with `L[r, c] = L[c, r]` for every
/// row `c` already pinned down. Repeats until nothing changes.
/// `residues[i][j]` is the measured `(L y_i)_j`.
pub fn recover_rows(probes: &[Vec<i64>], residues: &[Vec<i64>], q: u64, s: usize) -> Result<Vec<RowRecovery>> {
    check_lengths(probes, residues.len())?;
    let d = residues.first().map_or(0, Vec::len);
    let mut candidates: Vec<Vec<Vec<i64>>> = (0..d)
        .map(|row| {
            let b: Vec<i64> = residues.iter().map(|r| r[row]).collect();
            row_candidates(probes, &b, q, s, CANDIDATE_LIMIT)
        })
        .collect();
    let overflow: Vec<bool> = candidates.iter().map(|c| c.len() > CANDIDATE_LIMIT).collect();
    loop {
        let pinned: Vec<Option<Vec<i64>>> = candidates
            .iter()
            .zip(&overflow)
            .map(|(c, &over)| (c.len() == 1 && !over).then(|| c[0].clone()))
            .collect();
        let mut changed = false;
        for (row, cands) in candidates.iter_mut().enumerate() {
            if cands.len() < 2 || overflow[row] {
                continue;
            }
            let before = cands.len();
            cands.retain(|cand| {
                pinned
                    .iter()
                    .enumerate()
                    .all(|(c, p)| p.as_ref().is_none_or(|other| other[row] == cand[c]))
            });
            changed |= cands.len() != before;
        }
        if !changed {
            break;
        }
    }
    Ok(candidates
        .into_iter()
        .zip(overflow)
        .map(|(mut c, over)| match c.len() {
            1 if !over => RowRecovery::Unique(c.pop().expect("one candidate")),
            0 => RowRecovery::Inconsistent,
            n => RowRecovery::Ambiguous(n),
        })
        .collect())
}

/// Recover every row and check the result is symmetric.
pub fn recover_sparse_rows(probes: &[Vec<i64>], residues: &[Vec<i64>], q: u64, s: usize) -> Result<ZqMatrix> {
    let d = residues.first().map_or(0, Vec::len);
    let mut l = DMatrix::<i64>::zeros(d, d);
    for (row, outcome) in recover_rows(probes, residues, q, s)?.into_iter().enumerate() {
        match outcome {
            RowRecovery::Unique(values) => l.row_mut(row).copy_from_slice(&values),
            RowRecovery::Ambiguous(candidates) => return Err(Error::Ambiguity { row, candidates }),
            RowRecovery::Inconsistent => {
                return Err(Error::Inconsistency {
                    row,
                    detail: format!("no row with at most {s} nonzeros matches the residues"),
                })
            }
        }
    }
    let m = ZqMatrix::new(q, l)?;
    check_symmetric(&m)?;
    Ok(m)
}

pub(crate) fn check_symmetric(m: &ZqMatrix) -> Result<()> {
    match m.asymmetry() {
        None => Ok(()),
        Some((i, j)) => Err(Error::Inconsistency {
            row: i,
            detail: format!(
                "recovered L[{i},{j}] = {} but L[{j},{i}] = {}",
                m.get(i, j),
                m.get(j, i)
            ),
        }),
    }
}

/// `L y mod q` in the symmetric range.
pub fn apply_mod(l: &ZqMatrix, y: &[i64]) -> Vec<i64> {
    l.entries()
        .row_iter()
        .map(|r| symmetric_residue(r.iter().zip(y).map(|(a, b)| a * b).sum(), l.q()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn primes_are_found_upward() {
        assert_eq!(next_prime(0).unwrap(), 3);
        assert_eq!(next_prime(7).unwrap(), 7);
        assert_eq!(next_prime(8).unwrap(), 11);
        assert_eq!(next_prime(40).unwrap(), 41);
        assert!(ZqMatrix::zeros(9, 2).is_err());
    }

    #[test]
    fn solver_handles_free_columns() {
        // x0 + x1 = 3 mod 5 has a one-dimensional nullspace.
        let (p, n) = solve_mod(vec![vec![1, 1]], vec![3], 2, 5).unwrap();
        assert_eq!(p, vec![3, 0]);
        assert_eq!(n, vec![vec![4, 1]]);
        assert!(solve_mod(vec![vec![1], vec![1]], vec![1, 2], 1, 5).is_none());
    }

    #[test]
    fn residue_example_row() {
        // Row (0, 3, 0, -2) against the all-ones probe gives 3 - 2 = 1.
        let l = ZqMatrix::new(
            11,
            DMatrix::from_row_slice(4, 4, &[0, 3, 0, -2, 3, 0, 0, 0, 0, 0, 0, 0, -2, 0, 0, 0]),
        )
        .unwrap();
        assert_eq!(apply_mod(&l, &[1, 1, 1, 1])[0], 1);
        assert_eq!(apply_mod(&l, &[0, 0, 0, 0]), vec![0; 4]);
    }

    #[test]
    fn zero_matrix_from_any_probes() {
        let probes = vec![vec![1, 0, 1], vec![0, 1, 1]];
        let residues = vec![vec![0; 3]; 2];
        let l = recover_sparse_rows(&probes, &residues, 5, 0).unwrap();
        assert_eq!(l, ZqMatrix::zeros(5, 3).unwrap());
    }

    #[test]
    fn identical_rows_on_one_probe_are_ambiguous() {
        // With one probe (1, 1) the residue 1 fits both e_0 and e_1.
        let err = recover_row(&[vec![1, 1]], &[1], 5, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Ambiguity { row: 0, .. }));
    }

    #[test]
    fn dense_row_under_small_s_is_inconsistent() {
        let l = ZqMatrix::new(7, DMatrix::from_element(3, 3, 1)).unwrap();
        let probes = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0]];
        let residues: Vec<Vec<i64>> = probes.iter().map(|y| apply_mod(&l, y)).collect();
        let err = recover_sparse_rows(&probes, &residues, 7, 1).unwrap_err();
        assert!(matches!(err, Error::Inconsistency { .. }));
        assert_eq!(recover_sparse_rows(&probes, &residues, 7, 3).unwrap(), l);
    }

    #[test]
    fn symmetry_resolves_a_row_tied_on_the_probes() {
        // Columns 1 and 2 coincide on both probes, so row 0 alone cannot
        // tell L[0,1] from L[0,2]; row 1 pins L[1,0] = 2.
        let mut e = DMatrix::<i64>::zeros(3, 3);
        e[(0, 1)] = 2;
        e[(1, 0)] = 2;
        let l = ZqMatrix::new(7, e).unwrap();
        let probes = vec![vec![1, 1, 1], vec![0, 1, 1], vec![1, 0, 0]];
        let residues: Vec<Vec<i64>> = probes.iter().map(|y| apply_mod(&l, y)).collect();
        let column0: Vec<i64> = residues.iter().map(|r| r[0]).collect();
        assert!(matches!(recover_row(&probes, &column0, 7, 1, 0), Err(Error::Ambiguity { .. })));
        assert_eq!(recover_sparse_rows(&probes, &residues, 7, 1).unwrap(), l);
    }

    #[test]
    fn single_entry_rows_recovered_from_eight_probes() {
        // d = 6, q = 5, s = 1, k = 8: a permutation-like symmetric matrix.
        let mut e = DMatrix::<i64>::zeros(6, 6);
        for &(i, j, v) in &[(0, 3, 2), (1, 4, -1), (2, 5, 1)] {
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
        let l = ZqMatrix::new(5, e).unwrap();
        let mut ok = 0;
        for seed in 0..50 {
            let mut rng = rng_from_seed(seed);
            let probes: Vec<Vec<i64>> = (0..8)
                .map(|_| (0..6).map(|_| rng.gen_range(0..2)).collect())
                .collect();
            let residues: Vec<Vec<i64>> = probes.iter().map(|y| apply_mod(&l, y)).collect();
            if recover_sparse_rows(&probes, &residues, 5, 1).ok().as_ref() == Some(&l) {
                ok += 1;
            }
        }
        assert!(ok >= 48, "{ok}/50");
    }

    #[test]
    fn distinct_rows_collide_at_most_half_the_time() {
        // Rows differing in two coordinates agree on a random binary probe
        // only when the difference polynomial vanishes there.
        let diff = [1i64, -1, 0, 0];
        let mut rng = rng_from_seed(9);
        let trials = 4000;
        let hits = (0..trials)
            .filter(|_| {
                let y: Vec<i64> = (0..4).map(|_| rng.gen_range(0..2)).collect();
                symmetric_residue(diff.iter().zip(&y).map(|(a, b)| a * b).sum(), 7) == 0
            })
            .count();
        let p = 0.5;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64) <= p + 3.0 * sigma);
    }

    proptest! {
        #[test]
        fn recovery_is_exact_with_basis_probes(
            values in proptest::collection::vec(-3i64..=3, 6),
        ) {
            // Symmetric 3x3 from its upper triangle.
            let mut e = DMatrix::<i64>::zeros(3, 3);
            let mut it = values.iter();
            for i in 0..3 {
                for j in i..3 {
                    let v = *it.next().unwrap();
                    e[(i, j)] = v;
                    e[(j, i)] = v;
                }
            }
            let l = ZqMatrix::new(7, e).unwrap();
            let probes: Vec<Vec<i64>> = (0..3)
                .map(|k| (0..3).map(|j| i64::from(j == k)).collect())
                .collect();
            let residues: Vec<Vec<i64>> = probes.iter().map(|y| apply_mod(&l, y)).collect();
            prop_assert_eq!(recover_sparse_rows(&probes, &residues, 7, 3).unwrap(), l);
        }
    }
}

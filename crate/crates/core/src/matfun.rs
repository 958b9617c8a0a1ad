//! Matrix functions: permanent (exact and randomized), hafnian, loop hafnian and
//! the repeated-index matrices that feed them.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CvError, Result};
use crate::fock::FockVector;
use crate::special::factorial;
use crate::types::{ensure_square, operator_norm, symmetrized, ComplexMatrix, ConfidenceValue, OccupationTuple, C64};

pub const NAIVE_LIMIT: usize = 9;
pub const RYSER_LIMIT: usize = 20;
pub const HAFNIAN_LIMIT: usize = 16;
pub const LOOP_HAFNIAN_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PermanentMethod {
    Naive,
    Ryser,
}

/// Row and column multiplicities for [`repeat_matrix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionSpec {
    pub row_reps: OccupationTuple,
    pub col_reps: OccupationTuple,
}

pub fn permanent_exact(a: &ComplexMatrix, method: PermanentMethod) -> Result<C64> {
    let n = ensure_square(a)?;
    match method {
        PermanentMethod::Naive => {
            if n > NAIVE_LIMIT {
                return Err(CvError::SizeLimit { what: "naive permanent", size: n, limit: NAIVE_LIMIT });
            }
            Ok(permanent_naive(a))
        }
        PermanentMethod::Ryser => {
            if n > RYSER_LIMIT {
                return Err(CvError::SizeLimit { what: "Ryser permanent", size: n, limit: RYSER_LIMIT });
            }
            Ok(permanent_ryser(a))
        }
    }
}

/// Ryser permanent; panics only through indexing, callers check the size.
pub fn permanent(a: &ComplexMatrix) -> C64 {
    permanent_ryser(a)
}

fn permanent_naive(a: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = C64::default();
    // Heap's algorithm
    let mut cnt = vec![0usize; n];
    let term = |p: &[usize]| -> C64 { (0..n).map(|i| a[(i, p[i])]).product() };
    total += term(&perm);
    let mut i = 0;
    while i < n {
        if cnt[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(cnt[i], i);
            }
            total += term(&perm);
            cnt[i] += 1;
            i = 0;
        } else {
            cnt[i] = 0;
            i += 1;
        }
    }
    total
}

fn permanent_ryser(a: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    // Gray-code walk over column subsets, keeping the row sums up to date.
    let mut row_sums = vec![C64::default(); n];
    let mut total = C64::default();
    let mut prev_gray = 0usize;
    for k in 1..(1usize << n) {
        let gray = k ^ (k >> 1);
        let changed = (gray ^ prev_gray).trailing_zeros() as usize;
        let added = gray & (1 << changed) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += a[(i, changed)];
            } else {
                *s -= a[(i, changed)];
            }
        }
        prev_gray = gray;
        let prod: C64 = row_sums.iter().product();
        if gray.count_ones() % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// One Glynn term `prod_i x_i * prod_j (sum_i x_i a_ij)` for a sign vector `x`.
pub fn glynn_term(a: &ComplexMatrix, signs: &[f64]) -> C64 {
    let n = a.nrows();
    let sign: f64 = signs.iter().product();
    let mut prod = C64::new(sign, 0.0);
    for j in 0..n {
        let col: C64 = (0..n).map(|i| a[(i, j)] * signs[i]).sum();
        prod *= col;
    }
    prod
}

/// Randomized permanent estimate from uniformly random sign vectors.
///
/// Each term is bounded by `||A||^n` (operator norm), so Hoeffding on the real and
/// imaginary parts gives the reported additive bound at failure probability `delta`.
pub fn permanent_estimate(a: &ComplexMatrix, samples: usize, seed: u64, delta: f64) -> Result<ConfidenceValue<C64>> {
    let n = ensure_square(a)?;
    if samples == 0 {
        return Err(CvError::InvalidParameter("need at least one sample".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CvError::InvalidParameter("delta must lie in (0,1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signs = vec![1.0; n];
    let mut acc = C64::default();
    for _ in 0..samples {
        for s in signs.iter_mut() {
            *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        acc += glynn_term(a, &signs);
    }
    let scale = operator_norm(a).powi(n as i32);
    let t = scale * (2.0 * (4.0 / delta).ln() / samples as f64).sqrt();
    Ok(ConfidenceValue { value: acc / samples as f64, bound: 2f64.sqrt() * t, failure_probability: delta })
}

fn dense_memo_size(n: usize) -> usize {
    1usize << n
}

/// Hafnian by memoized recursion over the lowest unmatched index.
pub fn hafnian_exact(a: &ComplexMatrix) -> Result<C64> {
    let n = ensure_square(a)?;
    if n % 2 == 1 {
        return Ok(C64::default());
    }
    if n > HAFNIAN_LIMIT {
        return Err(CvError::SizeLimit { what: "hafnian", size: n, limit: HAFNIAN_LIMIT });
    }
    let a = symmetrized(a)?;
    let mut memo = vec![None; dense_memo_size(n)];
    Ok(haf_rec(&a, (1usize << n) - 1, &mut memo, false))
}

/// Loop hafnian: sum over partitions into pairs and singletons, singleton `k` weighted by `a_kk`.
pub fn loop_hafnian_exact(a: &ComplexMatrix) -> Result<C64> {
    let n = ensure_square(a)?;
    if n > LOOP_HAFNIAN_LIMIT {
        return Err(CvError::SizeLimit { what: "loop hafnian", size: n, limit: LOOP_HAFNIAN_LIMIT });
    }
    let a = symmetrized(a)?;
    let mut memo = vec![None; dense_memo_size(n)];
    Ok(haf_rec(&a, (1usize << n) - 1, &mut memo, true))
}

fn haf_rec(a: &ComplexMatrix, set: usize, memo: &mut [Option<C64>], loops: bool) -> C64 {
    if set == 0 {
        return C64::new(1.0, 0.0);
    }
    if let Some(v) = memo[set] {
        return v;
    }
    let i = set.trailing_zeros() as usize;
    let rest = set & !(1 << i);
    let mut total = C64::default();
    if loops {
        total += a[(i, i)] * haf_rec(a, rest, memo, loops);
    }
    let mut r = rest;
    while r != 0 {
        let j = r.trailing_zeros() as usize;
        r &= r - 1;
        total += a[(i, j)] * haf_rec(a, rest & !(1 << j), memo, loops);
    }
    memo[set] = Some(total);
    total
}

/// Duplicate row `i` `row_reps[i]` times and column `j` `col_reps[j]` times.
pub fn repeat_matrix(a: &ComplexMatrix, spec: &RepetitionSpec) -> Result<ComplexMatrix> {
    if spec.row_reps.len() != a.nrows() || spec.col_reps.len() != a.ncols() {
        return Err(CvError::DimensionMismatch(format!(
            "{}x{} matrix with repetition lengths {} and {}",
            a.nrows(),
            a.ncols(),
            spec.row_reps.len(),
            spec.col_reps.len()
        )));
    }
    Ok(select(a, &expand(&spec.row_reps), &expand(&spec.col_reps)))
}

/// Indices `i` listed `reps[i]` times each.
pub fn expand(reps: &[usize]) -> Vec<usize> {
    reps.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect()
}

pub fn select(a: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> ComplexMatrix {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Matrix `A_{p,q}` for the loop-hafnian expansion of Gaussian output densities:
/// row/column `k` of `v` repeated `p_k` times, row/column `m+k` repeated `q_k`
/// times, then the diagonal replaced by the matching entries of `d`.
pub fn repeat_symmetric(v: &ComplexMatrix, d: &[C64], p: &[usize], q: &[usize]) -> Result<ComplexMatrix> {
    let two_m = ensure_square(v)?;
    let m = p.len();
    if two_m != 2 * m || q.len() != m || d.len() != two_m {
        return Err(CvError::DimensionMismatch(format!(
            "V is {two_m}x{two_m}, D has {} entries, p and q have {} and {}",
            d.len(),
            p.len(),
            q.len()
        )));
    }
    let mut idx = expand(p);
    idx.extend(expand(q).into_iter().map(|k| k + m));
    let mut out = select(v, &idx, &idx);
    for (i, &k) in idx.iter().enumerate() {
        out[(i, i)] = d[k];
    }
    Ok(out)
}

/// `Per(G)/m!` for the Gram matrix of the given states: the least error probability of
/// a one-sided test that all states are equal.
pub fn gram_error_bound(states: &[FockVector]) -> Result<f64> {
    let m = states.len();
    if m == 0 {
        return Err(CvError::InvalidParameter("no states given".into()));
    }
    if m > 8 {
        return Err(CvError::SizeLimit { what: "Gram permanent", size: m, limit: 8 });
    }
    for s in states {
        s.ensure_normalized()?;
    }
    let mut g = DMatrix::zeros(m, m);
    for k in 0..m {
        for l in 0..m {
            g[(k, l)] = states[k].inner(&states[l])?;
        }
    }
    Ok((permanent(&g).re / factorial(m)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{c, random_unitary};
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        DMatrix::from_fn(n, n, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            c(re, im)
        })
    }

    #[test]
    fn permanent_small_cases() {
        let id = ComplexMatrix::identity(3, 3);
        let ones = DMatrix::from_element(3, 3, c(1.0, 0.0));
        for m in [PermanentMethod::Naive, PermanentMethod::Ryser] {
            assert!((permanent_exact(&id, m).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
            assert!((permanent_exact(&ones, m).unwrap() - c(6.0, 0.0)).norm() < 1e-13);
            assert_eq!(permanent_exact(&DMatrix::zeros(0, 0), m).unwrap(), c(1.0, 0.0));
        }
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        assert!((permanent(&a) - c(10.0, 0.0)).norm() < 1e-14);
        assert!(permanent_exact(&DMatrix::zeros(2, 3), PermanentMethod::Ryser).is_err());
        assert!(permanent_exact(&DMatrix::zeros(10, 10), PermanentMethod::Naive).is_err());
    }

    #[test]
    fn ryser_matches_naive_7() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(7, &mut rng);
        let x = permanent_exact(&a, PermanentMethod::Naive).unwrap();
        let y = permanent_exact(&a, PermanentMethod::Ryser).unwrap();
        let scale = factorial(7) * a.iter().fold(0.0f64, |m, z| m.max(z.norm())).powi(7);
        assert!((x - y).norm() <= 1e-9 * scale);
    }

    #[test]
    fn row_multilinearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(5, &mut rng);
        let mut b = a.clone();
        let s = c(0.3, -1.7);
        for j in 0..5 {
            b[(2, j)] *= s;
        }
        assert!((permanent(&b) - s * permanent(&a)).norm() < 1e-10 * permanent(&a).norm().max(1.0));
    }

    #[test]
    fn glynn_full_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=5 {
            let a = random_matrix(n, &mut rng);
            let mut sum = C64::default();
            for mask in 0..(1usize << (n - 1)) {
                let mut x = vec![1.0; n];
                for (i, xi) in x.iter_mut().enumerate().skip(1) {
                    if mask >> (i - 1) & 1 == 1 {
                        *xi = -1.0;
                    }
                }
                sum += glynn_term(&a, &x);
            }
            let mean = sum / (1usize << (n - 1)) as f64;
            assert!((mean - permanent(&a)).norm() < 1e-10 * permanent(&a).norm().max(1.0));
        }
    }

    #[test]
    fn estimator_basic() {
        let id = ComplexMatrix::identity(2, 2);
        let e = permanent_estimate(&id, 100_000, 1, 0.05).unwrap();
        assert!((e.value - c(1.0, 0.0)).norm() < 0.05);
        let z = DMatrix::zeros(3, 3);
        for seed in 0..5 {
            assert_eq!(permanent_estimate(&z, 100, seed, 0.05).unwrap().value, C64::default());
        }
    }

    #[test]
    fn hafnian_basics() {
        let a = c(0.3, 2.0);
        let m = DMatrix::from_row_slice(2, 2, &[C64::default(), a, a, C64::default()]);
        assert_eq!(hafnian_exact(&m).unwrap(), a);
        assert_eq!(hafnian_exact(&DMatrix::zeros(3, 3)).unwrap(), C64::default());
        assert_eq!(hafnian_exact(&DMatrix::zeros(0, 0)).unwrap(), c(1.0, 0.0));
        let asym = DMatrix::from_row_slice(2, 2, &[C64::default(), c(1.0, 0.0), c(2.0, 0.0), C64::default()]);
        assert!(matches!(hafnian_exact(&asym), Err(CvError::NotSymmetric { .. })));
        // four-element all-ones: three perfect matchings
        let ones = DMatrix::from_element(4, 4, c(1.0, 0.0));
        assert!((hafnian_exact(&ones).unwrap() - c(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn loop_hafnian_small() {
        let d = c(0.7, 0.1);
        assert_eq!(loop_hafnian_exact(&DMatrix::from_element(1, 1, d)).unwrap(), d);
        let (a, b, cc) = (c(1.0, 1.0), c(2.0, -1.0), c(0.5, 0.0));
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, cc]);
        assert!((loop_hafnian_exact(&m).unwrap() - (a * cc + b)).norm() < 1e-14);
        assert_eq!(loop_hafnian_exact(&DMatrix::zeros(0, 0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn hafnian_of_direct_sum_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_matrix(4, &mut rng);
        let y = random_matrix(2, &mut rng);
        let (x, y) = (&x + x.transpose(), &y + y.transpose());
        let mut s = DMatrix::zeros(6, 6);
        s.view_mut((0, 0), (4, 4)).copy_from(&x);
        s.view_mut((4, 4), (2, 2)).copy_from(&y);
        let lhs = hafnian_exact(&s).unwrap();
        let rhs = hafnian_exact(&x).unwrap() * hafnian_exact(&y).unwrap();
        assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
    }

    #[test]
    fn repeat_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        let same = repeat_matrix(&a, &RepetitionSpec { row_reps: vec![1, 1], col_reps: vec![1, 1] }).unwrap();
        assert_eq!(same, a);
        let r = repeat_matrix(&a, &RepetitionSpec { row_reps: vec![2, 0], col_reps: vec![1, 1] }).unwrap();
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]));
        assert!(repeat_matrix(&a, &RepetitionSpec { row_reps: vec![1], col_reps: vec![1, 1] }).is_err());
    }

    #[test]
    fn repeat_symmetric_worked_example() {
        // m = 2, p = (2,0), q = (1,0): indices (1,1,3) in one-based numbering.
        let v = DMatrix::from_fn(4, 4, |i, j| c((10 * (i.min(j) + 1) + j.max(i) + 1) as f64, 0.0));
        let d: Vec<C64> = (0..4).map(|k| c(100.0 + k as f64, 0.0)).collect();
        let a = repeat_symmetric(&v, &d, &[2, 0], &[1, 0]).unwrap();
        let (d1, d3) = (d[0], d[2]);
        let (v11, v13) = (v[(0, 0)], v[(0, 2)]);
        let want = DMatrix::from_row_slice(3, 3, &[d1, v11, v13, v11, d1, v13, v13, v13, d3]);
        assert_eq!(a, want);
        let e = repeat_symmetric(&v, &d, &[0, 0], &[0, 0]).unwrap();
        assert_eq!(e.nrows(), 0);
        assert_eq!(loop_hafnian_exact(&e).unwrap(), c(1.0, 0.0));
        assert!(repeat_symmetric(&v, &d, &[1], &[1, 0]).is_err());
    }

    #[test]
    fn gram_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(2, &mut rng);
        let psi = FockVector::single_mode(&[u[(0, 0)], u[(1, 0)]]).unwrap();
        let phi = FockVector::single_mode(&[u[(0, 1)] * 0.6 + u[(0, 0)] * 0.8, u[(1, 1)] * 0.6 + u[(1, 0)] * 0.8]).unwrap();
        let x = psi.inner(&phi).unwrap().norm_sqr();
        for m in 2..=5 {
            let mut states = vec![phi.clone()];
            states.extend(std::iter::repeat_n(psi.clone(), m - 1));
            let b = gram_error_bound(&states).unwrap();
            let want = 1.0 / m as f64 + (m as f64 - 1.0) * x / m as f64;
            assert!((b - want).abs() < 1e-12);
        }
        let same = vec![psi.clone(); 3];
        assert!((gram_error_bound(&same).unwrap() - 1.0).abs() < 1e-12);
        let e: Vec<FockVector> = (0..3).map(|k| FockVector::basis(&[k], 2).unwrap()).collect();
        assert!((gram_error_bound(&e).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!(gram_error_bound(&[]).is_err());
    }
}

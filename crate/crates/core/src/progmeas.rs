//! Programmable measurements: generalized swap tests, Hadamard and abelian-group
//! interferometers with parity post-processing, and coherent-state variants.
//!
//! In this module interferometer matrices are indexed `[input, output]`, so the
//! transition amplitude from one photon per mode to the pattern `d` is the
//! permanent of `U` with columns repeated by `d`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CvError, Result};
use crate::matfun::{expand, permanent, select};
use crate::types::{c, ensure_unitary, occ_factorial, total, ComplexMatrix, C64};

/// Acceptance probability of the order-`m` swap test, `1/m + (m-1) x / m`.
pub fn swap_test_stats(m: usize, overlap_sq: f64) -> f64 {
    let m = m as f64;
    1.0 / m + (m - 1.0) / m * overlap_sq
}

/// Character table of an abelian group: entries are roots of unity and rows are
/// closed under entrywise products. Dividing by `sqrt(m)` gives a unitary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignMatrix {
    #[serde(with = "crate::types::matrix_serde")]
    pub entries: ComplexMatrix,
}

impl SignMatrix {
    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn unitary(&self) -> ComplexMatrix {
        self.entries.unscale((self.order() as f64).sqrt())
    }

    /// True when the entrywise product of any two rows is again a row.
    pub fn rows_closed(&self, tol: f64) -> bool {
        let m = self.order();
        (0..m).all(|a| {
            (0..m).all(|b| {
                (0..m).any(|r| (0..m).all(|j| (self.entries[(a, j)] * self.entries[(b, j)] - self.entries[(r, j)]).norm() < tol))
            })
        })
    }
}

/// Sylvester-Hadamard matrix of order `2^n` built by `H -> [[H, H], [H, -H]]`.
pub fn hadamard_walsh(n: u32) -> Result<SignMatrix> {
    if n > 12 {
        return Err(CvError::SizeLimit { what: "Hadamard order exponent", size: n as usize, limit: 12 });
    }
    let mut h = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for _ in 0..n {
        let k = h.nrows();
        let mut next = DMatrix::zeros(2 * k, 2 * k);
        next.view_mut((0, 0), (k, k)).copy_from(&h);
        next.view_mut((0, k), (k, k)).copy_from(&h);
        next.view_mut((k, 0), (k, k)).copy_from(&h);
        next.view_mut((k, k), (k, k)).copy_from(&(-&h));
        h = next;
    }
    Ok(SignMatrix { entries: h })
}

/// Character table `F_{a_1} x ... x F_{a_r}` for invariant factors with `a_i | a_{i+1}`.
pub fn group_sign_matrix(factors: &[usize]) -> Result<SignMatrix> {
    if factors.is_empty() || factors.contains(&0) {
        return Err(CvError::InvalidParameter("factors must be positive".into()));
    }
    if factors.windows(2).any(|w| w[1] % w[0] != 0) {
        return Err(CvError::InvalidParameter(format!("{factors:?} is not a divisibility chain")));
    }
    let order: usize = factors.iter().product();
    if order > 4096 {
        return Err(CvError::SizeLimit { what: "group order", size: order, limit: 4096 });
    }
    let mut acc = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for &a in factors {
        let f = DMatrix::from_fn(a, a, |j, k| C64::from_polar(1.0, 2.0 * PI * ((j * k) % a) as f64 / a as f64));
        acc = acc.kronecker(&f);
    }
    Ok(SignMatrix { entries: acc })
}

/// Unitary `F_G / sqrt(m)` of the group interferometer.
pub fn group_interferometer(factors: &[usize]) -> Result<ComplexMatrix> {
    Ok(group_sign_matrix(factors)?.unitary())
}

fn check_pattern(m: usize, d: &[usize]) -> Result<()> {
    if d.len() != m || total(d) != m {
        return Err(CvError::DimensionMismatch(format!(
            "pattern {d:?} must have {m} entries summing to {m}"
        )));
    }
    Ok(())
}

/// Output probabilities of pattern `d` for one photon per input: `Pr_i` with all
/// photons indistinguishable, `Pr_d` with the first photon distinguishable.
pub fn distinguishability_probs(u: &ComplexMatrix, d: &[usize]) -> Result<(f64, f64)> {
    ensure_unitary(u)?;
    let m = u.nrows();
    check_pattern(m, d)?;
    let rows: Vec<usize> = (0..m).collect();
    let dfact = occ_factorial(d);
    let pr_i = permanent(&select(u, &rows, &expand(d))).norm_sqr() / dfact;
    let rest: Vec<usize> = (1..m).collect();
    let mut pr_d = 0.0;
    for k in 0..m {
        if d[k] == 0 {
            continue;
        }
        let mut dk = d.to_vec();
        dk[k] -= 1;
        let sub = select(u, &rest, &expand(&dk));
        pr_d += d[k] as f64 * (u[(0, k)] * permanent(&sub)).norm_sqr();
    }
    Ok((pr_i, pr_d / dfact))
}

/// `pi(d) = sum_i prod_j s_ij^{d_j}`.
pub fn pi_value(s: &SignMatrix, d: &[usize]) -> C64 {
    let m = s.order();
    (0..m)
        .map(|i| (0..m).map(|j| s.entries[(i, j)].powu(d[j] as u32)).product::<C64>())
        .sum()
}

/// Accept (true) iff `pi(d) = m`, checked on the generating rows `2^k` only:
/// columns with odd counts are kept and every generator must see an even number of `-1`.
pub fn parity_postprocess(s: &SignMatrix, d: &[usize]) -> bool {
    let m = s.order();
    let odd: Vec<usize> = (0..m).filter(|&j| d.get(j).copied().unwrap_or(0) % 2 == 1).collect();
    let mut row = 1;
    while row < m {
        let negatives = odd.iter().filter(|&&j| s.entries[(row, j)].re < 0.0).count();
        if negatives % 2 == 1 {
            return false;
        }
        row <<= 1;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentStats {
    pub p_no_click: f64,
    pub gap_sp: f64,
    pub gap_cs: f64,
}

/// Closed-form statistics of the coherent-state comparison with `m - 1` detectors.
pub fn coherent_scheme_stats(m: usize, overlap_sq: f64) -> Result<CoherentStats> {
    if m < 2 {
        return Err(CvError::InvalidParameter("need m >= 2".into()));
    }
    if !(0.0..=1.0).contains(&overlap_sq) {
        return Err(CvError::InvalidParameter(format!("overlap {overlap_sq} outside [0,1]")));
    }
    let mf = m as f64;
    Ok(CoherentStats {
        p_no_click: overlap_sq.powf(1.0 - 1.0 / mf),
        gap_sp: 1.0 / mf,
        gap_cs: ((mf - 1.0) * (mf - 1.0).ln() - mf * mf.ln()).exp(),
    })
}

/// Merger interferometer on `m = 2^k` modes (column convention, acts on amplitude
/// vectors): two copies of the half-size merger followed by a balanced splitter
/// on modes `0` and `m/2`.
pub fn merger_unitary(m: usize) -> Result<ComplexMatrix> {
    if m == 0 || !m.is_power_of_two() {
        return Err(CvError::InvalidParameter(format!("{m} is not a power of two")));
    }
    if m == 1 {
        return Ok(ComplexMatrix::identity(1, 1));
    }
    let half = merger_unitary(m / 2)?;
    let mut block = ComplexMatrix::zeros(m, m);
    block.view_mut((0, 0), (m / 2, m / 2)).copy_from(&half);
    block.view_mut((m / 2, m / 2), (m / 2, m / 2)).copy_from(&half);
    let h = 0.5f64.sqrt();
    let mut split = ComplexMatrix::identity(m, m);
    let j = m / 2;
    split[(0, 0)] = c(h, 0.0);
    split[(0, j)] = c(h, 0.0);
    split[(j, 0)] = c(h, 0.0);
    split[(j, j)] = c(-h, 0.0);
    Ok(split * block)
}

/// Output coherent amplitudes of a passive circuit (column convention).
pub fn propagate_coherent(u: &ComplexMatrix, amplitudes: &[C64]) -> Result<Vec<C64>> {
    if u.ncols() != amplitudes.len() {
        return Err(CvError::DimensionMismatch(format!("{} amplitudes for {} modes", amplitudes.len(), u.ncols())));
    }
    let v = u * nalgebra::DVector::from_column_slice(amplitudes);
    Ok(v.iter().copied().collect())
}

/// Probability that no detector on modes `1..m` clicks for input `(alpha, beta, ..., beta)`.
pub fn coherent_no_click(u: &ComplexMatrix, alpha: C64, beta: C64) -> Result<f64> {
    let m = u.ncols();
    let mut input = vec![beta; m];
    input[0] = alpha;
    let out = propagate_coherent(u, &input)?;
    Ok((-out[1..].iter().map(|z| z.norm_sqr()).sum::<f64>()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergerImperfect {
    pub c2: f64,
    pub c4: f64,
    pub s2: f64,
    pub s4: f64,
}

/// Completeness and soundness of the two- and four-mode merger schemes with splitter
/// reflectivity `nu` and detector efficiency `eta`.
pub fn merger_imperfect(alpha: C64, beta: C64, nu: f64, eta: f64) -> Result<MergerImperfect> {
    if !(0.0..=1.0).contains(&nu) || !(0.0..=1.0).contains(&eta) {
        return Err(CvError::InvalidParameter("nu and eta must lie in [0,1]".into()));
    }
    let a2 = alpha.norm_sqr();
    let b2 = beta.norm_sqr();
    let diff = (alpha - beta).norm_sqr();
    let root = (nu * (1.0 - nu)).sqrt();
    let c2 = (-2.0 * eta * (1.0 - nu) * a2).exp();
    let c4 = (-2.0 * eta * (1.0 - nu) * (1.0 + 2.0 * nu) * a2).exp();
    let e2 = (nu - 0.5) * diff + (1.0 - nu + root) * a2 + (1.0 - nu - root) * b2;
    let w = (1.0 + 2.0 * nu) * (1.0 - nu);
    let e4 = (nu * nu - 0.25) * diff + (w + 2.0 * root) * a2 + (w - 2.0 * root) * b2;
    Ok(MergerImperfect { c2, c4, s2: 1.0 - (-eta * e2).exp(), s4: 1.0 - (-eta * e4).exp() })
}

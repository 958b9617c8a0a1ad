//! Passive linear optics in the Fock picture.
//!
//! Convention: `<s|U|t> = Per(U_{s,t}) / sqrt(s! t!)` with rows of `U` repeated by the
//! output pattern `s` and columns by the input pattern `t`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CvError, Result};
use crate::fock::enumerate_sector;
use crate::matfun::{expand, permanent, select};
use crate::special::factorial;
use crate::types::{ensure_unitary, occ_factorial, total, ComplexMatrix, OccupationTuple, C64};

pub const SAMPLER_LIMIT: usize = 100_000;
pub const LIFT_LIMIT: usize = 3000;

fn transition_amplitude(u: &ComplexMatrix, output: &[usize], input: &[usize]) -> C64 {
    let sub = select(u, &expand(output), &expand(input));
    permanent(&sub) / (occ_factorial(output) * occ_factorial(input)).sqrt()
}

/// Probability of detecting `output` when `input` enters the interferometer `u`.
pub fn bs_probability(u: &ComplexMatrix, input: &[usize], output: &[usize]) -> Result<f64> {
    ensure_unitary(u)?;
    let m = u.nrows();
    if input.len() != m || output.len() != m {
        return Err(CvError::DimensionMismatch(format!("patterns must have {m} entries")));
    }
    if total(input) != total(output) {
        return Ok(0.0);
    }
    Ok(transition_amplitude(u, output, input).norm_sqr())
}

/// Draw `count` output patterns by the chain rule over modes.
///
/// All sector probabilities are computed once; the marginal of each mode given
/// the earlier ones is a sum over completions. Each draw inverts a cumulative sum
/// with half-open intervals, so zero-probability outcomes are never returned.
pub fn bs_sample(u: &ComplexMatrix, input: &[usize], count: usize, seed: u64) -> Result<Vec<OccupationTuple>> {
    ensure_unitary(u)?;
    let m = u.nrows();
    if input.len() != m {
        return Err(CvError::DimensionMismatch(format!("input must have {m} entries")));
    }
    let n = total(input);
    let size = crate::special::binomial(m + n - 1, n);
    if size > SAMPLER_LIMIT as f64 {
        return Err(CvError::SectorTooLarge { modes: m, photons: n, size });
    }
    let sector = enumerate_sector(m, n)?;
    let mut prefix_mass: HashMap<Vec<usize>, f64> = HashMap::new();
    for s in &sector {
        let p = transition_amplitude(u, s, input).norm_sqr();
        for len in 0..=m {
            *prefix_mass.entry(s[..len].to_vec()).or_default() += p;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut prefix: Vec<usize> = Vec::with_capacity(m);
        let mut left = n;
        for mode in 0..m {
            if mode + 1 == m {
                prefix.push(left);
                break;
            }
            let here = prefix_mass.get(&prefix).copied().unwrap_or(0.0);
            let target = rng.random::<f64>() * here;
            let mut cum = 0.0;
            let mut chosen = None;
            let mut last_positive = 0;
            for k in 0..=left {
                prefix.push(k);
                let w = prefix_mass.get(&prefix).copied().unwrap_or(0.0);
                prefix.pop();
                if w > 0.0 {
                    last_positive = k;
                }
                cum += w;
                if target < cum {
                    chosen = Some(k);
                    break;
                }
            }
            // Rounding can leave `target` just above the final sum.
            let k = chosen.unwrap_or(last_positive);
            prefix.push(k);
            left -= k;
        }
        out.push(prefix);
    }
    Ok(out)
}

/// Matrix of the interferometer restricted to the `n`-photon sector, in the order
/// of [`enumerate_sector`].
pub fn lift_unitary(u: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    let m = crate::types::ensure_square(u)?;
    let size = crate::special::binomial(m + n - 1, n);
    if size > LIFT_LIMIT as f64 {
        return Err(CvError::SizeLimit { what: "lifted unitary", size: size as usize, limit: LIFT_LIMIT });
    }
    let basis = enumerate_sector(m, n)?;
    let d = basis.len();
    Ok(DMatrix::from_fn(d, d, |i, j| transition_amplitude(u, &basis[i], &basis[j])))
}

/// Source of adaptive stage unitaries keyed by the measured prefix `(p_1..p_j)`.
/// Stage `j` must return a unitary on the last `m - j` modes.
pub trait StageUnitaries: Send + Sync {
    fn stage(&self, prefix: &[usize]) -> Result<ComplexMatrix>;
}

impl<F> StageUnitaries for F
where
    F: Fn(&[usize]) -> ComplexMatrix + Send + Sync,
{
    fn stage(&self, prefix: &[usize]) -> Result<ComplexMatrix> {
        Ok(self(prefix))
    }
}

/// Lookup table of stage unitaries; missing prefixes map to the identity.
#[derive(Debug, Clone, Default)]
pub struct TableStages {
    pub modes: usize,
    pub table: HashMap<Vec<usize>, ComplexMatrix>,
}

impl StageUnitaries for TableStages {
    fn stage(&self, prefix: &[usize]) -> Result<ComplexMatrix> {
        let size = self.modes - prefix.len();
        Ok(self
            .table
            .get(prefix)
            .cloned()
            .unwrap_or_else(|| ComplexMatrix::identity(size, size)))
    }
}

/// Linear-optical circuit in which the first `k` modes are measured one at a time,
/// each measurement selecting the unitary applied to the remaining modes.
pub struct AdaptiveCircuit {
    pub modes: usize,
    pub photons: usize,
    pub adaptive_modes: usize,
    pub base: ComplexMatrix,
    pub stages: Box<dyn StageUnitaries>,
}

impl AdaptiveCircuit {
    pub fn new(
        modes: usize,
        photons: usize,
        adaptive_modes: usize,
        base: ComplexMatrix,
        stages: Box<dyn StageUnitaries>,
    ) -> Result<Self> {
        ensure_unitary(&base)?;
        if base.nrows() != modes || photons > modes || adaptive_modes >= modes {
            return Err(CvError::DimensionMismatch(format!(
                "m={modes}, n={photons}, k={adaptive_modes}, base {}x{}",
                base.nrows(),
                base.ncols()
            )));
        }
        Ok(Self { modes, photons, adaptive_modes, base, stages })
    }

    /// The input pattern `(1^n, 0^{m-n})`.
    pub fn input(&self) -> OccupationTuple {
        (0..self.modes).map(|i| usize::from(i < self.photons)).collect()
    }

    /// Overall unitary `[1_k + U_k(p_1..p_k)] ... [1_1 + U_1(p_1)] U_0` for the outcomes `p`.
    pub fn unitary_for(&self, p: &[usize]) -> Result<ComplexMatrix> {
        if p.len() != self.adaptive_modes {
            return Err(CvError::DimensionMismatch(format!(
                "{} adaptive outcomes for k={}",
                p.len(),
                self.adaptive_modes
            )));
        }
        let m = self.modes;
        let mut acc = self.base.clone();
        for j in 1..=self.adaptive_modes {
            let uj = self.stages.stage(&p[..j])?;
            if uj.nrows() != m - j || uj.ncols() != m - j {
                return Err(CvError::DimensionMismatch(format!(
                    "stage {j} returned {}x{}, expected {}",
                    uj.nrows(),
                    uj.ncols(),
                    m - j
                )));
            }
            ensure_unitary(&uj)?;
            let mut full = ComplexMatrix::identity(m, m);
            full.view_mut((j, j), (m - j, m - j)).copy_from(&uj);
            acc = full * acc;
        }
        Ok(acc)
    }
}

/// Probability of the final pattern `s` on the last `m - k` modes, summed over all
/// adaptive outcomes carrying the remaining `n - |s|` photons.
pub fn adaptive_final_probability(c: &AdaptiveCircuit, final_pattern: &[usize]) -> Result<f64> {
    let (m, n, k) = (c.modes, c.photons, c.adaptive_modes);
    if final_pattern.len() != m - k {
        return Err(CvError::DimensionMismatch(format!("final pattern needs {} entries", m - k)));
    }
    let rest = total(final_pattern);
    if rest > n {
        return Err(CvError::DimensionMismatch(format!("{rest} photons detected but only {n} sent")));
    }
    let t = c.input();
    let mut acc = 0.0;
    let prefixes = if k == 0 { vec![vec![]] } else { enumerate_sector(k, n - rest)? };
    for p in prefixes {
        let up = c.unitary_for(&p)?;
        let mut rows = p.clone();
        rows.extend_from_slice(final_pattern);
        let sub = select(&up, &expand(&rows), &expand(&t));
        acc += permanent(&sub).norm_sqr() / occ_factorial(&p);
    }
    Ok(acc / occ_factorial(final_pattern))
}

fn subsets_of_size(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    for mask in 0..(1usize << n) {
        if mask.count_ones() as usize == r {
            out.push((0..n).filter(|i| mask >> i & 1 == 1).collect());
        }
    }
    out
}

/// Inner product `<psi_p|phi_q>` of the unnormalized states left on the last
/// `m - k` modes after adaptive outcomes `p` (circuit `cp`) and `q` (circuit `cq`).
///
/// Evaluated as a sum over row splits of products of three permanents, which
/// avoids enumerating the output sector.
pub fn adaptive_overlap(cp: &AdaptiveCircuit, p: &[usize], cq: &AdaptiveCircuit, q: &[usize]) -> Result<C64> {
    if cp.modes != cq.modes || cp.photons != cq.photons || cp.adaptive_modes != cq.adaptive_modes {
        return Err(CvError::DimensionMismatch("circuits differ in m, n or k".into()));
    }
    let (m, n, k) = (cp.modes, cp.photons, cp.adaptive_modes);
    if p.len() != k || q.len() != k {
        return Err(CvError::DimensionMismatch(format!("outcome patterns need {k} entries")));
    }
    let r = total(p);
    if r != total(q) {
        return Ok(C64::default());
    }
    if r > n {
        return Ok(C64::default());
    }
    let up_dag = cp.unitary_for(p)?.adjoint();
    let vq = cq.unitary_for(q)?;
    let p_rows = expand(p);
    let q_rows = expand(q);
    let tail: Vec<usize> = (k..m).collect();
    let mut acc = C64::default();
    let subsets = subsets_of_size(n, r);
    for i in &subsets {
        let a = select(&up_dag, i, &p_rows);
        let per_a = permanent(&a);
        if per_a == C64::default() {
            continue;
        }
        let i_rest: Vec<usize> = (0..n).filter(|x| !i.contains(x)).collect();
        let left = select(&up_dag, &i_rest, &tail);
        for j in &subsets {
            let b = select(&vq, &q_rows, j);
            let j_rest: Vec<usize> = (0..n).filter(|x| !j.contains(x)).collect();
            let right = select(&vq, &tail, &j_rest);
            let cmat = &left * &right;
            acc += per_a * permanent(&b) * permanent(&cmat);
        }
    }
    Ok(acc / (occ_factorial(p) * occ_factorial(q)).sqrt())
}

/// Same overlap by direct summation over final patterns (reference path).
pub fn adaptive_overlap_direct(cp: &AdaptiveCircuit, p: &[usize], cq: &AdaptiveCircuit, q: &[usize]) -> Result<C64> {
    let (m, n, k) = (cp.modes, cp.photons, cp.adaptive_modes);
    let r = total(p);
    if r != total(q) {
        return Ok(C64::default());
    }
    let up = cp.unitary_for(p)?;
    let vq = cq.unitary_for(q)?;
    let t = expand(&cp.input());
    let mut acc = C64::default();
    for s in enumerate_sector(m - k, n - r)? {
        let mut rp = p.to_vec();
        rp.extend_from_slice(&s);
        let mut rq = q.to_vec();
        rq.extend_from_slice(&s);
        let a = permanent(&select(&up, &expand(&rp), &t));
        let b = permanent(&select(&vq, &expand(&rq), &t));
        acc += a.conj() * b / occ_factorial(&s);
    }
    Ok(acc / (occ_factorial(p) * occ_factorial(q)).sqrt())
}

/// Factorial helper re-exported for callers building normalizations.
pub fn pattern_factorial(occ: &[usize]) -> f64 {
    occ.iter().map(|&k| factorial(k)).product()
}

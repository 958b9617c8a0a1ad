//! Truncated Fock space: multimode pure states, ladder operators and exact
//! truncated matrices of single-mode displacement and squeezing.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CvError, Result};
use crate::special::{factorial, ln_binomial};
use crate::types::{ensure_unitary, occ_factorial, ComplexMatrix, OccupationTuple, C64};

const MAX_SECTOR: f64 = 1e7;

/// All occupation tuples of `m` modes with `n` photons.
///
/// Ordered by decreasing count in the first mode, then the second, and so on,
/// so that `(2,2)` gives `(2,0), (1,1), (0,2)`.
pub fn enumerate_sector(m: usize, n: usize) -> Result<Vec<OccupationTuple>> {
    if m == 0 {
        return Err(CvError::InvalidParameter("at least one mode is required".into()));
    }
    let size = ln_binomial(m + n - 1, n).exp();
    if size > MAX_SECTOR {
        return Err(CvError::SectorTooLarge { modes: m, photons: n, size });
    }
    let mut out = Vec::with_capacity(size.round() as usize);
    let mut cur = vec![0; m];
    fill_sector(&mut cur, 0, n, &mut out);
    Ok(out)
}

fn fill_sector(cur: &mut Vec<usize>, pos: usize, left: usize, out: &mut Vec<OccupationTuple>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        fill_sector(cur, pos + 1, left - k, out);
    }
    cur[pos] = 0;
}

/// Multimode pure state with finite support in the Fock basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FockVectorJson", into = "FockVectorJson")]
pub struct FockVector {
    modes: usize,
    cutoff: Vec<usize>,
    amplitudes: BTreeMap<OccupationTuple, C64>,
}

#[derive(Serialize, Deserialize)]
struct AmplitudeJson {
    occ: OccupationTuple,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct FockVectorJson {
    modes: usize,
    cutoff: Vec<usize>,
    amplitudes: Vec<AmplitudeJson>,
}

impl TryFrom<FockVectorJson> for FockVector {
    type Error = CvError;

    fn try_from(j: FockVectorJson) -> Result<Self> {
        let mut v = FockVector::zero(j.modes, j.cutoff)?;
        for a in j.amplitudes {
            v.add(&a.occ, C64::new(a.re, a.im))?;
        }
        Ok(v)
    }
}

impl From<FockVector> for FockVectorJson {
    fn from(v: FockVector) -> Self {
        FockVectorJson {
            modes: v.modes,
            cutoff: v.cutoff,
            amplitudes: v
                .amplitudes
                .into_iter()
                .map(|(occ, z)| AmplitudeJson { occ, re: z.re, im: z.im })
                .collect(),
        }
    }
}

impl FockVector {
    pub fn zero(modes: usize, cutoff: Vec<usize>) -> Result<Self> {
        if modes == 0 || cutoff.len() != modes {
            return Err(CvError::DimensionMismatch(format!(
                "{modes} modes but {} cutoff entries",
                cutoff.len()
            )));
        }
        Ok(Self { modes, cutoff, amplitudes: BTreeMap::new() })
    }

    /// Basis state `|occ>` with a uniform per-mode cutoff.
    pub fn basis(occ: &[usize], cutoff: usize) -> Result<Self> {
        let mut v = Self::zero(occ.len(), vec![cutoff; occ.len()])?;
        v.add(occ, C64::new(1.0, 0.0))?;
        Ok(v)
    }

    pub fn vacuum(modes: usize, cutoff: usize) -> Result<Self> {
        Self::basis(&vec![0; modes], cutoff)
    }

    /// Single-mode state with amplitudes `coeffs[n]` on `|n>`.
    pub fn single_mode(coeffs: &[C64]) -> Result<Self> {
        let cutoff = coeffs.len().saturating_sub(1);
        let mut v = Self::zero(1, vec![cutoff])?;
        for (n, &z) in coeffs.iter().enumerate() {
            if z != C64::new(0.0, 0.0) {
                v.add(&[n], z)?;
            }
        }
        Ok(v)
    }

    /// Build from `(occupation, amplitude)` pairs; the cutoff is the max count per mode.
    pub fn from_terms(modes: usize, terms: &[(OccupationTuple, C64)]) -> Result<Self> {
        let mut cutoff = vec![0; modes];
        for (occ, _) in terms {
            if occ.len() != modes {
                return Err(CvError::DimensionMismatch("occupation length".into()));
            }
            for (c, &k) in cutoff.iter_mut().zip(occ) {
                *c = (*c).max(k);
            }
        }
        let mut v = Self::zero(modes, cutoff)?;
        for (occ, z) in terms {
            v.add(occ, *z)?;
        }
        Ok(v)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> &[usize] {
        &self.cutoff
    }

    pub fn with_cutoff(mut self, cutoff: Vec<usize>) -> Result<Self> {
        if cutoff.len() != self.modes {
            return Err(CvError::DimensionMismatch("cutoff length".into()));
        }
        if self.amplitudes.keys().any(|o| o.iter().zip(&cutoff).any(|(k, c)| k > c)) {
            return Err(CvError::InvalidParameter("new cutoff would drop stored amplitudes".into()));
        }
        self.cutoff = cutoff;
        Ok(self)
    }

    pub fn amplitude(&self, occ: &[usize]) -> C64 {
        self.amplitudes.get(occ).copied().unwrap_or_default()
    }

    /// Add `z` to the amplitude of `occ`.
    pub fn add(&mut self, occ: &[usize], z: C64) -> Result<()> {
        if occ.len() != self.modes {
            return Err(CvError::DimensionMismatch(format!(
                "occupation of length {} in a {}-mode state",
                occ.len(),
                self.modes
            )));
        }
        if occ.iter().zip(&self.cutoff).any(|(k, c)| k > c) {
            return Err(CvError::InvalidParameter(format!("{occ:?} exceeds the cutoff {:?}", self.cutoff)));
        }
        *self.amplitudes.entry(occ.to_vec()).or_default() += z;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OccupationTuple, &C64)> {
        self.amplitudes.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(CvError::NotNormalized { norm_sqr: 0.0 });
        }
        let mut v = self.clone();
        for z in v.amplitudes.values_mut() {
            *z /= n;
        }
        Ok(v)
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > config::tolerances().normalization {
            return Err(CvError::NotNormalized { norm_sqr: n });
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        if self.modes != other.modes {
            return Err(CvError::DimensionMismatch(format!(
                "{} vs {} modes",
                self.modes, other.modes
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .map(|(occ, a)| a.conj() * other.amplitude(occ))
            .sum())
    }

    /// Highest total photon number carried by a nonzero amplitude.
    pub fn max_photons(&self) -> usize {
        self.amplitudes
            .iter()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(o, _)| o.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// Amplitudes of a single-mode state as a dense vector of length `cutoff+1`.
    pub fn single_mode_coefficients(&self) -> Result<Vec<C64>> {
        if self.modes != 1 {
            return Err(CvError::DimensionMismatch("expected a single-mode state".into()));
        }
        let mut v = vec![C64::default(); self.cutoff[0] + 1];
        for (o, z) in &self.amplitudes {
            v[o[0]] = *z;
        }
        Ok(v)
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut v = self.clone();
        for z in v.amplitudes.values_mut() {
            *z *= s;
        }
        v
    }

    /// Drop amplitudes whose modulus is at most `eps`.
    pub fn pruned(&self, eps: f64) -> Self {
        let mut v = self.clone();
        v.amplitudes.retain(|_, z| z.norm() > eps);
        v
    }

    /// Coherent-state overlap `<beta|self>` for a multimode amplitude `beta`.
    pub fn coherent_overlap(&self, beta: &[C64]) -> Result<C64> {
        if beta.len() != self.modes {
            return Err(CvError::DimensionMismatch("coherent amplitude length".into()));
        }
        let gauss = (-0.5 * beta.iter().map(|b| b.norm_sqr()).sum::<f64>()).exp();
        let mut acc = C64::default();
        for (occ, z) in &self.amplitudes {
            let mut t = *z;
            for (k, b) in occ.iter().zip(beta) {
                t *= b.conj().powu(*k as u32) / factorial(*k).sqrt();
            }
            acc += t;
        }
        Ok(acc * gauss)
    }

    /// Husimi density `|<beta|self>|^2 / pi^m`.
    pub fn husimi(&self, beta: &[C64]) -> Result<f64> {
        Ok(self.coherent_overlap(beta)?.norm_sqr() / std::f64::consts::PI.powi(self.modes as i32))
    }
}

/// Fidelity `|<a|b>|^2` and trace distance `sqrt(1 - F)` of two pure states.
pub fn state_distance(a: &FockVector, b: &FockVector) -> Result<(f64, f64)> {
    if a.modes() != b.modes() {
        return Err(CvError::DimensionMismatch(format!("{} vs {} modes", a.modes(), b.modes())));
    }
    for v in [a, b] {
        let n = v.norm_sqr();
        if (n - 1.0).abs() > 1e-6 {
            return Err(CvError::NotNormalized { norm_sqr: n });
        }
    }
    let f = a.inner(b)?.norm_sqr().clamp(0.0, 1.0);
    Ok((f, (1.0 - f).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderKind {
    Creation,
    Annihilation,
}

/// A state together with the squared norm that fell outside the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated {
    pub state: FockVector,
    pub lost_norm_sqr: f64,
}

impl Truncated {
    pub fn truncated(&self) -> bool {
        self.lost_norm_sqr > 0.0
    }
}

/// Apply `a` or `a^dag` on one mode (result is not renormalized).
pub fn apply_ladder(state: &FockVector, mode: usize, kind: LadderKind) -> Result<Truncated> {
    if mode >= state.modes() {
        return Err(CvError::InvalidParameter(format!("mode {mode} out of range")));
    }
    let mut out = FockVector::zero(state.modes(), state.cutoff().to_vec())?;
    let mut lost = 0.0;
    for (occ, z) in state.iter() {
        let k = occ[mode];
        let mut o = occ.clone();
        match kind {
            LadderKind::Annihilation => {
                if k == 0 {
                    continue;
                }
                o[mode] = k - 1;
                out.add(&o, z * (k as f64).sqrt())?;
            }
            LadderKind::Creation => {
                let w = z * ((k + 1) as f64).sqrt();
                if k + 1 > state.cutoff()[mode] {
                    lost += w.norm_sqr();
                    continue;
                }
                o[mode] = k + 1;
                out.add(&o, w)?;
            }
        }
    }
    Ok(Truncated { state: out, lost_norm_sqr: lost })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianKind {
    Displacement,
    Squeeze,
}

/// Matrix of a single-mode operator in the Fock basis `0..=E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedOperator {
    pub dim: usize,
    #[serde(with = "crate::types::matrix_serde")]
    pub entries: ComplexMatrix,
}

/// Truncated matrix `<n|O|k>`, `0 <= n,k <= E`, of `D(param)` or `S(param)`.
///
/// Conventions: `D(a) = exp(a a^dag - a^* a)`, `S(xi) = exp((xi a^2 - xi^* a^dag^2)/2)`.
/// Entries are exact (no matrix exponential); see [`squeeze_displace_block`].
pub fn truncated_gaussian(kind: GaussianKind, param: C64, e: usize) -> TruncatedOperator {
    let zero = C64::default();
    let entries = match kind {
        GaussianKind::Displacement => squeeze_displace_block(zero, param, e + 1, e + 1),
        GaussianKind::Squeeze => squeeze_displace_block(param, zero, e + 1, e + 1),
    };
    TruncatedOperator { dim: e + 1, entries }
}

/// Amplitudes `<n|S(xi)D(alpha)|0>` for `n < len`.
///
/// With `xi = r e^{i theta}`, `t = tanh r`, `q = e^{-i theta} t`, `b = alpha / cosh r`,
/// the amplitudes are `e^c H_n / sqrt(n! cosh r)` where `H_{n+1} = b H_n - n q H_{n-1}`
/// and `c = (q^* alpha^2 - |alpha|^2)/2`. The scaled values `H_n / sqrt(n!)` are
/// propagated directly to keep magnitudes bounded.
pub fn squeezed_coherent_amplitudes(xi: C64, alpha: C64, len: usize) -> Vec<C64> {
    let r = xi.norm();
    let theta = xi.arg();
    let ch = r.cosh();
    let q = C64::from_polar(r.tanh(), -theta);
    let b = alpha / ch;
    let pref = ((q.conj() * alpha * alpha - alpha.norm_sqr()) * 0.5).exp() / ch.sqrt();
    let mut h = Vec::with_capacity(len);
    for n in 0..len {
        let next = match n {
            0 => C64::new(1.0, 0.0),
            1 => b,
            _ => {
                let k = (n - 1) as f64;
                (b * h[n - 1] - q * k.sqrt() * h[n - 2]) / (n as f64).sqrt()
            }
        };
        h.push(next);
    }
    h.into_iter().map(|x| x * pref).collect()
}

/// Exact block `<n|S(xi)D(alpha)|k>` for `n < rows`, `k < cols`.
///
/// Column 0 is the squeezed coherent state; the remaining columns follow from
/// `S D a^dag (S D)^dag = cosh r a^dag + sinh r e^{i theta} a - alpha^*`.
pub fn squeeze_displace_block(xi: C64, alpha: C64, rows: usize, cols: usize) -> ComplexMatrix {
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, cols);
    }
    let ext = rows + cols;
    let ch = xi.norm().cosh();
    let se = C64::from_polar(xi.norm().sinh(), xi.arg());
    let mut col = squeezed_coherent_amplitudes(xi, alpha, ext);
    let mut out = DMatrix::zeros(rows, cols);
    for k in 0..cols {
        for n in 0..rows {
            out[(n, k)] = col[n];
        }
        if k + 1 == cols {
            break;
        }
        let len = col.len() - 1;
        let norm = ((k + 1) as f64).sqrt();
        let next: Vec<C64> = (0..len)
            .map(|n| {
                let up = if n > 0 { col[n - 1] * (n as f64).sqrt() } else { C64::default() };
                let down = col[n + 1] * ((n + 1) as f64).sqrt();
                (up * ch + se * down - alpha.conj() * col[n]) / norm
            })
            .collect();
        col = next;
    }
    out
}

/// Apply a single-mode truncated operator to `mode`. Components whose count on
/// that mode exceeds the operator dimension are dropped and reported.
pub fn apply_single_mode(op: &ComplexMatrix, mode: usize, state: &FockVector) -> Result<Truncated> {
    if mode >= state.modes() {
        return Err(CvError::InvalidParameter(format!("mode {mode} out of range")));
    }
    let dim = op.nrows();
    if op.ncols() != dim {
        return Err(CvError::NotSquare { rows: op.nrows(), cols: op.ncols() });
    }
    let mut cutoff = state.cutoff().to_vec();
    cutoff[mode] = dim - 1;
    let mut out = FockVector::zero(state.modes(), cutoff)?;
    let mut lost = 0.0;
    for (occ, z) in state.iter() {
        let k = occ[mode];
        if k >= dim {
            lost += z.norm_sqr();
            continue;
        }
        let mut o = occ.clone();
        for n in 0..dim {
            let w = op[(n, k)];
            if w == C64::default() {
                continue;
            }
            o[mode] = n;
            out.add(&o, w * z)?;
        }
    }
    Ok(Truncated { state: out, lost_norm_sqr: lost })
}

/// Evolve a state through the interferometer `U`, using
/// `U a_j^dag U^dag = sum_k u_{kj} a_k^dag` expanded as a polynomial.
pub fn apply_interferometer_fock(u: &ComplexMatrix, state: &FockVector) -> Result<FockVector> {
    ensure_unitary(u)?;
    let m = state.modes();
    if u.nrows() != m {
        return Err(CvError::DimensionMismatch(format!("{}x{} matrix on {m} modes", u.nrows(), u.ncols())));
    }
    let reach = state.cutoff().iter().copied().max().unwrap_or(0).max(state.max_photons());
    let mut out = FockVector::zero(m, vec![reach; m])?;
    for (occ, z) in state.iter() {
        if z.norm_sqr() == 0.0 {
            continue;
        }
        let mut poly: BTreeMap<OccupationTuple, C64> = BTreeMap::new();
        poly.insert(vec![0; m], C64::new(1.0, 0.0));
        for (j, &count) in occ.iter().enumerate() {
            for _ in 0..count {
                let mut next: BTreeMap<OccupationTuple, C64> = BTreeMap::new();
                for (mono, coef) in &poly {
                    for k in 0..m {
                        let w = u[(k, j)];
                        if w == C64::default() {
                            continue;
                        }
                        let mut t = mono.clone();
                        t[k] += 1;
                        *next.entry(t).or_default() += coef * w;
                    }
                }
                poly = next;
            }
        }
        let scale = z / occ_factorial(occ).sqrt();
        for (mono, coef) in poly {
            let amp = coef * scale * occ_factorial(&mono).sqrt();
            out.add(&mono, amp)?;
        }
    }
    Ok(out)
}

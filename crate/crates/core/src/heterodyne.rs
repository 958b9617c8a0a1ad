//! Heterodyne sampling and the estimators built on it: Laguerre-based estimators of
//! operator expectations, tomography, fidelity certification, verification failure
//! bounds, Wigner point estimates and stellar-rank witnesses.
//!
//! Samples are outcomes `alpha` distributed with the Husimi density
//! `Q(alpha) = <alpha|rho|alpha> / pi`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CvError, Result};
use crate::fock::FockVector;
use crate::gaussian::{semidefinite_cholesky, GaussianState};
use crate::special::{binomial, factorial, ln_binomial_real};
use crate::types::{c, ComplexMatrix, ConfidenceValue, SampleBatch, C64};

const SAMPLE_LIMIT: usize = 50_000_000;
const MEAN_CHUNK: usize = 4096;

/// Mean of `f` over `0..n` with a fixed chunked summation tree, so the result does
/// not depend on thread scheduling.
pub fn deterministic_mean<F>(n: usize, f: F) -> C64
where
    F: Fn(usize) -> C64 + Sync,
{
    if n == 0 {
        return C64::default();
    }
    let chunks: Vec<C64> = (0..n.div_ceil(MEAN_CHUNK))
        .into_par_iter()
        .map(|b| (b * MEAN_CHUNK..((b + 1) * MEAN_CHUNK).min(n)).map(&f).sum())
        .collect();
    chunks.iter().sum::<C64>() / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HusimiSource {
    Fock(FockVector),
    Gaussian(GaussianState),
}

impl HusimiSource {
    pub fn modes(&self) -> usize {
        match self {
            Self::Fock(v) => v.modes(),
            Self::Gaussian(g) => g.modes,
        }
    }

    pub fn density(&self, point: &[C64]) -> Result<f64> {
        match self {
            Self::Fock(v) => v.husimi(point),
            Self::Gaussian(g) => crate::gaussian::husimi_gaussian(g, point),
        }
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re * s, im * s)
}

/// Envelope constant for rejection from isotropic complex Gaussians of variance
/// `photons + 1` on `modes` modes, valid for any normalized state with at most
/// `photons` photons in total.
pub fn rejection_envelope(modes: usize, photons: usize) -> f64 {
    let var = (photons + 1) as f64;
    let decay = photons as f64 / var;
    // sup_t sum_{k<=N} t^k/k! e^{-decay t}; the maximizer sits below (N+1)^2.
    let h = |t: f64| (0..=photons).map(|k| t.powi(k as i32) / factorial(k)).sum::<f64>() * (-decay * t).exp();
    let top = 4.0 * var * var + 10.0;
    let steps = 20_000;
    let sup = (0..=steps).map(|i| h(top * i as f64 / steps as f64)).fold(0.0, f64::max);
    1.01 * sup * var.powi(modes as i32)
}

struct FockSampler {
    max_power: usize,
    terms: Vec<(Vec<usize>, C64)>,
}

impl FockSampler {
    fn new(v: &FockVector) -> Self {
        let terms = v
            .iter()
            .map(|(occ, z)| (occ.clone(), z / occ.iter().map(|&k| factorial(k).sqrt()).product::<f64>()))
            .collect();
        Self { max_power: v.max_photons(), terms }
    }

    /// `|sum_n psi_n prod alpha_i^{*n_i} / sqrt(n_i!)|^2`.
    fn poly_sqr(&self, alpha: &[C64], powers: &mut [C64]) -> f64 {
        let w = self.max_power + 1;
        for (i, a) in alpha.iter().enumerate() {
            powers[i * w] = c(1.0, 0.0);
            for k in 1..w {
                powers[i * w + k] = powers[i * w + k - 1] * a.conj();
            }
        }
        self.terms
            .iter()
            .map(|(occ, z)| occ.iter().enumerate().fold(*z, |acc, (i, &k)| acc * powers[i * w + k]))
            .sum::<C64>()
            .norm_sqr()
    }
}

/// Draw `count` heterodyne outcomes of `state`.
///
/// Fock states use rejection from a Gaussian proposal of variance `N + 1` per mode,
/// `N` being the largest total photon number in the support. Gaussian states are
/// sampled exactly, their Husimi density being Gaussian with covariance `V + I/2`.
pub fn sample_husimi(state: &HusimiSource, count: usize, seed: u64) -> Result<SampleBatch> {
    if count > SAMPLE_LIMIT {
        return Err(CvError::SizeLimit { what: "sample count", size: count, limit: SAMPLE_LIMIT });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = state.modes();
    let points = match state {
        HusimiSource::Fock(v) => {
            v.ensure_normalized()?;
            let sampler = FockSampler::new(v);
            let photons = sampler.max_power;
            let var = (photons + 1) as f64;
            let envelope = rejection_envelope(modes, photons);
            if 1.0 / envelope < config::tolerances().acceptance {
                return Err(CvError::AcceptanceTooLow { rate: 1.0 / envelope });
            }
            let scale = var.powi(modes as i32) / envelope;
            let decay = 1.0 - 1.0 / var;
            let mut powers = vec![C64::default(); modes * (photons + 1)];
            let mut out = Vec::with_capacity(count * modes);
            let mut alpha = vec![C64::default(); modes];
            let mut proposals: u64 = 0;
            while out.len() < count * modes {
                proposals += 1;
                for a in alpha.iter_mut() {
                    *a = complex_normal(&mut rng, var);
                }
                let t: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
                let ratio = sampler.poly_sqr(&alpha, &mut powers) * (-decay * t).exp() * scale;
                let u: f64 = rng.random();
                if u < ratio {
                    out.extend_from_slice(&alpha);
                }
                if proposals > 1000 && proposals.is_multiple_of(100_000) {
                    let rate = out.len() as f64 / (modes as f64 * proposals as f64);
                    if rate < config::tolerances().acceptance {
                        return Err(CvError::AcceptanceTooLow { rate });
                    }
                }
            }
            out
        }
        HusimiSource::Gaussian(g) => {
            g.validate()?;
            let m = g.modes;
            // real covariance of (Re alpha, Im alpha) from the complex one of (alpha, alpha^*)
            let half = c(0.5, 0.0);
            let mut t = ComplexMatrix::zeros(2 * m, 2 * m);
            for i in 0..m {
                t[(i, i)] = half;
                t[(i, i + m)] = half;
                t[(i + m, i)] = c(0.0, -0.5);
                t[(i + m, i + m)] = c(0.0, 0.5);
            }
            let shifted = &g.covariance + ComplexMatrix::identity(2 * m, 2 * m).scale(0.5);
            let real = &t * shifted * t.adjoint();
            let real = DMatrix::from_fn(2 * m, 2 * m, |i, j| real[(i, j)].re);
            let chol = semidefinite_cholesky(&real, 1e-12).ok_or(CvError::NotSymmetric { deviation: f64::NAN })?;
            let lower = chol.transpose();
            let mut out = Vec::with_capacity(count * m);
            for _ in 0..count {
                let z = DVector::from_fn(2 * m, |_, _| StandardNormal.sample(&mut rng));
                let x = &lower * z;
                out.extend((0..m).map(|i| g.displacement[i] + c(x[i], x[i + m])));
            }
            out
        }
    };
    let mut batch = SampleBatch::new(modes, points)?;
    batch.seed = Some(seed);
    batch.source = match state {
        HusimiSource::Fock(v) => format!("fock state on {} modes, {} photons max", v.modes(), v.max_photons()),
        HusimiSource::Gaussian(g) => format!("gaussian state on {} modes", g.modes),
    };
    Ok(batch)
}

pub const LAGUERRE_LIMIT: usize = 60;

/// `L_{k,l}(z) = sum_p (-1)^p sqrt(k! l!) / (p! (k-p)! (l-p)!) z^{l-p} z^{*(k-p)}`,
/// the normalized 2-D Laguerre polynomial with `L_{1,0}(z) = z^*`.
pub fn laguerre2d(k: usize, l: usize, z: C64) -> Result<C64> {
    if k > LAGUERRE_LIMIT || l > LAGUERRE_LIMIT {
        return Err(CvError::SizeLimit { what: "Laguerre index", size: k.max(l), limit: LAGUERRE_LIMIT });
    }
    Ok(laguerre_unchecked(k, l, z))
}

fn laguerre_unchecked(k: usize, l: usize, z: C64) -> C64 {
    let root = (factorial(k) * factorial(l)).sqrt();
    (0..=k.min(l))
        .map(|p| {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let w = sign * root / (factorial(p) * factorial(k - p) * factorial(l - p));
            z.powu((l - p) as u32) * z.conj().powu((k - p) as u32) * w
        })
        .sum()
}

/// Admissible precision: `0 < eta < min(1, 2/E)`.
pub fn check_eta(eta: f64, cutoff: usize) -> Result<()> {
    let top = if cutoff <= 2 { 1.0 } else { 2.0 / cutoff as f64 };
    if !(eta > 0.0 && eta < top) {
        return Err(CvError::InvalidParameter(format!("precision {eta} outside (0, {top}) for cutoff {cutoff}")));
    }
    Ok(())
}

/// Estimator of `|k><l|`, i.e. `f_A` with `A_kl = 1` and all other entries zero.
pub fn f_element(k: usize, l: usize, eta: f64, z: C64) -> C64 {
    let r2 = z.norm_sqr();
    let pre = (1.0 - 1.0 / eta) * r2;
    let u = z / eta.sqrt();
    laguerre_unchecked(k, l, u) * (pre.exp() / eta / eta.powf((k + l) as f64 / 2.0))
}

/// `f_A(z, eta)` for the operator with matrix `a` on `|0>..|E>`.
pub fn estimator_f(a: &ComplexMatrix, eta: f64, z: C64) -> Result<C64> {
    let e = a.nrows().max(1) - 1;
    if a.ncols() != a.nrows() {
        return Err(CvError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    check_eta(eta, e)?;
    Ok(estimator_f_unchecked(a, eta, z))
}

fn estimator_f_unchecked(a: &ComplexMatrix, eta: f64, z: C64) -> C64 {
    let mut acc = C64::default();
    for k in 0..a.nrows() {
        for l in 0..a.ncols() {
            if a[(k, l)] != C64::default() {
                acc += a[(k, l)] * f_element(k, l, eta, z);
            }
        }
    }
    acc
}

/// `sum |A_kl| sqrt((k+1)(l+1))`.
pub fn k_constant(a: &ComplexMatrix) -> f64 {
    let mut s = 0.0;
    for k in 0..a.nrows() {
        for l in 0..a.ncols() {
            s += a[(k, l)].norm() * (((k + 1) * (l + 1)) as f64).sqrt();
        }
    }
    s
}

/// `sqrt(2^{|l-k|} binom(max, min))`; for `eta <= 1/2`, `|f_{|k><l|}|` never exceeds
/// `M_kl / eta^{1+(k+l)/2}`.
pub fn m_constant(k: usize, l: usize) -> f64 {
    (2f64.powi(k.abs_diff(l) as i32) * binomial(k.max(l), k.min(l))).sqrt()
}

/// Tomography constant `[(k+1)(l+1)]^{1+(k+l)/2} 2^{|l-k|} binom(max, min)`.
pub fn c_constant(k: usize, l: usize) -> f64 {
    (((k + 1) * (l + 1)) as f64).powf(1.0 + (k + l) as f64 / 2.0) * m_constant(k, l).powi(2)
}

pub fn projector(psi: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(psi.len(), psi.len(), |k, l| psi[k] * psi[l].conj())
}

/// Certification constant of a target state for `m` copies and precision `epsilon`.
pub fn c_psi(psi: &[C64], epsilon: f64, copies: usize) -> f64 {
    let e = psi.len().saturating_sub(1);
    let kp = k_constant(&projector(psi));
    let ratio = epsilon / copies as f64;
    let mut s = 0.0;
    for k in 0..=e {
        for l in 0..=e {
            let h = (k + l) as f64 / 2.0;
            s += psi[k].norm() * psi[l].norm() * ratio.powf(e as f64 - h) * kp.powf(1.0 + h) * m_constant(k, l);
        }
    }
    s
}

/// Closed-form expectation of `f_{|l><k|}(., eta)` under the Husimi density of `rho`.
pub fn expected_estimator(rho: &ComplexMatrix, k: usize, l: usize, eta: f64) -> C64 {
    let e = rho.nrows();
    let mut s = if k < e && l < e { rho[(k, l)] } else { C64::default() };
    for m in k + 1..e {
        // n - l = m - k
        let n = m + l - k;
        if n <= l || n >= e {
            continue;
        }
        s += rho[(m, n)] * eta.powf((m + n - k - l) as f64 / 2.0) * (binomial(m, k) * binomial(n, l)).sqrt();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tomography {
    /// `entries[k][l]` estimates `rho_kl`.
    pub entries: Vec<Vec<ConfidenceValue<C64>>>,
    /// Union failure probability of all entries holding their bound simultaneously.
    pub failure_probability: f64,
}

impl Tomography {
    pub fn matrix(&self) -> ComplexMatrix {
        let d = self.entries.len();
        ComplexMatrix::from_fn(d, d, |k, l| self.entries[k][l].value)
    }
}

/// Density-matrix estimate on `|0>..|E>` from single-mode heterodyne samples.
pub fn tomo_estimate(samples: &SampleBatch, cutoff: usize, epsilon: f64, epsilon_prime: f64) -> Result<Tomography> {
    if samples.modes != 1 || samples.is_empty() {
        return Err(CvError::InvalidParameter("tomography needs a nonempty single-mode batch".into()));
    }
    if !(epsilon > 0.0 && epsilon_prime > 0.0) {
        return Err(CvError::InvalidParameter("epsilon and epsilon' must be positive".into()));
    }
    let n = samples.len();
    let mut failure = 0.0;
    let blank = ConfidenceValue { value: C64::default(), bound: 0.0, failure_probability: 0.0 };
    let mut entries = vec![vec![blank; cutoff + 1]; cutoff + 1];
    for k in 0..=cutoff {
        for l in k..=cutoff {
            let eta = epsilon / (((k + 1) * (l + 1)) as f64).sqrt();
            let value = deterministic_mean(n, |i| f_element(l, k, eta, samples.points[i]));
            let p = 4.0
                * (-(n as f64) * epsilon.powi((2 + k + l) as i32) * epsilon_prime.powi(2) / (4.0 * c_constant(k, l)))
                    .exp();
            failure += p;
            let cv = ConfidenceValue { value, bound: epsilon + epsilon_prime, failure_probability: p };
            entries[k][l] = cv;
            entries[l][k] = ConfidenceValue { value: value.conj(), ..cv };
            if k == l {
                entries[k][k].value = c(value.re, 0.0);
            }
        }
    }
    Ok(Tomography { entries, failure_probability: failure.min(1.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub fidelity: ConfidenceValue,
    /// The raw estimate fell outside `[0, 1]` and was clamped.
    pub clamped: bool,
    /// Number of samples with `|alpha|^2 > E`.
    pub support_score: usize,
    pub support_threshold: usize,
    pub p_support: f64,
    pub p_hoeffding: f64,
}

/// Support-estimation failure bound `(s+1)^{3/2}/n exp((s+1)^2/(n+1))`.
pub fn p_support_iid(s: usize, n: usize) -> f64 {
    let s1 = (s + 1) as f64;
    s1.powf(1.5) / n as f64 * (s1 * s1 / (n as f64 + 1.0)).exp()
}

/// Fidelity of `copies` copies of the sampled state with the target `psi` (Fock
/// coefficients on `|0>..|E>`).
pub fn certify_fidelity(
    samples: &SampleBatch,
    psi: &[C64],
    copies: usize,
    support_threshold: usize,
    epsilon: f64,
    epsilon_prime: f64,
) -> Result<Certification> {
    if samples.modes != 1 || samples.is_empty() {
        return Err(CvError::InvalidParameter("certification needs a nonempty single-mode batch".into()));
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > config::tolerances().normalization {
        return Err(CvError::NotNormalized { norm_sqr: norm });
    }
    if copies == 0 || !(epsilon > 0.0 && epsilon_prime > 0.0) {
        return Err(CvError::InvalidParameter("need copies >= 1 and positive epsilons".into()));
    }
    let e = psi.len() - 1;
    let n = samples.len();
    let proj = projector(psi);
    let kp = k_constant(&proj);
    let eta = epsilon / (copies as f64 * kp);
    let mean = deterministic_mean(n, |i| estimator_f_unchecked(&proj, eta, samples.points[i])).re;
    let raw = mean.powi(copies as i32);
    let value = raw.clamp(0.0, 1.0);
    let support_score = samples.points.iter().filter(|a| a.norm_sqr() > e as f64).count();
    let cp = c_psi(psi, epsilon, copies);
    let m = copies as f64;
    let p_hoeffding = 2.0
        * (-(n as f64) * epsilon.powi((2 + 2 * e) as i32) * epsilon_prime.powi(2)
            / (2.0 * m.powi((4 + 2 * e) as i32) * cp * cp))
            .exp();
    let p_support = p_support_iid(support_threshold, n);
    Ok(Certification {
        fidelity: ConfidenceValue { value, bound: epsilon + epsilon_prime, failure_probability: (p_support + p_hoeffding).min(1.0) },
        clamped: value != raw,
        support_score,
        support_threshold: e,
        p_support,
        p_hoeffding,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationBudget {
    pub n: u64,
    pub k: u64,
    pub q: u64,
    pub s: u64,
    pub m: u64,
    pub cutoff: u32,
    pub epsilon: f64,
    pub epsilon_prime: f64,
}

impl VerificationBudget {
    /// `n = k = m^{19+8E}`, `q = m^{10+4E}`, `s = 1`, `epsilon = epsilon' = 1/m`.
    pub fn scaling_family(m: u64, cutoff: u32) -> Self {
        let mf = m as f64;
        let n = mf.powi(19 + 8 * cutoff as i32);
        let q = mf.powi(10 + 4 * cutoff as i32);
        Self {
            n: n as u64,
            k: n as u64,
            q: q as u64,
            s: 1,
            m,
            cutoff,
            epsilon: 1.0 / mf,
            epsilon_prime: 1.0 / mf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n <= 8 * self.q || self.q < self.m || self.s > self.k || self.m == 0 {
            return Err(CvError::InvalidParameter("need n > 8q, q >= m >= 1 and s <= k".into()));
        }
        if self.n < 4 * self.q + self.m + 1 {
            return Err(CvError::InvalidParameter("need n > 4q + m".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon_prime > 0.0) {
            return Err(CvError::InvalidParameter("epsilon and epsilon' must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationBounds {
    pub p_support: f64,
    pub p_definetti: f64,
    pub p_choice: f64,
    pub p_hoeffding: f64,
    pub total_failure: f64,
    /// `epsilon + epsilon' + P_deFinetti`.
    pub slack: f64,
}

/// Failure probabilities of the non-i.i.d. verification protocol, evaluated in log space.
pub fn verification_bounds(b: &VerificationBudget, c_psi: f64) -> Result<VerificationBounds> {
    b.validate()?;
    if !(c_psi > 0.0) {
        return Err(CvError::InvalidParameter("C_psi must be positive".into()));
    }
    let (n, k, q, s, m, e) = (b.n as f64, b.k as f64, b.q as f64, b.s as f64, b.m as f64, b.cutoff as f64);
    let p_support = (8f64.ln() + 1.5 * k.ln() - k / 9.0 * (q / n - 2.0 * s / k).powi(2)).exp();
    let p_definetti = ((e + 1.0).powi(2) / 2.0 * q.ln() - 2.0 * q * (q + 1.0) / n).exp();
    let p_choice = m * (4.0 * q + m - 1.0) / (n - 4.0 * q);
    let gap = b.epsilon.powf(1.0 + e) * b.epsilon_prime / c_psi - 8.0 * q * m.powf(2.0 + e) / (n - 4.0 * q - m);
    let log_h = 2f64.ln() + ln_binomial_real(n - 4.0 * q, 4.0 * q)
        - (n - 8.0 * q) / (2.0 * m.powf(4.0 + 2.0 * e)) * gap * gap;
    let p_hoeffding = log_h.exp();
    Ok(VerificationBounds {
        p_support,
        p_definetti,
        p_choice,
        p_hoeffding,
        total_failure: p_support + p_definetti + p_choice + p_hoeffding,
        slack: b.epsilon + b.epsilon_prime + p_definetti,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerEstimate {
    pub wigner: ConfidenceValue,
    /// The estimate lies below `-bound`.
    pub negativity_witnessed: bool,
}

/// Wigner function at `alpha` in the convention `W_vac(0) = 2/pi`, estimated as the
/// displaced parity truncated to `|0>..|E>`.
///
/// The bound adds the truncation bias `eta K` (exact for states supported on
/// `|0>..|E>`) to a Hoeffding deviation holding except with probability `delta`.
pub fn wigner_point(samples: &SampleBatch, alpha: C64, eta: f64, cutoff: usize, delta: f64) -> Result<WignerEstimate> {
    if samples.modes != 1 || samples.is_empty() {
        return Err(CvError::InvalidParameter("Wigner estimate needs a nonempty single-mode batch".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CvError::InvalidParameter("delta must lie in (0, 1)".into()));
    }
    check_eta(eta, cutoff)?;
    let parity = ComplexMatrix::from_fn(cutoff + 1, cutoff + 1, |k, l| {
        if k == l {
            c(if k % 2 == 0 { 2.0 / PI } else { -2.0 / PI }, 0.0)
        } else {
            C64::default()
        }
    });
    let n = samples.len();
    let value = deterministic_mean(n, |i| estimator_f_unchecked(&parity, eta, samples.points[i] - alpha)).re;
    let range: f64 = (0..=cutoff).map(|k| 2.0 / PI * m_constant(k, k) / eta.powi(1 + k as i32)).sum();
    let deviation = range * (2.0 * (2.0 / delta).ln() / n as f64).sqrt();
    let bound = eta * k_constant(&parity) + deviation;
    Ok(WignerEstimate {
        wigner: ConfidenceValue { value, bound, failure_probability: delta },
        negativity_witnessed: value < -bound,
    })
}

/// Largest `k` such that the certified fidelity exceeds `1 - R_k^2`, given the
/// robustness profile `profile[k-1] = R_k`; zero when no level is certified.
pub fn rank_witness(fidelity: &ConfidenceValue, profile: &[f64]) -> Result<usize> {
    if profile.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        return Err(CvError::InvalidParameter("robustness profile must be nonincreasing".into()));
    }
    let lower = fidelity.value - fidelity.bound;
    Ok(profile.iter().enumerate().filter(|(_, r)| lower > 1.0 - *r * *r).map(|(i, _)| i + 1).max().unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn fock1(coeffs: &[C64]) -> HusimiSource {
        HusimiSource::Fock(FockVector::single_mode(coeffs).unwrap())
    }

    fn density(rho: &ComplexMatrix, z: C64) -> f64 {
        // <z|rho|z>/pi
        let d = rho.nrows();
        let v = DVector::from_fn(d, |n, _| z.powu(n as u32) / factorial(n).sqrt() * (-z.norm_sqr() / 2.0).exp());
        (v.adjoint() * rho * &v)[(0, 0)].re / PI
    }

    /// Polar-grid quadrature of `Q_rho * g` over the plane.
    fn quadrature<G: Fn(C64) -> C64>(rho: &ComplexMatrix, g: G) -> C64 {
        let (nr, nt, rmax) = (3000, 48, 9.0);
        let h = rmax / nr as f64;
        let mut acc = C64::default();
        for i in 0..=nr {
            let r = i as f64 * h;
            let w = if i == 0 || i == nr { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let ring: C64 = (0..nt)
                .map(|j| {
                    let z = C64::from_polar(r, 2.0 * PI * j as f64 / nt as f64);
                    g(z) * density(rho, z)
                })
                .sum::<C64>()
                * (2.0 * PI / nt as f64);
            acc += ring * r * w;
        }
        acc * h / 3.0
    }

    fn random_rho(seed: u64, d: usize) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ComplexMatrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let r = &g * g.adjoint();
        let t = r.trace();
        r / t
    }

    #[test]
    fn laguerre_values() {
        let z = c(0.3, -1.1);
        assert_eq!(laguerre2d(0, 0, z).unwrap(), c(1.0, 0.0));
        assert!((laguerre2d(1, 0, z).unwrap() - z.conj()).norm() < 1e-15);
        assert!((laguerre2d(1, 1, z).unwrap() - (z.norm_sqr() - 1.0)).norm() < 1e-14);
        for k in 0..5 {
            for l in 0..5 {
                let a = laguerre2d(k, l, z).unwrap();
                assert!((a.conj() - laguerre2d(l, k, z).unwrap()).norm() < 1e-12);
            }
        }
        assert!(laguerre2d(61, 0, z).is_err());
    }

    #[test]
    fn vacuum_estimator_closed_form() {
        let z = c(0.4, 0.2);
        let eta = 0.3;
        let f = f_element(0, 0, eta, z);
        assert!((f - (1.0 / eta) * ((1.0 - 1.0 / eta) * z.norm_sqr()).exp()).norm() < 1e-14);
        let mut proj = ComplexMatrix::zeros(2, 2);
        proj[(1, 1)] = c(1.0, 0.0);
        assert_eq!(k_constant(&proj), 2.0);
        assert_eq!(c_constant(0, 0), 1.0);
        assert!(estimator_f(&proj, 1.2, z).is_err());
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let rho = random_rho(3, 4);
        let eta = 0.35;
        for k in 0..4 {
            for l in 0..4 {
                let q = quadrature(&rho, |z| f_element(l, k, eta, z));
                let want = expected_estimator(&rho, k, l, eta);
                assert!((q - want).norm() < 1e-6, "{k}{l}: {q} vs {want}");
            }
        }
        let mut one = ComplexMatrix::zeros(2, 2);
        one[(1, 1)] = c(1.0, 0.0);
        assert!((expected_estimator(&one, 0, 0, 0.2) - 0.2).norm() < 1e-15);
    }

    #[test]
    fn estimator_error_within_eta_k() {
        for seed in 0..20u64 {
            let e = 1 + (seed % 4) as usize;
            let rho = random_rho(100 + seed, e + 1);
            let a = random_rho(200 + seed, e + 1) * c(0.7, 0.3);
            let eta = 0.9 / e as f64;
            let eta = eta.min(0.9);
            let exact = (&a * &rho).trace();
            let mut est = C64::default();
            for k in 0..=e {
                for l in 0..=e {
                    est += a[(l, k)] * expected_estimator(&rho, k, l, eta);
                }
            }
            assert!((exact - est).norm() <= eta * k_constant(&a) + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn element_bound_holds(k in 0usize..5, l in 0usize..5, re in -6.0f64..6.0, im in -6.0f64..6.0, eta in 0.05f64..0.5) {
            let f = f_element(k, l, eta, c(re, im));
            prop_assert!(f.norm() <= m_constant(k, l) / eta.powf(1.0 + (k + l) as f64 / 2.0) * (1.0 + 1e-12));
        }

        #[test]
        fn hermitian_estimator_is_real(re in -4.0f64..4.0, im in -4.0f64..4.0, seed in 0u64..50) {
            let a = random_rho(seed, 4);
            let f = estimator_f(&a, 0.4, c(re, im)).unwrap();
            prop_assert!(f.im.abs() < 1e-12 * f.norm().max(1.0));
        }
    }

    #[test]
    fn sampler_moments() {
        let vac = sample_husimi(&fock1(&[c(1.0, 0.0)]), 100_000, 1).unwrap();
        let m2 = vac.points.iter().map(|z| z.norm_sqr()).sum::<f64>() / vac.len() as f64;
        assert!((m2 - 1.0).abs() < 0.02);
        let a0 = c(0.7, -0.4);
        let coh = sample_husimi(&HusimiSource::Gaussian(GaussianState::coherent(&[a0])), 100_000, 2).unwrap();
        let mean = coh.points.iter().sum::<C64>() / coh.len() as f64;
        assert!((mean - a0).norm() < 0.02);
        let again = sample_husimi(&fock1(&[c(1.0, 0.0)]), 100, 1).unwrap();
        assert_eq!(&again.points[..], &vac.points[..100]);
    }

    #[test]
    fn single_photon_histogram() {
        // |alpha|^2 of Q_1 is Gamma(2, 1); compare binned counts.
        let s = sample_husimi(&fock1(&[C64::default(), c(1.0, 0.0)]), 50_000, 3).unwrap();
        let edges = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, f64::INFINITY];
        let cdf = |t: f64| if t.is_infinite() { 1.0 } else { 1.0 - (1.0 + t) * (-t).exp() };
        let n = s.len() as f64;
        let mut chi2 = 0.0;
        for w in edges.windows(2) {
            let obs = s.points.iter().filter(|z| z.norm_sqr() >= w[0] && z.norm_sqr() < w[1]).count() as f64;
            let exp = n * (cdf(w[1]) - cdf(w[0]));
            chi2 += (obs - exp).powi(2) / exp;
        }
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let p = 1.0 - ChiSquared::new(6.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2}");
    }

    #[test]
    fn gaussian_sampler_covariance() {
        let sq = crate::gaussian::evolve_covariance(
            &GaussianState::vacuum(1),
            &crate::gaussian::GaussianElement::Squeeze(vec![c(0.5, 0.0)]),
        )
        .unwrap();
        let s = sample_husimi(&HusimiSource::Gaussian(sq.clone()), 100_000, 5).unwrap();
        let n = s.len() as f64;
        let e_aa: C64 = s.points.iter().map(|z| z * z).sum::<C64>() / n;
        let e_n: f64 = s.points.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        // E[alpha^2] = V_{01}, E|alpha|^2 = V_{00} + 1/2
        assert!((e_aa - sq.covariance[(0, 1)]).norm() < 0.03, "{e_aa} {}", sq.covariance[(0, 1)]);
        assert!((e_n - sq.covariance[(0, 0)].re - 0.5).abs() < 0.03);
    }

    #[test]
    fn envelope_too_large_is_rejected() {
        let v = FockVector::basis(&[4, 4, 4, 4, 4, 4], 4).unwrap();
        assert!(matches!(sample_husimi(&HusimiSource::Fock(v), 10, 0), Err(CvError::AcceptanceTooLow { .. })));
    }

    #[test]
    fn tomography_of_vacuum_and_fock() {
        let s = sample_husimi(&fock1(&[c(1.0, 0.0)]), 100_000, 7).unwrap();
        let t = tomo_estimate(&s, 1, 0.05, 0.05).unwrap();
        assert!((t.entries[0][0].value - 1.0).norm() <= 0.1);
        let m = t.matrix();
        assert!((&m - m.adjoint()).camax() == 0.0);
        let s1 = sample_husimi(&fock1(&[C64::default(), c(1.0, 0.0)]), 100_000, 8).unwrap();
        let t1 = tomo_estimate(&s1, 1, 0.1, 0.1).unwrap();
        assert!(t1.entries[0][1].value.norm() < 0.2);
    }

    #[test]
    fn certification_supports() {
        assert!((p_support_iid(10, 10_000) - 3.69e-3).abs() < 1e-5);
        let one = [C64::default(), c(1.0, 0.0)];
        let s = sample_husimi(&fock1(&one), 100_000, 9).unwrap();
        let good = certify_fidelity(&s, &one, 1, 10, 0.1, 0.1).unwrap();
        assert!(good.fidelity.value >= 1.0 - 0.2);
        let vac = sample_husimi(&fock1(&[c(1.0, 0.0)]), 100_000, 10).unwrap();
        let bad = certify_fidelity(&vac, &one, 1, 10, 0.1, 0.1).unwrap();
        assert!(bad.fidelity.value <= 0.2);
    }

    #[test]
    fn verification_bound_formulas() {
        let b = VerificationBudget { n: 1_000_000, k: 1000, q: 10_000, s: 10, m: 1, cutoff: 1, epsilon: 0.1, epsilon_prime: 0.1 };
        let v = verification_bounds(&b, 2.0).unwrap();
        assert!((v.p_choice - 40_000.0 / (1_000_000.0 - 40_000.0)).abs() < 1e-15);
        let k = 1000f64;
        let want = 8.0 * k.powf(1.5) * (-k / 9.0 * (0.01 - 0.02f64).powi(2)).exp();
        assert!((v.p_support - want).abs() < 1e-9 * want);
        assert!((v.slack - 0.2 - v.p_definetti).abs() < 1e-15);
        let bad = VerificationBudget { q: 200_000, ..b };
        assert!(verification_bounds(&bad, 2.0).is_err());
    }

    #[test]
    fn wigner_signs() {
        let vac = sample_husimi(&fock1(&[c(1.0, 0.0)]), 200_000, 11).unwrap();
        let w = wigner_point(&vac, C64::default(), 0.1, 1, 0.05).unwrap();
        assert!((w.wigner.value - 2.0 / PI).abs() < w.wigner.bound);
        let one = sample_husimi(&fock1(&[C64::default(), c(1.0, 0.0)]), 1_000_000, 12).unwrap();
        let w1 = wigner_point(&one, C64::default(), 0.1, 1, 0.05).unwrap();
        assert!((w1.wigner.value + 2.0 / PI).abs() < w1.wigner.bound);
        assert!(w1.negativity_witnessed, "{w1:?}");
    }

    #[test]
    fn rank_witness_levels() {
        let r1 = (1.0 - 3.0 * 3f64.sqrt() / (4.0 * 1f64.exp())).sqrt();
        let f = |v| ConfidenceValue { value: v, bound: 0.0, failure_probability: 0.0 };
        assert_eq!(rank_witness(&f(1.0), &[r1, 0.0]).unwrap(), 1);
        assert_eq!(rank_witness(&f(0.6), &[r1]).unwrap(), 1);
        assert_eq!(rank_witness(&f(0.4), &[r1]).unwrap(), 0);
        assert!(rank_witness(&f(0.4), &[0.1, 0.2]).is_err());
    }

    #[test]
    fn deterministic_mean_ignores_scheduling() {
        let xs: Vec<C64> = (0..10_000).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let a = deterministic_mean(xs.len(), |i| xs[i]);
        let b = deterministic_mean(xs.len(), |i| xs[i]);
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_family_at_small_m() {
        // With unit constants only the choice term is already small and shrinking at
        // m = 2..4; the other terms need much larger m.
        let mut last = f64::INFINITY;
        for m in 2..=4u64 {
            let b = VerificationBudget::scaling_family(m, 0);
            let v = verification_bounds(&b, c_psi(&[c(1.0, 0.0)], b.epsilon, m as usize)).unwrap();
            assert!(v.p_choice < last && v.p_choice < 0.02);
            assert!(v.p_support > 1.0);
            last = v.p_choice;
        }
    }
}

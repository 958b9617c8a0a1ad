//! Stellar functions `F(z) = sum_n psi_n z^n / sqrt(n!)`, zero counting by the
//! argument principle, core extraction and stellar robustness.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CvError, Result};
use crate::fock::{squeeze_displace_block, squeezed_coherent_amplitudes};
use crate::optimize::nelder_mead;
use crate::special::{factorial, halton};
use crate::types::{c, C64};

pub const DEFAULT_GKP_TRUNCATION: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum StellarSpec {
    /// Finite Fock expansion.
    Core { coefficients: Vec<C64> },
    /// `S(xi) D(alpha) |0>`.
    Gaussian { xi: C64, alpha: C64 },
    /// `(|alpha> + sign |-alpha>) / N`; `even = true` for the plus sign.
    Cat { alpha: C64, even: bool },
    /// Unnormalized square-lattice GKP sum truncated at `|s|, |t| <= truncation`.
    Gkp { truncation: usize },
    /// Product of a Gaussian stellar function and a polynomial given by Fock coefficients.
    GaussianTimesCore { xi: C64, alpha: C64, coefficients: Vec<C64> },
}

impl StellarSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Core { coefficients } => {
                let n: f64 = coefficients.iter().map(|z| z.norm_sqr()).sum();
                if (n - 1.0).abs() > config::tolerances().normalization {
                    return Err(CvError::NotNormalized { norm_sqr: n });
                }
            }
            Self::Gkp { truncation } if *truncation < 3 => {
                return Err(CvError::InvalidParameter("GKP truncation must be at least 3".into()));
            }
            Self::Cat { alpha, .. } if alpha.norm() == 0.0 => {
                return Err(CvError::InvalidParameter("cat amplitude must be nonzero".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// `(F(z), F'(z))`.
    pub fn eval_with_derivative(&self, z: C64) -> (C64, C64) {
        match self {
            Self::Core { coefficients } => poly_eval(coefficients, z),
            Self::Gaussian { xi, alpha } => gaussian_eval(*xi, *alpha, z),
            Self::Cat { alpha, even } => {
                let a = *alpha;
                let n2 = a.norm_sqr();
                if *even {
                    let k = 1.0 / n2.cosh().sqrt();
                    ((a * z).cosh() * k, a * (a * z).sinh() * k)
                } else {
                    let k = 1.0 / n2.sinh().sqrt();
                    ((a * z).sinh() * k, a * (a * z).cosh() * k)
                }
            }
            Self::Gkp { truncation } => gkp_eval(*truncation as i64, z),
            Self::GaussianTimesCore { xi, alpha, coefficients } => {
                let (g, dg) = gaussian_eval(*xi, *alpha, z);
                let (p, dp) = poly_eval(coefficients, z);
                (g * p, dg * p + g * dp)
            }
        }
    }
}

fn poly_eval(coeffs: &[C64], z: C64) -> (C64, C64) {
    let (mut f, mut df) = (C64::default(), C64::default());
    for n in (0..coeffs.len()).rev() {
        let a = coeffs[n] / factorial(n).sqrt();
        df = df * z + f;
        f = f * z + a;
    }
    (f, df)
}

fn gaussian_eval(xi: C64, alpha: C64, z: C64) -> (C64, C64) {
    let r = xi.norm();
    let ch = r.cosh();
    let q = C64::from_polar(r.tanh(), -xi.arg());
    let b = alpha / ch;
    let cst = 0.5 * q.conj() * alpha * alpha - 0.5 * alpha.norm_sqr();
    let g = (-0.5 * q * z * z + b * z + cst).exp() / ch.sqrt();
    (g, g * (-q * z + b))
}

fn gkp_eval(l: i64, z: C64) -> (C64, C64) {
    let (mut f, mut df) = (C64::default(), C64::default());
    let k = 2.0 * PI.sqrt();
    for s in -l..=l {
        for t in -l..=l {
            let w = c(s as f64, t as f64) * k;
            let sign = if (s * t).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let term = (w * z - 2.0 * PI * (s * s + t * t) as f64).exp() * sign;
            f += term;
            df += term * w;
        }
    }
    (f, df)
}

pub fn stellar_eval(spec: &StellarSpec, z: C64) -> Result<C64> {
    spec.validate()?;
    Ok(spec.eval_with_derivative(z).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Contour {
    Rectangle { center: C64, width: f64, height: f64 },
    Circle { center: C64, radius: f64 },
}

impl Contour {
    fn scaled(&self, f: f64) -> Self {
        match *self {
            Self::Rectangle { center, width, height } => Self::Rectangle { center, width: width * f, height: height * f },
            Self::Circle { center, radius } => Self::Circle { center, radius: radius * f },
        }
    }

    /// Quadrature nodes and weights `(z_j, dz_j)` with `n` nodes per side (rectangles)
    /// or `4n` nodes in total (circles).
    fn nodes(&self, n: usize) -> Vec<(C64, C64)> {
        match *self {
            Self::Circle { center, radius } => {
                let total = 4 * n;
                (0..total)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / total as f64;
                        let e = C64::from_polar(1.0, t);
                        (center + e * radius, e * c(0.0, radius) * (2.0 * PI / total as f64))
                    })
                    .collect()
            }
            Self::Rectangle { center, width, height } => {
                let (hw, hh) = (width / 2.0, height / 2.0);
                let corners = [c(-hw, -hh), c(hw, -hh), c(hw, hh), c(-hw, hh)];
                let mut out = Vec::with_capacity(4 * (n + 1));
                for side in 0..4 {
                    let (a, b) = (corners[side] + center, corners[(side + 1) % 4] + center);
                    let h = (b - a) / n as f64;
                    for j in 0..=n {
                        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                        out.push((a + h * j as f64, h * w));
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub count: i64,
    /// Unrounded value of the contour integral divided by `2 pi i`.
    pub raw: f64,
    pub nodes_per_side: usize,
    /// Scale factor finally applied to the contour (1 unless a zero sat too close).
    pub contour_scale: f64,
}

fn contour_integral(spec: &StellarSpec, contour: &Contour, n: usize) -> Option<C64> {
    let mut acc = C64::default();
    for (z, dz) in contour.nodes(n) {
        let (f, df) = spec.eval_with_derivative(z);
        let ratio = df / f;
        // |F/F'| estimates the distance to the nearest zero.
        if !ratio.is_finite() || 1.0 / ratio.norm() < config::tolerances().contour_floor.max(1e-6) {
            return None;
        }
        acc += ratio * dz;
    }
    Some(acc / c(0.0, 2.0 * PI))
}

/// Number of zeros of the stellar function inside `contour`, counted with multiplicity.
///
/// Trapezoid rule with doubling until two successive estimates agree; a zero
/// lying on the contour triggers up to three rescaled retries.
pub fn count_zeros(spec: &StellarSpec, contour: &Contour, quadrature_points: usize) -> Result<ZeroCount> {
    spec.validate()?;
    let scales = [1.0, 0.99, 1.01, 0.98];
    'retry: for &s in &scales {
        let cont = contour.scaled(s);
        let mut n = quadrature_points.max(16);
        let Some(mut prev) = contour_integral(spec, &cont, n) else { continue };
        for _ in 0..10 {
            n *= 2;
            let Some(cur) = contour_integral(spec, &cont, n) else { continue 'retry };
            if (cur - prev).norm() < 1e-3 {
                let raw = cur.re;
                let count = raw.round();
                if (raw - count).abs() > config::tolerances().residue {
                    return Err(CvError::NonIntegerResidue { value: raw });
                }
                return Ok(ZeroCount { count: count as i64, raw, nodes_per_side: n, contour_scale: s });
            }
            prev = cur;
        }
        let raw = prev.re;
        if (raw - raw.round()).abs() > config::tolerances().residue {
            return Err(CvError::NonIntegerResidue { value: raw });
        }
        return Ok(ZeroCount { count: raw.round() as i64, raw, nodes_per_side: n, contour_scale: s });
    }
    Err(CvError::ContourHitsZero { retries: scales.len() - 1 })
}

/// Cauchy bound on the moduli of the roots of a polynomial given by Fock coefficients.
pub fn root_bound(coefficients: &[C64]) -> f64 {
    let mono: Vec<C64> = coefficients.iter().enumerate().map(|(n, z)| z / factorial(n).sqrt()).collect();
    let Some(deg) = mono.iter().rposition(|z| z.norm() > 0.0) else { return 0.0 };
    let lead = mono[deg].norm();
    1.0 + mono[..deg].iter().map(|z| z.norm() / lead).fold(0.0, f64::max)
}

/// Probabilists' Hermite polynomial `He_n(z)`.
pub fn hermite(n: usize, z: C64) -> Result<C64> {
    if n > 200 {
        return Err(CvError::SizeLimit { what: "Hermite degree", size: n, limit: 200 });
    }
    let (mut prev, mut cur) = (c(1.0, 0.0), z);
    if n == 0 {
        return Ok(prev);
    }
    for k in 1..n {
        let next = z * cur - prev * k as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Fock coefficients of the core state whose Gaussian conversion by `S(xi) D(alpha)`
/// has stellar function `P(z) G_{xi,alpha}(z)`, where `P` has Fock coefficients `poly`.
///
/// Evaluates `P(cosh r z - sinh r e^{i theta} d/dz + cosh r alpha^* - sinh r e^{i theta} alpha) 1`
/// on monomial coefficients, then renormalizes.
pub fn extract_core(poly: &[C64], xi: C64, alpha: C64) -> Result<Vec<C64>> {
    let deg = poly.iter().rposition(|z| z.norm() > 0.0).ok_or_else(|| CvError::InvalidParameter("zero polynomial".into()))?;
    let (ch, se) = (xi.norm().cosh(), C64::from_polar(xi.norm().sinh(), xi.arg()));
    let shift = alpha.conj() * ch - se * alpha;
    let mut power = vec![C64::default(); deg + 1];
    power[0] = c(1.0, 0.0);
    let mut acc = vec![C64::default(); deg + 1];
    for (n, p) in poly.iter().enumerate().take(deg + 1) {
        let w = p / factorial(n).sqrt();
        for (a, v) in acc.iter_mut().zip(&power) {
            *a += w * v;
        }
        if n == deg {
            break;
        }
        let mut next = vec![C64::default(); deg + 1];
        for k in 0..=deg {
            if power[k] == C64::default() {
                continue;
            }
            if k < deg {
                next[k + 1] += power[k] * ch;
            }
            next[k] += power[k] * shift;
            if k > 0 {
                next[k - 1] -= power[k] * se * k as f64;
            }
        }
        power = next;
    }
    let fock: Vec<C64> = acc.iter().enumerate().map(|(k, z)| z * factorial(k).sqrt()).collect();
    let norm = fock.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(CvError::NotNormalized { norm_sqr: 0.0 });
    }
    Ok(fock.into_iter().map(|z| z / norm).collect())
}

/// Fock coefficients of `P(z) G_{xi,alpha}(z)` up to `len` terms.
pub fn gaussian_times_core_coefficients(poly: &[C64], xi: C64, alpha: C64, len: usize) -> Vec<C64> {
    let g = squeezed_coherent_amplitudes(xi, alpha, len);
    let gm: Vec<C64> = g.iter().enumerate().map(|(n, z)| z / factorial(n).sqrt()).collect();
    let pm: Vec<C64> = poly.iter().enumerate().map(|(n, z)| z / factorial(n).sqrt()).collect();
    (0..len)
        .map(|n| {
            let s: C64 = (0..=n.min(pm.len().saturating_sub(1))).map(|j| pm[j] * gm[n - j]).sum();
            s * factorial(n).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub tolerance: f64,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self { restarts: 16, iterations: 4000, tolerance: config::tolerances().optimizer }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub k: usize,
    pub r_k: f64,
    pub max_fidelity: f64,
    pub xi: C64,
    pub alpha: C64,
    pub converged: bool,
}

/// Multistart simplex maximization of `objective(xi, alpha)` over `|xi| <= 2`,
/// `|alpha| <= alpha_box`, starting points from a Halton sequence.
fn maximize_gaussian<F>(objective: F, alpha_box: f64, budget: &OptimizerBudget) -> (f64, C64, C64, bool)
where
    F: Fn(C64, C64) -> f64 + Sync,
{
    let runs: Vec<(f64, Vec<f64>, bool)> = (0..budget.restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let h = |b| 2.0 * halton(i + 1, b) - 1.0;
            let start = [h(2) * 1.4, h(3) * 1.4, h(5) * alpha_box * 0.7, h(7) * alpha_box * 0.7];
            let f = |x: &[f64]| -objective(c(x[0], x[1]), c(x[2], x[3]));
            let res = nelder_mead(f, &start, 0.3, budget.tolerance, budget.iterations);
            (-res.value, res.x, res.converged)
        })
        .collect();
    // Best value; ties go to the lowest restart index.
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.0 > runs[best].0 {
            best = i;
        }
    }
    let (v, x, conv) = &runs[best];
    (*v, c(x[0], x[1]), c(x[2], x[3]), *conv)
}

/// Fidelity of `core` with its best approximation by states `S(xi) D(alpha) |phi>`
/// with `phi` supported on `|0>..|k-1>`: `sum_{m<k} |<core|S D|m>|^2`.
pub fn robustness_objective(core: &[C64], k: usize, xi: C64, alpha: C64) -> f64 {
    let block = squeeze_displace_block(xi, alpha, core.len(), k);
    (0..k)
        .map(|m| core.iter().enumerate().map(|(n, cn)| cn.conj() * block[(n, m)]).sum::<C64>().norm_sqr())
        .sum()
}

/// `k`-th stellar robustness of a core state.
pub fn robustness(core: &[C64], k: usize, budget: &OptimizerBudget) -> Result<Robustness> {
    StellarSpec::Core { coefficients: core.to_vec() }.validate()?;
    let degree = core.iter().rposition(|z| z.norm() > 0.0).unwrap_or(0);
    if degree > 8 || k > 8 || k == 0 {
        return Err(CvError::InvalidParameter(format!("need degree <= 8 and 1 <= k <= 8, got {degree}, {k}")));
    }
    if k > degree {
        return Ok(Robustness { k, r_k: 0.0, max_fidelity: 1.0, xi: C64::default(), alpha: C64::default(), converged: true });
    }
    let (v, xi, alpha, converged) = maximize_gaussian(|x, a| robustness_objective(core, k, x, a), 2.0, budget);
    let v = v.clamp(0.0, 1.0);
    Ok(Robustness { k, r_k: (1.0 - v).sqrt(), max_fidelity: v, xi, alpha, converged })
}

/// `R_1..R_kmax` of a core state.
pub fn robustness_profile(core: &[C64], kmax: usize, budget: &OptimizerBudget) -> Result<Vec<Robustness>> {
    (1..=kmax).map(|k| robustness(core, k, budget)).collect()
}

/// `<m|S(xi) D(beta)|cat>` for `m < k`.
fn cat_amplitudes(alpha: C64, even: bool, xi: C64, beta: C64, k: usize) -> Vec<C64> {
    let sign = if even { 1.0 } else { -1.0 };
    let norm = (2.0 * (1.0 + sign * (-2.0 * alpha.norm_sqr()).exp())).sqrt();
    let ph_plus = (0.5 * (alpha.conj() * beta - alpha * beta.conj())).exp();
    let ph_minus = (0.5 * (alpha * beta.conj() - alpha.conj() * beta)).exp();
    let a = squeezed_coherent_amplitudes(xi, beta + alpha, k);
    let b = squeezed_coherent_amplitudes(xi, beta - alpha, k);
    (0..k).map(|m| (ph_plus * a[m] + ph_minus * b[m] * sign) / norm).collect()
}

pub fn cat_objective(alpha: C64, even: bool, k: usize, xi: C64, beta: C64) -> f64 {
    cat_amplitudes(alpha, even, xi, beta, k).iter().map(|z| z.norm_sqr()).sum()
}

/// Same objective through probabilists' Hermite polynomials of the real amplitude
/// `|alpha|`; singular at `xi = 0` and only used as a cross-check.
pub fn cat_objective_hermite(alpha_abs: f64, even: bool, k: usize, xi: C64, beta: C64) -> Result<f64> {
    let (r, th) = (xi.norm(), xi.arg());
    let (cr, sr, tr) = (r.cosh(), r.sinh(), r.tanh());
    let a = c(alpha_abs, 0.0);
    let sign = if even { 1.0 } else { -1.0 };
    let rot = C64::from_polar(1.0, th / 2.0) / (cr * sr).sqrt();
    let e = C64::from_polar(tr, th);
    let mut total = 0.0;
    for m in 0..k {
        let u = (-a * beta.conj() + 0.5 * e * (a + beta) * (a + beta)).exp() * hermite(m, (a + beta) * rot)?
            + (a * beta.conj() + 0.5 * e * (beta - a) * (beta - a)).exp() * hermite(m, (beta - a) * rot)? * sign;
        total += tr.powi(m as i32) / factorial(m) * u.norm_sqr();
    }
    let n2 = alpha_abs * alpha_abs;
    let denom = 4.0 * cr * if even { n2.cosh() } else { n2.sinh() };
    Ok((-beta.norm_sqr()).exp() / denom * total)
}

/// `k`-th stellar robustness of a cat state.
pub fn cat_robustness(alpha: C64, even: bool, k: usize, budget: &OptimizerBudget) -> Result<Robustness> {
    if alpha.norm() > 10.0 || k > 12 || k == 0 {
        return Err(CvError::InvalidParameter(format!("need |alpha| <= 10 and 1 <= k <= 12, got {}, {k}", alpha.norm())));
    }
    if alpha.norm() == 0.0 {
        return Err(CvError::InvalidParameter("cat amplitude must be nonzero".into()));
    }
    let alpha_box = (2.0 * alpha.norm()).max(2.0);
    let (v, xi, beta, converged) = maximize_gaussian(|x, b| cat_objective(alpha, even, k, x, b), alpha_box, budget);
    let v = v.clamp(0.0, 1.0);
    Ok(Robustness { k, r_k: (1.0 - v).sqrt(), max_fidelity: v, xi, alpha: beta, converged })
}

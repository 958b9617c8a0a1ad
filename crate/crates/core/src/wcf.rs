//! Photonic weak coin flipping: honest and cheating probabilities with losses,
//! fairness and balance solving, classical-advantage scans and the strong coin
//! flip built from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CvError, Result};

/// Protocol reflectivities `x, y, z` and the efficiencies of transmission (`eta_t`),
/// the delay lines (`eta_f_*`) and the detectors (`eta_d_*`) of Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcfParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub eta_t: f64,
    pub eta_f_a: f64,
    pub eta_f_b: f64,
    pub eta_d_a: f64,
    pub eta_d_b: f64,
}

impl WcfParams {
    /// Lossless fair point: `y = 1 - 1/(2(1-x))`, `z = 2x`, for `x` in `(0, 1/2]`.
    pub fn lossless_fair(x: f64) -> Result<Self> {
        if !(x > 0.0 && x <= 0.5) {
            return Err(CvError::InvalidParameter(format!("fair family needs x in (0, 1/2], got {x}")));
        }
        Ok(Self { x, y: 1.0 - 1.0 / (2.0 * (1.0 - x)), z: 2.0 * x, ..Self::lossless(0.0, 0.0, 0.0) })
    }

    pub fn lossless(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, eta_t: 1.0, eta_f_a: 1.0, eta_f_b: 1.0, eta_d_a: 1.0, eta_d_b: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x, self.y, self.z, self.eta_t, self.eta_f_a, self.eta_f_b, self.eta_d_a, self.eta_d_b];
        if all.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CvError::InvalidParameter(format!("parameters must lie in [0,1]: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HonestProbs {
    pub p_h_a: f64,
    pub p_h_b: f64,
    pub p_abort: f64,
}

pub fn honest_probs(p: &WcfParams) -> Result<HonestProbs> {
    p.validate()?;
    let amp = (p.x * p.z * p.eta_f_a).sqrt() + ((1.0 - p.x) * p.y * (1.0 - p.z) * p.eta_f_b).sqrt();
    let p_h_a = p.eta_t * p.eta_d_b * amp * amp;
    let p_h_b = p.eta_t * p.eta_d_b * (1.0 - p.x) * (1.0 - p.y);
    Ok(HonestProbs { p_h_a, p_h_b, p_abort: 1.0 - p_h_a - p_h_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Threshold,
    NumberResolving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheatProbs {
    pub p_d_a: f64,
    pub p_d_b: f64,
    /// Photon number of dishonest Alice's best state; `None` when the supremum is
    /// only reached as the photon number grows without bound.
    pub l_star: Option<u64>,
}

/// `max_{l >= 1} r^l - s^l` and its argument, for `0 <= s <= r <= 1`.
pub fn max_power_gap(r: f64, s: f64) -> (f64, Option<u64>) {
    let gap = |l: u64| r.powi(l as i32) - s.powi(l as i32);
    if r >= 1.0 {
        return if s >= 1.0 { (0.0, Some(1)) } else { (1.0, None) };
    }
    if s <= 0.0 || r <= s || r <= 0.0 {
        return (gap(1).max(0.0), Some(1));
    }
    let lambda = ((s.ln() / r.ln()).ln() / (r / s).ln()).max(1.0);
    if lambda > 1e9 {
        return (gap(1e9 as u64), Some(1e9 as u64));
    }
    let lo = lambda.floor().max(1.0) as u64;
    let hi = lambda.ceil().max(1.0) as u64;
    if gap(lo) >= gap(hi) {
        (gap(lo), Some(lo))
    } else {
        (gap(hi), Some(hi))
    }
}

pub fn cheat_probs(p: &WcfParams, detector: Detector) -> Result<CheatProbs> {
    p.validate()?;
    let p_d_b = 1.0 - p.x * p.eta_f_a * p.eta_d_a;
    let r = 1.0 - p.eta_d_b * (1.0 - p.y * p.eta_f_b) * (1.0 - p.z);
    let s = 1.0 - p.eta_d_b;
    let (p_d_a, l_star) = match detector {
        Detector::Threshold => max_power_gap(r, s),
        // Extra photons are flagged, so only the single-photon strategy remains.
        Detector::NumberResolving => (r - s, Some(1)),
    };
    Ok(CheatProbs { p_d_a, p_d_b, l_star })
}

/// Bias of the weak coin flip: the larger cheating probability minus one half.
pub fn bias(c: &CheatProbs) -> f64 {
    c.p_d_a.max(c.p_d_b) - 0.5
}

/// `y` making the honest winning probabilities equal, from the positive root in `sqrt(y)`.
pub fn solve_fair_y(x: f64, z: f64, eta_f_a: f64, eta_f_b: f64) -> Result<f64> {
    let lim = (1.0 - x) * (1.0 + eta_f_b) / (x * eta_f_a + (1.0 - x) * eta_f_b);
    if z > lim + 1e-15 {
        return Err(CvError::Infeasible(format!("z = {z} exceeds {lim} so the fair y is not real")));
    }
    if x >= 1.0 {
        return Err(CvError::Infeasible("x = 1 leaves no honest win for Bob".into()));
    }
    let k = (1.0 - z) * eta_f_b + 1.0;
    let cross = x * z * (1.0 - z) * eta_f_a * eta_f_b;
    let disc = ((1.0 - x) * k - x * z * eta_f_a).max(0.0);
    let root = (disc.sqrt() - cross.sqrt()) / ((1.0 - x).sqrt() * k);
    if root < 0.0 {
        return Err(CvError::Infeasible(format!("no nonnegative fair y for x = {x}, z = {z}")));
    }
    Ok(root * root)
}

/// `x` equalizing the cheating probabilities of Alice and Bob.
pub fn solve_balance(y: f64, z: f64, eta_f_a: f64, eta_f_b: f64, eta_d_a: f64, eta_d_b: f64) -> Result<f64> {
    let probe = WcfParams { x: 0.0, y, z, eta_t: 1.0, eta_f_a, eta_f_b, eta_d_a, eta_d_b };
    let pda = cheat_probs(&probe, Detector::Threshold)?.p_d_a;
    let x = (1.0 - pda) / (eta_f_a * eta_d_a);
    if !x.is_finite() || x > 1.0 {
        return Err(CvError::Infeasible(format!("balance requires x = {x} > 1")));
    }
    Ok(x)
}

/// Loss model for distance scans: fiber attenuation and a fixed switch loss, in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceModel {
    pub fiber_db_per_km: f64,
    pub switch_loss_db: f64,
}

impl Default for DistanceModel {
    fn default() -> Self {
        Self { fiber_db_per_km: 0.2, switch_loss_db: 0.02 }
    }
}

impl DistanceModel {
    /// `(eta_t, eta_f)` at distance `d` km; the delay line sees the round trip.
    pub fn efficiencies(&self, d: f64) -> (f64, f64) {
        let eta_t = 10f64.powf(-self.fiber_db_per_km * d / 10.0);
        let eta_s = 10f64.powf(-self.switch_loss_db / 10.0);
        (eta_t, eta_s * eta_t * eta_t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub d: f64,
    pub x: f64,
    pub y: f64,
    pub p_h: f64,
    pub p_ab: f64,
    pub p_d_q: f64,
    pub p_d_c: f64,
    pub advantage: bool,
    /// Probability that dishonest Alice forces her own loss; always 1.
    pub p_star1: f64,
    pub converged: bool,
}

pub const DAMPING: f64 = 0.5;
pub const MAX_ALTERNATIONS: usize = 200;
pub const ALTERNATION_TOL: f64 = 1e-10;

/// Solve fairness and balance at fixed `z` by damped alternation.
/// Returns the last iterate and whether it converged.
pub fn fair_balanced_point(z: f64, eta_t: f64, eta_f: f64, eta_d: f64) -> (WcfParams, bool) {
    let mut x = 0.3;
    let mut y = 0.0;
    let mut converged = false;
    for _ in 0..MAX_ALTERNATIONS {
        let step = solve_fair_y(x, z, eta_f, eta_f).and_then(|yy| {
            y = yy;
            solve_balance(yy, z, eta_f, eta_f, eta_d, eta_d)
        });
        let Ok(target) = step else { break };
        let next = (1.0 - DAMPING) * x + DAMPING * target;
        let done = (next - x).abs() < ALTERNATION_TOL;
        x = next;
        if done {
            converged = solve_fair_y(x, z, eta_f, eta_f).map(|yy| y = yy).is_ok();
            break;
        }
    }
    (WcfParams { x, y, z, eta_t, eta_f_a: eta_f, eta_f_b: eta_f, eta_d_a: eta_d, eta_d_b: eta_d }, converged)
}

pub fn scan_row(z: f64, eta_d: f64, model: &DistanceModel, d: f64) -> ScanRow {
    let (eta_t, eta_f) = model.efficiencies(d);
    let (p, converged) = fair_balanced_point(z, eta_t, eta_f, eta_d);
    let h = honest_probs(&p);
    let ch = cheat_probs(&p, Detector::Threshold);
    match (h, ch, converged) {
        (Ok(h), Ok(ch), true) => {
            let p_ab = h.p_abort.clamp(0.0, 1.0);
            let p_d_q = ch.p_d_a.max(ch.p_d_b);
            let p_d_c = 1.0 - p_ab.sqrt();
            ScanRow {
                d,
                x: p.x,
                y: p.y,
                p_h: h.p_h_a,
                p_ab,
                p_d_q,
                p_d_c,
                advantage: p_d_q < p_d_c,
                p_star1: 1.0,
                converged: true,
            }
        }
        _ => ScanRow {
            d,
            x: p.x,
            y: p.y,
            p_h: f64::NAN,
            p_ab: f64::NAN,
            p_d_q: f64::NAN,
            p_d_c: f64::NAN,
            advantage: false,
            p_star1: 1.0,
            converged: false,
        },
    }
}

/// Per-distance fair and balanced operating points and the comparison with the
/// best classical protocol at the same abort rate.
pub fn advantage_scan(z: f64, eta_d: f64, model: &DistanceModel, distances: &[f64]) -> Result<Vec<ScanRow>> {
    if distances.iter().any(|d| !(*d >= 0.0)) {
        return Err(CvError::InvalidParameter("distances must be nonnegative".into()));
    }
    if !(0.0..=1.0).contains(&z) || !(0.0..=1.0).contains(&eta_d) {
        return Err(CvError::InvalidParameter("z and eta_d must lie in [0,1]".into()));
    }
    Ok(distances.par_iter().map(|&d| scan_row(z, eta_d, model, d)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongCf {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub bias: f64,
}

fn scf_x(y: f64) -> f64 {
    y * y / ((1.0 - y) * (1.0 - 2.0 * y))
}

fn scf_z(y: f64) -> f64 {
    y / ((1.0 - y) * (1.0 - y))
}

fn scf_residual(y: f64) -> f64 {
    let (x, z) = (scf_x(y), scf_z(y));
    1.0 - x / 2.0 - 1.0 / (2.0 - y - z + y * z)
}

/// Strong coin flip from a weak one: the three balance constraints reduce to one
/// equation in `y`, solved by bisection on `(0, 1/2)`.
pub fn strong_cf_solve() -> Result<StrongCf> {
    let grid: Vec<f64> = (1..500).map(|k| k as f64 * 0.001).collect();
    let bracket = grid
        .windows(2)
        .find(|w| scf_residual(w[0]).signum() != scf_residual(w[1]).signum())
        .ok_or_else(|| CvError::NonConvergence("no sign change for the strong coin flip".into()))?;
    let (mut lo, mut hi) = (bracket[0], bracket[1]);
    let flo = scf_residual(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if scf_residual(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    let (x, z) = (scf_x(y), scf_z(y));
    let p = 1.0 - (1.0 - x) * (1.0 - y);
    let eps = 1.0 - (1.0 - y) * (1.0 - z) - p;
    let bias = (0.5 - 0.5 * (p - eps)).max(1.0 / (2.0 - (p + eps)) - 0.5);
    Ok(StrongCf { x, y, z, bias })
}

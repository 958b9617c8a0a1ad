//! Multimode fidelity witness for Boson Sampling from heterodyne samples.
//!
//! Undoing a passive interferometer and a displacement on heterodyne outcomes is a
//! classical map on the samples, so an `m`-mode target `U|1..1 0..0>` is checked
//! mode by mode against single photons and vacua.

use serde::{Deserialize, Serialize};

use crate::error::{CvError, Result};
use crate::heterodyne::deterministic_mean;
use crate::types::{c, ensure_unitary, ComplexMatrix, ComplexVector, SampleBatch, C64};

/// Map every sample `gamma` to `U^dag (gamma - beta)`.
pub fn postprocess_samples(batch: &SampleBatch, u: &ComplexMatrix, beta: &[C64]) -> Result<SampleBatch> {
    let m = batch.modes;
    if u.nrows() != m || u.ncols() != m || beta.len() != m {
        return Err(CvError::DimensionMismatch(format!(
            "batch has {m} modes, unitary is {}x{}, shift has {} entries",
            u.nrows(),
            u.ncols(),
            beta.len()
        )));
    }
    ensure_unitary(u)?;
    let ud = u.adjoint();
    let mut points = Vec::with_capacity(batch.points.len());
    for row in batch.rows() {
        let g = ComplexVector::from_fn(m, |i, _| row[i] - beta[i]);
        points.extend((&ud * g).iter().copied());
    }
    let mut out = SampleBatch::new(m, points)?;
    out.seed = batch.seed;
    out.source = format!("{} (post-processed)", batch.source);
    Ok(out)
}

/// Lower and upper bounds on a product-state fidelity from the single-mode
/// fidelities: `max(0, 1 - sum(1 - F_i))` and `prod F_i`.
pub fn product_fidelity_bounds(fidelities: &[f64]) -> Result<(f64, f64)> {
    if let Some(f) = fidelities.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(CvError::InvalidParameter(format!("fidelity {f} outside [0, 1]")));
    }
    let lower = 1.0 - fidelities.iter().map(|f| 1.0 - f).sum::<f64>();
    Ok((lower.max(0.0), fidelities.iter().product()))
}

fn check_precision(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 2.0 / 3.0) {
        return Err(CvError::InvalidParameter(format!("precision {eta} outside (0, 2/3)")));
    }
    Ok(())
}

/// Vacuum-overlap estimator `(1/eta) exp((1 - 1/eta)|z|^2)`.
pub fn f0(z: C64, eta: f64) -> f64 {
    (1.0 / eta) * ((1.0 - 1.0 / eta) * z.norm_sqr()).exp()
}

/// Single-photon-overlap estimator `(1/eta^2)(|z|^2/eta - 1) exp((1 - 1/eta)|z|^2)`.
pub fn f1(z: C64, eta: f64) -> f64 {
    let t = z.norm_sqr();
    (t / eta - 1.0) / (eta * eta) * ((1.0 - 1.0 / eta) * t).exp()
}

/// Split of the total precision `epsilon` between the vacuum modes and the photon modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSplit {
    pub lambda_vacuum: f64,
    pub lambda_photon: f64,
}

impl PrecisionSplit {
    /// `lambda_0 = epsilon / (2(m-n))`, `lambda_1 = epsilon / (2n)`; an empty group
    /// hands its half of the budget to the other one.
    pub fn even(modes: usize, photons: usize, epsilon: f64) -> Self {
        let (vac, ph) = (modes - photons, photons);
        let share = |count: usize, other: usize| {
            if count == 0 {
                0.0
            } else if other == 0 {
                epsilon / count as f64
            } else {
                epsilon / (2.0 * count as f64)
            }
        };
        Self { lambda_vacuum: share(vac, ph), lambda_photon: share(ph, vac) }
    }
}

/// Union failure probability `2[(m-n) exp(-N l0^4 / 8) + n exp(-N l1^6 / 1458)]`,
/// returned per group (vacuum modes, photon modes).
pub fn failure_terms(samples: f64, modes: usize, photons: usize, split: &PrecisionSplit) -> (f64, f64) {
    let n = samples;
    let vac = 2.0 * (modes - photons) as f64 * (-n * split.lambda_vacuum.powi(4) / 8.0).exp();
    let ph = 2.0 * photons as f64 * (-n * split.lambda_photon.powi(6) / 1458.0).exp();
    (vac, ph)
}

/// Smallest sample count whose failure probability is at most `delta`, as a real
/// number since it quickly exceeds integer range.
pub fn required_samples(modes: usize, photons: usize, epsilon: f64, delta: f64) -> Result<f64> {
    if photons > modes || modes == 0 || !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(CvError::InvalidParameter("need n <= m, m >= 1, epsilon > 0 and delta in (0, 1)".into()));
    }
    let split = PrecisionSplit::even(modes, photons, epsilon);
    let fail = |n: f64| {
        let (a, b) = failure_terms(n, modes, photons, &split);
        a + b
    };
    let mut hi = 1.0;
    while fail(hi) > delta {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(CvError::Infeasible("sample count overflows".into()));
        }
    }
    let mut lo = hi / 2.0;
    while hi - lo > 0.5f64.max(hi * 1e-12) {
        let mid = 0.5 * (lo + hi);
        if fail(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.ceil())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// Estimated overlap of each post-processed mode with its ideal single-mode state.
    pub per_mode: Vec<f64>,
    pub witness: f64,
    /// Additive precision of the witness, `(m-n) lambda_0 + n lambda_1`.
    pub slack: f64,
    pub failure_probability: f64,
    pub failure_vacuum_modes: f64,
    pub failure_photon_modes: f64,
    pub samples: usize,
    pub photon_modes: Vec<usize>,
}

/// Witness estimate for the target `U|1..1 0..0>` with photons in the first
/// `photons` modes.
pub fn bs_witness(batch: &SampleBatch, u: &ComplexMatrix, photons: usize, epsilon: f64) -> Result<WitnessReport> {
    let placement: Vec<usize> = (0..photons).collect();
    bs_witness_with_placement(batch, u, &placement, epsilon)
}

/// Witness estimate with single photons entering the modes listed in `photon_modes`.
pub fn bs_witness_with_placement(
    batch: &SampleBatch,
    u: &ComplexMatrix,
    photon_modes: &[usize],
    epsilon: f64,
) -> Result<WitnessReport> {
    let m = batch.modes;
    let n = photon_modes.len();
    let mut occupied = vec![false; m];
    for &j in photon_modes {
        if j >= m || occupied[j] {
            return Err(CvError::InvalidParameter(format!("photon mode {j} repeated or out of range")));
        }
        occupied[j] = true;
    }
    if batch.is_empty() || !(epsilon > 0.0) {
        return Err(CvError::InvalidParameter("need samples and a positive epsilon".into()));
    }
    let split = PrecisionSplit::even(m, n, epsilon);
    let (eta0, eta1) = (split.lambda_vacuum / 2.0, split.lambda_photon / 3.0);
    if n < m {
        check_precision(eta0)?;
    }
    if n > 0 {
        check_precision(eta1)?;
    }
    let post = postprocess_samples(batch, u, &vec![C64::default(); m])?;
    let count = post.len();
    let per_mode: Vec<f64> = (0..m)
        .map(|i| {
            let pick = |k: usize| post.points[k * m + i];
            if occupied[i] {
                deterministic_mean(count, |k| c(f1(pick(k), eta1), 0.0)).re
            } else {
                deterministic_mean(count, |k| c(f0(pick(k), eta0), 0.0)).re
            }
        })
        .collect();
    let witness = 1.0 - per_mode.iter().map(|f| 1.0 - f).sum::<f64>();
    let (fv, fp) = failure_terms(count as f64, m, n, &split);
    Ok(WitnessReport {
        per_mode,
        witness,
        slack: (m - n) as f64 * split.lambda_vacuum + n as f64 * split.lambda_photon,
        failure_probability: fv + fp,
        failure_vacuum_modes: fv,
        failure_photon_modes: fp,
        samples: count,
        photon_modes: photon_modes.to_vec(),
    })
}

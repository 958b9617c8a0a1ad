//! Gaussian states in the complex basis `(a_1..a_m, a_1^dag..a_m^dag)` and output
//! densities of Gaussian circuits fed with finite-support (core) inputs.
//!
//! Conventions: `S(xi) = exp((xi a^2 - xi^* a^dag^2)/2)`, so the Heisenberg action
//! is `a -> cosh r a - e^{-i theta} sinh r a^dag`; a passive circuit with
//! `U a_j^dag U^dag = sum_k u_kj a_k^dag` acts as `a -> U a`. The vacuum has `V = I/2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CvError, Result};
use crate::fock::{apply_interferometer_fock, apply_single_mode, truncated_gaussian, FockVector, GaussianKind};
use crate::matfun::{hafnian_exact, loop_hafnian_exact, repeat_symmetric};
use crate::types::{c, ensure_square, ensure_unitary, occ_factorial, ComplexMatrix, C64};

/// One step of a Gaussian circuit, applied in circuit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum GaussianElement {
    /// Single-mode squeezing parameter per mode.
    Squeeze(Vec<C64>),
    Passive(#[serde(with = "crate::types::matrix_serde")] ComplexMatrix),
    Displace(Vec<C64>),
}

impl GaussianElement {
    pub fn modes(&self) -> usize {
        match self {
            Self::Squeeze(v) | Self::Displace(v) => v.len(),
            Self::Passive(u) => u.nrows(),
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            Self::Squeeze(v) => Self::Squeeze(v.iter().map(|z| -z).collect()),
            Self::Displace(v) => Self::Displace(v.iter().map(|z| -z).collect()),
            Self::Passive(u) => Self::Passive(u.adjoint()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub modes: usize,
    #[serde(with = "crate::types::matrix_serde")]
    pub covariance: ComplexMatrix,
    pub displacement: Vec<C64>,
}

impl GaussianState {
    pub fn vacuum(modes: usize) -> Self {
        Self {
            modes,
            covariance: ComplexMatrix::identity(2 * modes, 2 * modes).scale(0.5),
            displacement: vec![C64::default(); modes],
        }
    }

    pub fn coherent(alpha: &[C64]) -> Self {
        Self { displacement: alpha.to_vec(), ..Self::vacuum(alpha.len()) }
    }

    /// `(d, d^*)`.
    pub fn full_displacement(&self) -> DVector<C64> {
        let m = self.modes;
        DVector::from_fn(2 * m, |i, _| if i < m { self.displacement[i] } else { self.displacement[i - m].conj() })
    }

    /// Check Hermiticity and the `[[A, B], [B^*, A^*]]` block pattern.
    pub fn validate(&self) -> Result<()> {
        let m = self.modes;
        if self.covariance.nrows() != 2 * m || self.covariance.ncols() != 2 * m || self.displacement.len() != m {
            return Err(CvError::DimensionMismatch(format!("state on {m} modes has inconsistent shapes")));
        }
        let v = &self.covariance;
        let tol = 1e-9;
        let herm = (v - v.adjoint()).camax();
        let a = v.view((0, 0), (m, m));
        let b = v.view((0, m), (m, m));
        let pattern = (v.view((m, m), (m, m)) - a.conjugate())
            .camax()
            .max((v.view((m, 0), (m, m)) - b.conjugate()).camax())
            .max((b - b.transpose()).camax());
        if herm.max(pattern) > tol {
            return Err(CvError::NotSymmetric { deviation: herm.max(pattern) });
        }
        Ok(())
    }
}

/// Complex symplectic matrix of a squeezing layer.
pub fn squeeze_symplectic(xi: &[C64]) -> ComplexMatrix {
    let m = xi.len();
    let mut s = ComplexMatrix::zeros(2 * m, 2 * m);
    for (k, z) in xi.iter().enumerate() {
        let (r, th) = (z.norm(), z.arg());
        s[(k, k)] = c(r.cosh(), 0.0);
        s[(k + m, k + m)] = c(r.cosh(), 0.0);
        s[(k, k + m)] = -C64::from_polar(r.sinh(), -th);
        s[(k + m, k)] = -C64::from_polar(r.sinh(), th);
    }
    s
}

/// Complex symplectic matrix of a passive circuit, `diag(U, U^*)`.
pub fn passive_symplectic(u: &ComplexMatrix) -> ComplexMatrix {
    let m = u.nrows();
    let mut s = ComplexMatrix::zeros(2 * m, 2 * m);
    s.view_mut((0, 0), (m, m)).copy_from(u);
    s.view_mut((m, m), (m, m)).copy_from(&u.conjugate());
    s
}

pub fn evolve_covariance(state: &GaussianState, element: &GaussianElement) -> Result<GaussianState> {
    let m = state.modes;
    if element.modes() != m {
        return Err(CvError::DimensionMismatch(format!("{}-mode element on a {m}-mode state", element.modes())));
    }
    let s = match element {
        GaussianElement::Displace(beta) => {
            let mut out = state.clone();
            for (d, b) in out.displacement.iter_mut().zip(beta) {
                *d += b;
            }
            return Ok(out);
        }
        GaussianElement::Squeeze(xi) => squeeze_symplectic(xi),
        GaussianElement::Passive(u) => {
            ensure_unitary(u)?;
            passive_symplectic(u)
        }
    };
    let cov = &s * &state.covariance * s.adjoint();
    let d = &s * state.full_displacement();
    Ok(GaussianState { modes: m, covariance: cov, displacement: d.rows(0, m).iter().copied().collect() })
}

/// Covariance and displacement of `G^dag |alpha>` for the circuit `elements`.
pub fn pulled_back_coherent(elements: &[GaussianElement], alpha: &[C64]) -> Result<GaussianState> {
    let mut st = GaussianState::coherent(alpha);
    for e in elements.iter().rev() {
        st = evolve_covariance(&st, &e.inverse())?;
    }
    Ok(st)
}

/// Inverse with a condition-number guard.
pub fn guarded_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a)?;
    let sv = a.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > config::tolerances().condition {
        return Err(CvError::IllConditioned { condition: cond });
    }
    a.clone().try_inverse().ok_or(CvError::IllConditioned { condition: cond })
}

fn shifted(state: &GaussianState) -> ComplexMatrix {
    let n = 2 * state.modes;
    &state.covariance + ComplexMatrix::identity(n, n).scale(0.5)
}

/// Husimi density of a Gaussian state at `point`.
pub fn husimi_gaussian(state: &GaussianState, point: &[C64]) -> Result<f64> {
    let m = state.modes;
    if point.len() != m {
        return Err(CvError::DimensionMismatch(format!("point of length {} for {m} modes", point.len())));
    }
    let sh = shifted(state);
    let inv = guarded_inverse(&sh)?;
    let diff = GaussianState::coherent(point).full_displacement() - state.full_displacement();
    let quad = (diff.adjoint() * &inv * &diff)[(0, 0)].re;
    let det = sh.determinant().re;
    Ok((-0.5 * quad).exp() / (PI.powi(m as i32) * det.sqrt()))
}

fn clamp_density(value: C64) -> Result<f64> {
    let floor = config::tolerances().negative_density;
    let scale = value.norm().max(1.0);
    if value.im.abs() > 1e-8 * scale {
        return Err(CvError::NegativeDensity { value: value.re });
    }
    if value.re < 0.0 {
        if value.re < -floor {
            return Err(CvError::NegativeDensity { value: value.re });
        }
        return Ok(0.0);
    }
    Ok(value.re)
}

/// Output density at `point` of the Gaussian circuit `elements` applied to the
/// finite-support input `core`, followed by heterodyne detection.
///
/// Sums loop hafnians of repeated-index matrices built from the pulled-back
/// coherent state, one term per pair of support elements of the input. The
/// amplitude of the pattern repeated in the second block enters conjugated.
pub fn gcore_density(elements: &[GaussianElement], core: &FockVector, point: &[C64]) -> Result<f64> {
    let m = core.modes();
    if point.len() != m {
        return Err(CvError::DimensionMismatch(format!("point of length {} for {m} modes", point.len())));
    }
    core.ensure_normalized()?;
    if core.max_photons() > 8 {
        return Err(CvError::SizeLimit { what: "core degree", size: core.max_photons(), limit: 8 });
    }
    let st = pulled_back_coherent(elements, point)?;
    let inv = guarded_inverse(&shifted(&st))?;
    let n = 2 * m;
    let mut swap = ComplexMatrix::zeros(n, n);
    for k in 0..m {
        swap[(k, k + m)] = c(1.0, 0.0);
        swap[(k + m, k)] = c(1.0, 0.0);
    }
    let vmat = &swap * (ComplexMatrix::identity(n, n) - &inv);
    let dt = st.full_displacement();
    let dvec: Vec<C64> = (dt.adjoint() * &inv).iter().copied().collect();
    let quad = (dt.adjoint() * &inv * &dt)[(0, 0)].re;
    let det = shifted(&st).determinant().re;
    let kappa = (-0.5 * quad).exp() / (PI.powi(m as i32) * det.sqrt());
    let terms: Vec<(&Vec<usize>, C64)> = core.iter().filter(|(_, z)| z.norm_sqr() > 0.0).map(|(o, z)| (o, *z)).collect();
    let mut acc = C64::default();
    for (p, cp) in &terms {
        for (q, cq) in &terms {
            let a = repeat_symmetric(&vmat, &dvec, p, q)?;
            let w = 1.0 / (occ_factorial(p) * occ_factorial(q)).sqrt();
            acc += cp * cq.conj() * loop_hafnian_exact(&a)? * w;
        }
    }
    clamp_density(acc * kappa)
}

/// Same density by evolving the input in a truncated Fock space (reference path).
pub fn gcore_density_fock(elements: &[GaussianElement], core: &FockVector, point: &[C64], cutoff: usize) -> Result<f64> {
    let m = core.modes();
    let mut st = core.clone().with_cutoff(vec![cutoff; m])?;
    for e in elements {
        st = match e {
            GaussianElement::Passive(u) => apply_interferometer_fock(u, &st)?,
            GaussianElement::Squeeze(v) | GaussianElement::Displace(v) => {
                let kind = if matches!(e, GaussianElement::Squeeze(_)) { GaussianKind::Squeeze } else { GaussianKind::Displacement };
                let mut cur = st;
                for (k, z) in v.iter().enumerate() {
                    let op = truncated_gaussian(kind, *z, cutoff).entries;
                    cur = apply_single_mode(&op, k, &cur)?.state;
                }
                cur
            }
        };
        st = st.pruned(1e-300);
    }
    st.husimi(point)
}

/// Boson-Sampling-like circuit measured with unbalanced heterodyne detection:
/// `n` single photons and `m - n` vacua squeezed by `xi`, the interferometer
/// `O exp(i phi Sigma)`, then detection squeezed by `zeta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvsCircuit {
    pub modes: usize,
    pub photons: usize,
    pub xi: f64,
    pub phi: f64,
    #[serde(with = "crate::types::matrix_serde")]
    pub sigma: ComplexMatrix,
    #[serde(with = "crate::types::matrix_serde")]
    pub o: ComplexMatrix,
    pub zeta: f64,
}

impl CvsCircuit {
    pub fn validate(&self) -> Result<()> {
        let m = self.modes;
        if self.photons % 2 == 1 || 2 * self.photons > m {
            return Err(CvError::InvalidParameter(format!("need even n with m >= 2n, got m={m}, n={}", self.photons)));
        }
        for (name, a) in [("Sigma", &self.sigma), ("O", &self.o)] {
            if a.nrows() != m || a.ncols() != m {
                return Err(CvError::DimensionMismatch(format!("{name} must be {m}x{m}")));
            }
            if a.iter().any(|z| z.im.abs() > 1e-9) {
                return Err(CvError::InvalidParameter(format!("{name} must be real")));
            }
            ensure_unitary(a)?;
        }
        let asym = (&self.sigma - self.sigma.transpose()).camax();
        if asym > 1e-9 {
            return Err(CvError::NotSymmetric { deviation: asym });
        }
        Ok(())
    }

    /// `O exp(i phi Sigma) = O (cos phi I + i sin phi Sigma)`, using `Sigma^2 = I`.
    pub fn unitary(&self) -> ComplexMatrix {
        let m = self.modes;
        let e = ComplexMatrix::identity(m, m).scale(self.phi.cos()) + self.sigma.map(|z| z * c(0.0, self.phi.sin()));
        &self.o * e
    }

    /// The same circuit as a list of Gaussian elements acting on the photon input.
    /// Squeezing here uses the opposite sign to [`GaussianElement::Squeeze`].
    pub fn elements(&self) -> Vec<GaussianElement> {
        let m = self.modes;
        vec![
            GaussianElement::Squeeze(vec![c(-self.xi, 0.0); m]),
            GaussianElement::Passive(self.unitary()),
            GaussianElement::Squeeze(vec![c(self.zeta, 0.0); m]),
        ]
    }

    pub fn input(&self) -> Result<FockVector> {
        let occ: Vec<usize> = (0..self.modes).map(|k| usize::from(k < self.photons)).collect();
        FockVector::basis(&occ, 1)
    }

    /// `1 + cosh 2xi cosh 2zeta - sinh 2xi sinh 2zeta cos 2phi`.
    pub fn mixing_factor(&self) -> f64 {
        let (x, z) = (2.0 * self.xi, 2.0 * self.zeta);
        1.0 + x.cosh() * z.cosh() - x.sinh() * z.sinh() * (2.0 * self.phi).cos()
    }
}

/// Output density of a CVS circuit at the origin:
/// `kappa * Haf(Sigma_n)^2`, with `Sigma_n` the top-left `n x n` block.
pub fn cvs_origin_density(circ: &CvsCircuit) -> Result<f64> {
    circ.validate()?;
    let (m, n) = (circ.modes as i32, circ.photons as i32);
    let sub = circ.sigma.view((0, 0), (circ.photons, circ.photons)).into_owned();
    let haf = hafnian_exact(&sub)?;
    let kappa = 2f64.powf(m as f64 / 2.0) * (2.0 * circ.zeta).sinh().powi(n) * (2.0 * circ.phi).sin().powi(n)
        / (PI.powi(m) * circ.mixing_factor().powf(n as f64 + m as f64 / 2.0));
    Ok(kappa * haf.norm_sqr())
}

/// Cholesky factor `Z` (upper triangular, `Z^T Z = A`) of a positive semidefinite
/// real matrix; tiny negative pivots are treated as zero.
pub(crate) fn semidefinite_cholesky(a: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut z = DMatrix::zeros(n, n);
    for j in 0..n {
        let s: f64 = (0..j).map(|k| z[(k, j)] * z[(k, j)]).sum();
        let pivot = a[(j, j)] - s;
        if pivot < -tol {
            return None;
        }
        let d = pivot.max(0.0).sqrt();
        z[(j, j)] = d;
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| z[(k, j)] * z[(k, i)]).sum();
            let off = a[(j, i)] - s;
            if d > tol.sqrt() {
                z[(j, i)] = off / d;
            } else if off.abs() > tol.sqrt() {
                return None;
            }
        }
    }
    Some(z)
}

/// Real symmetric orthogonal `m x m` matrix whose top-left `2p x 2p` block is
/// `nu [[0, X], [X^T, 0]]`.
pub fn embed_orthogonal(x: &DMatrix<f64>, m: usize, nu: f64) -> Result<ComplexMatrix> {
    let p = x.nrows();
    if x.ncols() != p || p == 0 {
        return Err(CvError::NotSquare { rows: x.nrows(), cols: x.ncols() });
    }
    if m < 4 * p {
        return Err(CvError::InvalidParameter(format!("need m >= {} for a {p}x{p} block, got {m}", 4 * p)));
    }
    let y = x.scale(nu);
    let gap = DMatrix::<f64>::identity(p, p) - y.transpose() * &y;
    let z = semidefinite_cholesky(&gap, 1e-12)
        .ok_or_else(|| CvError::InvalidParameter(format!("nu = {nu} exceeds 1/||X||")))?;
    // Complete the orthonormal columns [Y; Z] to an orthogonal W = [[Y, C], [Z, D]].
    let mut stacked = DMatrix::<f64>::zeros(2 * p, 3 * p);
    stacked.view_mut((0, 0), (p, p)).copy_from(&y);
    stacked.view_mut((p, 0), (p, p)).copy_from(&z);
    stacked.view_mut((0, p), (2 * p, 2 * p)).copy_from(&DMatrix::identity(2 * p, 2 * p));
    let q = stacked.qr().q();
    let comp = q.columns(p, p).into_owned();
    let (cc, dd) = (comp.rows(0, p).into_owned(), comp.rows(p, p).into_owned());
    let mut s = DMatrix::<f64>::zeros(m, m);
    let put = |s: &mut DMatrix<f64>, bi: usize, bj: usize, blk: &DMatrix<f64>| {
        s.view_mut((bi * p, bj * p), (p, p)).copy_from(blk);
        s.view_mut((bj * p, bi * p), (p, p)).copy_from(&blk.transpose());
    };
    put(&mut s, 0, 1, &y);
    put(&mut s, 0, 3, &cc);
    put(&mut s, 1, 2, &z.transpose());
    put(&mut s, 2, 3, &dd);
    for k in 4 * p..m {
        s[(k, k)] = 1.0;
    }
    Ok(s.map(|v| c(v, 0.0)))
}

//! Shared value types.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{CvError, Result};
use crate::special::factorial;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Photon counts per mode.
pub type OccupationTuple = Vec<usize>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Product of the factorials of the entries.
pub fn occ_factorial(occ: &[usize]) -> f64 {
    occ.iter().map(|&k| factorial(k)).product()
}

pub fn total(occ: &[usize]) -> usize {
    occ.iter().sum()
}

/// An estimate with an additive error bound holding except with the stated probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceValue<T = f64> {
    pub value: T,
    pub bound: f64,
    pub failure_probability: f64,
}

/// Heterodyne outcomes, one row of `modes` complex numbers per shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub modes: usize,
    pub seed: Option<u64>,
    pub source: String,
    pub points: Vec<C64>,
}

impl SampleBatch {
    pub fn new(modes: usize, points: Vec<C64>) -> Result<Self> {
        if modes == 0 || !points.len().is_multiple_of(modes) {
            return Err(CvError::DimensionMismatch(format!(
                "{} values do not split into rows of {modes}",
                points.len()
            )));
        }
        Ok(Self { modes, seed: None, source: String::new(), points })
    }

    pub fn single_mode(points: Vec<C64>) -> Self {
        Self { modes: 1, seed: None, source: String::new(), points }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.modes.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.points[i * self.modes..(i + 1) * self.modes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C64]> {
        self.points.chunks(self.modes)
    }

    /// Outcomes of one mode across all shots.
    pub fn column(&self, mode: usize) -> Vec<C64> {
        self.rows().map(|r| r[mode]).collect()
    }
}

/// Row-major `[re, im]` encoding of a complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRepr(pub Vec<Vec<[f64; 2]>>);

impl From<&ComplexMatrix> for MatrixRepr {
    fn from(m: &ComplexMatrix) -> Self {
        MatrixRepr(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }
}

impl TryFrom<MatrixRepr> for ComplexMatrix {
    type Error = CvError;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let rows = r.0.len();
        let cols = r.0.first().map_or(0, Vec::len);
        if r.0.iter().any(|row| row.len() != cols) {
            return Err(CvError::DimensionMismatch("ragged matrix rows".into()));
        }
        Ok(DMatrix::from_fn(rows, cols, |i, j| C64::new(r.0[i][j][0], r.0[i][j][1])))
    }
}

/// Serde adapter for `ComplexMatrix` fields.
pub mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ComplexMatrix, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        ComplexMatrix::try_from(r).map_err(serde::de::Error::custom)
    }
}

pub fn ensure_square(a: &ComplexMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(CvError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}

/// Largest entry of `|U^dag U - I|`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.ncols();
    let g = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn ensure_unitary(u: &ComplexMatrix) -> Result<()> {
    ensure_square(u)?;
    let d = unitarity_defect(u);
    if d > config::tolerances().unitarity {
        return Err(CvError::NotUnitary { deviation: d });
    }
    Ok(())
}

/// Returns `(A + A^T)/2` if the asymmetry is within tolerance.
pub fn symmetrized(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(a)?;
    let dev = (a - a.transpose()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if dev > config::tolerances().symmetry {
        return Err(CvError::NotSymmetric { deviation: dev });
    }
    Ok((a + a.transpose()).scale(0.5))
}

/// Operator 2-norm.
pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn random_unitary<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    use rand_distr::{Distribution, StandardNormal};
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn matrix_repr_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0), c(0.5, 0.5)]);
        let r = MatrixRepr::from(&m);
        assert_eq!(r.0[0][1], [3.0, 0.0]);
        let back = ComplexMatrix::try_from(r).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(5, &mut rng);
        assert!(unitarity_defect(&u) < 1e-12);
    }

    #[test]
    fn sample_batch_columns() {
        let b = SampleBatch::new(2, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.column(1), vec![c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(SampleBatch::new(3, vec![c(1.0, 0.0)]).is_err());
    }
}

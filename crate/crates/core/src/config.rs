//! Process-wide numerical tolerances.
//!
//! Every module reads its thresholds from here. The CLI installs overrides once at
//! startup; library users may call [`install`] as well.

use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{CvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max entrywise deviation of `U^dag U` from the identity.
    pub unitarity: f64,
    /// Allowed deviation of a squared norm from one.
    pub normalization: f64,
    /// Max entrywise asymmetry before a matrix is rejected; smaller asymmetry is averaged away.
    pub symmetry: f64,
    /// Largest accepted condition number for matrices that get inverted.
    pub condition: f64,
    /// Densities in `[-negative_density, 0)` are clamped to zero.
    pub negative_density: f64,
    /// Relative floor on |F| along a contour before the contour is moved.
    pub contour_floor: f64,
    /// Max distance to the nearest integer for an accepted zero count.
    pub residue: f64,
    /// Objective tolerance of the simplex optimizer.
    pub optimizer: f64,
    /// Minimum acceptance rate of rejection samplers.
    pub acceptance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-9,
            normalization: 1e-6,
            symmetry: 1e-9,
            condition: 1e12,
            negative_density: 1e-9,
            contour_floor: 1e-9,
            residue: 0.1,
            optimizer: 1e-10,
            acceptance: 1e-4,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 9] = [
        "unitarity",
        "normalization",
        "symmetry",
        "condition",
        "negative_density",
        "contour_floor",
        "residue",
        "optimizer",
        "acceptance",
    ];

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(CvError::InvalidParameter(format!(
                "tolerance {name} must be positive, got {value}"
            )));
        }
        let slot = match name {
            "unitarity" => &mut self.unitarity,
            "normalization" => &mut self.normalization,
            "symmetry" => &mut self.symmetry,
            "condition" => &mut self.condition,
            "negative_density" | "negative-density" => &mut self.negative_density,
            "contour_floor" | "contour-floor" => &mut self.contour_floor,
            "residue" => &mut self.residue,
            "optimizer" => &mut self.optimizer,
            "acceptance" => &mut self.acceptance,
            _ => {
                return Err(CvError::InvalidParameter(format!("unknown tolerance `{name}`")))
            }
        };
        *slot = value;
        Ok(())
    }
}

static ACTIVE: RwLock<Option<Tolerances>> = RwLock::new(None);

/// Current tolerances (defaults unless [`install`] was called).
pub fn tolerances() -> Tolerances {
    ACTIVE
        .read()
        .map(|g| g.unwrap_or_default())
        .unwrap_or_default()
}

/// Replace the process-wide tolerances.
pub fn install(tol: Tolerances) {
    if let Ok(mut g) = ACTIVE.write() {
        *g = Some(tol);
    }
}

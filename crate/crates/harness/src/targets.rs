//! Ground-truth CGPTs used by the experiments, and the JSON file format for
//! user-supplied targets.

use std::f64::consts::PI;
use std::path::Path;

use cgpt_core::dynamics::disk_cgpt;
use cgpt_core::{CgptMatrix, MaterialParams};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, HarnessError};

/// Order-1 anisotropy added to the disk's diagonal block.
pub const TRACKING_ANISOTROPY: f64 = 0.5;
/// Diagonal of the order-1/order-2 cross block.
pub const TRACKING_CROSS: [f64; 2] = [1.0, 3.0];

/// Asymmetric tracking target in `δ`-normalised units: a unit disk with
/// `cc₁₁ += a`, `ss₁₁ −= a` and `M₁₂ = M₂₁ᵀ = diag(1, 3)`.
///
/// The cross block makes the response change under rotations by angles
/// other than multiples of `π`, so orientation is observable from the
/// first two orders.
pub fn tracking_target(material: &MaterialParams, k_data: usize) -> cgpt_core::Result<CgptMatrix> {
    let mut m = disk_cgpt(1.0, material, k_data.max(2))?;
    let b = m.block(1, 1);
    let a = TRACKING_ANISOTROPY;
    m.set_block(1, 1, [[b[0][0] + a, b[0][1]], [b[1][0], b[1][1] - a]]);
    let [c1, c2] = TRACKING_CROSS;
    m.set_block(1, 2, [[c1, 0.0], [0.0, c2]]);
    m.set_block(2, 1, [[c1, 0.0], [0.0, c2]]);
    m.truncate(k_data)
}

/// Ellipse-like reference for reconstruction studies.
///
/// Order 1 is the exact polarization tensor of an ellipse with semi-axes
/// `a`, `b` along the coordinate axes; higher orders are those of the disk
/// with the same area. Only the first two orders are scored, so the
/// approximation in orders `≥ 2` only shapes the data.
pub fn ellipse_like(
    a: f64,
    b: f64,
    material: &MaterialParams,
    k: usize,
) -> cgpt_core::Result<CgptMatrix> {
    if !(a > 0.0 && b > 0.0) {
        return Err(cgpt_core::Error::InvalidParameter(format!(
            "semi-axes must be positive, got ({a}, {b})"
        )));
    }
    let kappa = material.kappa();
    let mut m = disk_cgpt((a * b).sqrt(), material, k)?;
    let s = (kappa - 1.0) * PI * a * b;
    m.set_block(
        1,
        1,
        [
            [s * (a + b) / (a + kappa * b), 0.0],
            [0.0, s * (a + b) / (b + kappa * a)],
        ],
    );
    Ok(m)
}

/// Semi-axes of the reconstruction reference.
pub const ELLIPSE_AXES: (f64, f64) = (1.0, 0.5);

/// `{"K": k, "entries": [[...], ...]}` with `2K` rows of `2K` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgptFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub entries: Vec<Vec<f64>>,
}

impl CgptFile {
    pub fn from_matrix(m: &CgptMatrix) -> Self {
        let e = m.entries();
        Self {
            k: m.order(),
            entries: e.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CgptMatrix, ConfigError> {
        let d = 2 * self.k;
        let invalid = |message: String| ConfigError::Invalid {
            field: "entries".into(),
            message,
        };
        if self.entries.len() != d || self.entries.iter().any(|r| r.len() != d) {
            return Err(invalid(format!(
                "expected a {d} x {d} array for K = {}",
                self.k
            )));
        }
        let flat: Vec<f64> = self.entries.iter().flatten().copied().collect();
        let m = CgptMatrix::from_entries(DMatrix::from_row_slice(d, d, &flat))
            .map_err(|e| invalid(e.to_string()))?;
        if !m.is_symmetric(1e-12) {
            return Err(invalid("CGPT matrix must be symmetric".into()));
        }
        Ok(m)
    }
}

pub fn load_target(path: &Path) -> Result<CgptMatrix, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ConfigError::NotFound(path.to_path_buf()),
        _ => ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let file: CgptFile =
        serde_path_to_error::deserialize(&mut de).map_err(|e| ConfigError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    Ok(file.to_matrix()?)
}

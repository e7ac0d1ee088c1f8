use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Published matrices are rounded to three digits, so a row may sum to 0.999.
pub const ROW_SUM_TOLERANCE: f64 = 2e-3;

/// Row-stochastic three-state assignment matrix: `rows[i][j]` is the
/// probability of reading state j when state i was prepared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentMatrix {
    pub rows: [[f64; 3]; 3],
}

impl AssignmentMatrix {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Self { rows };
        m.validate()?;
        Ok(m)
    }

    pub fn identity() -> Self {
        Self { rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::config(format!("assignment row {i} has entries outside [0, 1]")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::config(format!("assignment row {i} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rows[i][j])
    }

    /// Measured distribution `βᵀ p` for true populations `p`.
    pub fn measure(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.matrix().transpose() * Vector3::from(p);
        [v[0], v[1], v[2]]
    }
}

/// Corrected populations `β⁻ᵀ p_meas`. Negative components are returned as computed.
pub fn correct_readout(p_meas: [f64; 3], beta: &AssignmentMatrix) -> Result<[f64; 3]> {
    let bt = beta.matrix().transpose();
    let lu = bt.lu();
    let det = lu.determinant();
    if !(det.abs() > 1e-12) {
        return Err(Error::Degenerate { reason: "assignment matrix is singular".into(), condition: f64::INFINITY });
    }
    let v = lu
        .solve(&Vector3::from(p_meas))
        .ok_or_else(|| Error::Degenerate { reason: "assignment matrix is singular".into(), condition: f64::INFINITY })?;
    Ok([v[0], v[1], v[2]])
}

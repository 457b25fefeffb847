use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::linalg;

const PSD_TOL: f64 = 1e-10;

/// Quadratic cost weights: `Q` symmetric PSD (n x n), `R` symmetric PD
/// (m x m). The terminal weight is always zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, ControlError> {
        for (name, m) in [("Q", &q), ("R", &r)] {
            if m.nrows() == 0 || !m.is_square() {
                return Err(ControlError::InvalidWeights(format!(
                    "{name} must be square and non-empty, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !linalg::all_finite(m) {
                return Err(ControlError::InvalidWeights(format!("{name} has non-finite entries")));
            }
            let tol = 1e-9 * linalg::max_abs(m).max(1.0);
            if linalg::asymmetry(m) > tol {
                return Err(ControlError::InvalidWeights(format!("{name} is not symmetric")));
            }
        }
        let q_min = linalg::min_eigenvalue(&q);
        if q_min < -PSD_TOL {
            return Err(ControlError::InvalidWeights(format!(
                "Q is not positive semidefinite (min eigenvalue {q_min:.3e})"
            )));
        }
        let r_min = linalg::min_eigenvalue(&r);
        if r_min <= 0.0 {
            return Err(ControlError::InvalidWeights(format!(
                "R is not positive definite (min eigenvalue {r_min:.3e})"
            )));
        }
        Ok(Self {
            q: linalg::symmetrize(&q),
            r: linalg::symmetrize(&r),
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    /// `(alpha Q, alpha R)`; `alpha` must be positive.
    pub fn scaled(&self, alpha: f64) -> Result<Self, ControlError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ControlError::InvalidWeights(format!(
                "scale must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            q: &self.q * alpha,
            r: &self.r * alpha,
        })
    }

    pub(crate) fn check_dims(&self, n: usize, m: usize) -> Result<(), ControlError> {
        if self.n() != n {
            return Err(ControlError::DimensionMismatch {
                what: "Q",
                expected: n,
                found: self.n(),
            });
        }
        if self.m() != m {
            return Err(ControlError::DimensionMismatch {
                what: "R",
                expected: m,
                found: self.m(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    #[serde(with = "linalg::rows")]
    q: DMatrix<f64>,
    #[serde(with = "linalg::rows")]
    r: DMatrix<f64>,
}

impl TryFrom<RawWeights> for CostWeights {
    type Error = ControlError;

    fn try_from(raw: RawWeights) -> Result<Self, Self::Error> {
        CostWeights::new(raw.q, raw.r)
    }
}

impl From<CostWeights> for RawWeights {
    fn from(w: CostWeights) -> Self {
        RawWeights { q: w.q, r: w.r }
    }
}

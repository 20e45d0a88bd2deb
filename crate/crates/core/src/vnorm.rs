//! Vector-valued norm `‖δx‖_v = sqrt(A · dvec(diag(δx)²))` and the quantities
//! derived from it.
//!
//! Row `i` of the gain matrix `A` defines the weighted seminorm
//! `D_i(δx) = sqrt(Σ_j a_ij δx_j²)`. When every column of `A` carries a
//! positive entry, each vanishing of the whole vector forces `δx = 0` and the
//! map behaves as a norm componentwise; the gain matrix records this as
//! [`GainMatrix::is_definite`].

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormError {
    #[error("gain matrix entry ({row}, {col}) is negative")]
    NegativeEntry { row: usize, col: usize },
    #[error("gain matrix entry ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("gain matrix is zero")]
    ZeroMatrix,
    #[error("gain matrix has no rows or columns")]
    Empty,
    #[error("gain matrix row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("squared norm component {component} is {value}, below rounding range")]
    NegativeSquare { component: usize, value: f64 },
}

/// Largest negative rounding residue that is clamped to zero before a square root.
pub const SQRT_CLAMP: f64 = 1e-14;

/// Validated non-negative, non-zero `m × n` matrix `A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    definite: bool,
}

/// Componentwise values `D_1 .. D_m` of the vector-valued norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorNormValue(Vec<f64>);

impl VectorNormValue {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for VectorNormValue {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl GainMatrix {
    /// Builds `A` from row-major rows.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, NormError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(NormError::Empty);
        }
        let mut entries = Vec::with_capacity(m * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(NormError::Ragged {
                    row: i,
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &a) in row.iter().enumerate() {
                if !a.is_finite() {
                    return Err(NormError::NonFiniteEntry { row: i, col: j });
                }
                if a < 0.0 {
                    return Err(NormError::NegativeEntry { row: i, col: j });
                }
                entries.push(a);
            }
        }
        if entries.iter().all(|&a| a == 0.0) {
            return Err(NormError::ZeroMatrix);
        }
        let definite = (0..n).all(|j| (0..m).any(|i| entries[i * n + j] > 0.0));
        Ok(GainMatrix {
            rows: m,
            cols: n,
            entries,
            definite,
        })
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        GainMatrix::new(&rows).expect("identity is a valid gain matrix")
    }

    /// Output dimension `m`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// State dimension `n`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Every column has a strictly positive entry.
    pub fn is_definite(&self) -> bool {
        self.definite
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.cols)
            .map(<[f64]>::to_vec)
            .collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<(), NormError> {
        if v.len() != self.cols {
            return Err(NormError::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok(())
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.entries
            .chunks(self.cols)
            .map(|row| row.iter().zip(w).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// `A · dvec(diag(dx)²)`.
    pub fn norm_squared(&self, dx: &[f64]) -> Result<Vec<f64>, NormError> {
        self.check_len(dx)?;
        let squares: Vec<f64> = dx.iter().map(|x| x * x).collect();
        Ok(self.apply(&squares))
    }

    pub fn norm(&self, dx: &[f64]) -> Result<VectorNormValue, NormError> {
        let squared = self.norm_squared(dx)?;
        squared
            .into_iter()
            .enumerate()
            .map(|(i, s)| clamped_sqrt(i, s))
            .collect::<Result<Vec<_>, _>>()
            .map(VectorNormValue)
    }

    /// Time derivative of [`norm_squared`](Self::norm_squared) along a path
    /// with velocity `dxdot`: `2 A · dvec(diag(dx) diag(dxdot))`.
    pub fn norm_squared_rate(&self, dx: &[f64], dxdot: &[f64]) -> Result<Vec<f64>, NormError> {
        self.check_len(dx)?;
        self.check_len(dxdot)?;
        Ok(self.bilinear(dx, dxdot))
    }

    /// Fréchet derivative of `F(dx) = ‖dx‖_v²` at `dx`, applied to the
    /// direction `h`: the linear map `h ↦ 2 A diag(dx) h`.
    pub fn frechet_apply(&self, dx: &[f64], h: &[f64]) -> Result<Vec<f64>, NormError> {
        self.check_len(dx)?;
        self.check_len(h)?;
        Ok(self.bilinear(dx, h))
    }

    fn bilinear(&self, dx: &[f64], h: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = dx.iter().zip(h).map(|(a, b)| a * b).collect();
        self.apply(&w).into_iter().map(|v| 2.0 * v).collect()
    }
}

fn clamped_sqrt(component: usize, s: f64) -> Result<f64, NormError> {
    if s >= 0.0 {
        Ok(s.sqrt())
    } else if s >= -SQRT_CLAMP {
        Ok(0.0)
    } else {
        Err(NormError::NegativeSquare {
            component,
            value: s,
        })
    }
}

//! Oblique projections `P_X^Y` onto `X` along `Y`.
//!
//! With `Q_X` an orthonormal frame of `X` and `Q_W` one of `W = Y^⊥`
//! (`dim W = dim X`), `P_X^Y z = Q_X Ξ^{-1} Q_Wᵀ z` where `Ξ = Q_Wᵀ Q_X`.
//! The sum `X ⊕ Y` is direct exactly when `Ξ` is invertible.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg;
use crate::saturation::Subspace;

/// Condition number of `Ξ` above which the sum is treated as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct ObliqueProjector {
    range: DMatrix<f64>,
    test: DMatrix<f64>,
    xi_inv: DMatrix<f64>,
    condition: f64,
}

impl ObliqueProjector {
    /// Projector onto `span(range)` along `span(test)^⊥`. Both frames must
    /// have orthonormal columns and the same column count.
    pub fn new(range: DMatrix<f64>, test: DMatrix<f64>) -> Result<Self> {
        if range.nrows() != test.nrows() || range.ncols() != test.ncols() {
            return Err(Error::Dimension(format!(
                "range frame is {}x{}, test frame {}x{}",
                range.nrows(),
                range.ncols(),
                test.nrows(),
                test.ncols()
            )));
        }
        let xi = test.transpose() * &range;
        let condition = linalg::condition_number(&xi);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::DegenerateSum(condition));
        }
        let xi_inv = xi.try_inverse().ok_or(Error::DegenerateSum(f64::INFINITY))?;
        Ok(ObliqueProjector {
            range,
            test,
            xi_inv,
            condition,
        })
    }

    /// `P_X^{W^⊥}` from the frames of two subspaces.
    pub fn from_subspaces(x: &Subspace, w: &Subspace) -> Result<Self> {
        ObliqueProjector::new(x.frame_matrix(), w.frame_matrix())
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn range(&self) -> &DMatrix<f64> {
        &self.range
    }

    /// `Ξ^{-1}`.
    pub fn xi_inverse(&self) -> &DMatrix<f64> {
        &self.xi_inv
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let z = DVector::from_column_slice(z);
        let c = &self.xi_inv * (self.test.transpose() * z);
        (&self.range * c).iter().copied().collect()
    }

    pub fn apply_field(&self, z: &Field) -> Result<Field> {
        if z.len() != self.range.nrows() {
            return Err(Error::LengthMismatch {
                expected: self.range.nrows(),
                got: z.len(),
            });
        }
        Field::from_coeffs(z.basis(), self.apply(z.coeffs()))
    }

    /// The complementary projector `1 - P` applied to `z`.
    pub fn apply_complement(&self, z: &[f64]) -> Vec<f64> {
        let p = self.apply(z);
        z.iter().zip(p).map(|(a, b)| a - b).collect()
    }

    /// Dense `n × n` matrix of the projector.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.range * &self.xi_inv * self.test.transpose()
    }

    /// `‖P‖` in the operator 2-norm.
    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.matrix())
    }

    /// `‖1 - P‖` in the operator 2-norm.
    pub fn complement_norm(&self) -> f64 {
        let n = self.range.nrows();
        linalg::spectral_norm(&(DMatrix::identity(n, n) - self.matrix()))
    }

    /// `‖P_{W^⊥}^{X} P_W‖`, the leakage of `W` through the complementary
    /// projector: the largest singular value of `Q_W - Q_X Ξ^{-1}`.
    pub fn leakage(&self) -> f64 {
        linalg::spectral_norm(&(&self.test - &self.range * &self.xi_inv))
    }
}

/// `P_X^Y z` for a splitting `X ⊕ Y` of the whole truncated space.
pub fn oblique_project(z: &Field, x: &Subspace, y: &Subspace) -> Result<Field> {
    let n = z.len();
    if x.dim() + y.dim() != n {
        return Err(Error::Dimension(format!(
            "dim X + dim Y = {} + {} but the truncated space has dimension {n}",
            x.dim(),
            y.dim()
        )));
    }
    let w = linalg::orthogonal_complement(&y.frame_matrix());
    if w.ncols() != x.dim() {
        return Err(Error::DegenerateSum(f64::INFINITY));
    }
    ObliqueProjector::new(x.frame_matrix(), w)?.apply_field(z)
}

/// Orthonormal frame of the first `m` basis directions.
pub fn leading_frame(n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |i, j| if i == j { 1.0 } else { 0.0 })
}

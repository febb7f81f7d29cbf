//! Small complex dense-matrix helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, column-major.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Stacks the columns of `m` into a single vector.
pub fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// `‖m − mᵀ‖_F` (plain transpose, no conjugation).
pub fn symmetry_residual(m: &CMatrix) -> f64 {
    (m - m.transpose()).norm()
}

/// `‖m mᴴ − I‖_F`.
pub fn unitarity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    (m * m.adjoint() - CMatrix::identity(n, n)).norm()
}

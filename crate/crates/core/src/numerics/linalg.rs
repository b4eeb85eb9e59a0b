//! Dense determinants, solves and Hermitian spectra on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Determinant of a real square matrix by partial-pivot LU.
pub fn det_real(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::argument(format!(
            "determinant needs a square matrix (got {}x{})",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(1.0);
    }
    Ok(m.clone().lu().determinant())
}

/// Determinant of a complex square matrix by partial-pivot LU.
pub fn det_complex(m: &DMatrix<Complex64>) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::argument(format!(
            "determinant needs a square matrix (got {}x{})",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(m.clone().lu().determinant())
}

/// Solves m x = b, reporting a singular system instead of returning NaNs.
pub fn solve_real(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !m.is_square() || m.nrows() != b.len() {
        return Err(Error::argument(
            "solve needs a square matrix matching the right-hand side",
        ));
    }
    m.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{}x{} system is singular", m.nrows(), m.ncols())))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::argument("eigenvalues need a square matrix"));
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Eigenvalues of a real symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::argument("eigenvalues need a square matrix"));
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

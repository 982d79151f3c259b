//! Small dense helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, Dyn};

pub(crate) fn cholesky(matrix: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = matrix.clone().cholesky()?;
    // nalgebra accepts tiny negative pivots as zero-ish; reject non-finite factors.
    if chol.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
        Some(chol)
    } else {
        None
    }
}

/// log det of a positive definite matrix, or `None` when Cholesky fails.
pub fn log_det_spd(matrix: &DMatrix<f64>) -> Option<f64> {
    let chol = cholesky(matrix)?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn inverse_spd(matrix: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = cholesky(matrix)?.inverse();
    Some(symmetrized(&inv))
}

pub fn symmetrized(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    (matrix + matrix.transpose()) * 0.5
}

pub fn max_abs(matrix: &DMatrix<f64>) -> f64 {
    matrix.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn is_symmetric(matrix: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !matrix.is_square() {
        return false;
    }
    let scale = max_abs(matrix).max(f64::MIN_POSITIVE);
    let p = matrix.nrows();
    (0..p).all(|j| (j + 1..p).all(|k| (matrix[(j, k)] - matrix[(k, j)]).abs() <= rel_tol * scale))
}

pub fn principal_submatrix(matrix: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(indices.len(), indices.len(), |a, b| {
        matrix[(indices[a], indices[b])]
    })
}

/// Sum of elementwise products, i.e. trace(AB) for symmetric A, B.
pub fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn symmetric_eigenvalues(matrix: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

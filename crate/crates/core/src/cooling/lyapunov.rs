use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Real;

/// Solves A·V + V·Aᵀ + D = 0 by Kronecker vectorization.
///
/// Suited to the small (≤ 6×6) systems used here; cost is O(n⁶).
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, d: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n || d.nrows() != n || d.ncols() != n {
        return Err(Error::domain("solve_lyapunov", "matrices must be square and of equal size"));
    }
    let eye = DMatrix::<T>::identity(n, n);
    let big = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, d.as_slice());
    let sol = big.lu().solve(&rhs).ok_or_else(|| Error::Instability {
        context: "Lyapunov operator singular (eigenvalue pair with λ_i + λ_j = 0)".into(),
        eigenvalues: Vec::new(),
    })?;
    let v = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&v + v.transpose()) * T::of(0.5))
}

/// Frobenius norm of A·V + V·Aᵀ + D.
pub fn lyapunov_residual<T: Real>(a: &DMatrix<T>, v: &DMatrix<T>, d: &DMatrix<T>) -> T {
    (a * v + v * a.transpose() + d).norm()
}

//! Generalized Hermitian eigenproblems.

use nalgebra::linalg::{Cholesky, SymmetricEigen};

use crate::linalg::{CMatrix, CVector};
use crate::{Complex64, Error, Result};

fn hermitian_error(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    (m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale
}

/// Maximises `uᴴAu / uᴴBu` over nonzero `u`.
///
/// Returns the largest generalized eigenvalue and the maximiser scaled to unit
/// norm, with the phase fixed so that its largest-magnitude entry is real and
/// positive. Errors if the shapes differ, either matrix is not Hermitian, or
/// `B` is not positive definite.
pub fn generalized_rayleigh_max(a: &CMatrix, b: &CMatrix) -> Result<(f64, CVector)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::invalid(format!(
            "generalized eigenproblem needs square matrices of equal size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if hermitian_error(a) > 1e-9 || hermitian_error(b) > 1e-9 {
        return Err(Error::invalid("matrices must be Hermitian"));
    }
    let bh = (b + b.adjoint()) * Complex64::new(0.5, 0.0);
    let chol = Cholesky::new(bh).ok_or_else(|| Error::invalid("B is not positive definite"))?;
    let l = chol.l();
    // Reject numerically singular B as well.
    let diag: Vec<f64> = (0..n).map(|i| l[(i, i)].re).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-12 * dmax) {
        return Err(Error::invalid("B is not positive definite"));
    }
    // C = L⁻¹ A L⁻ᴴ
    let ah = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let linv_a = l
        .solve_lower_triangular(&ah)
        .ok_or_else(|| Error::invalid("B is not positive definite"))?;
    let c_adj = l
        .solve_lower_triangular(&linv_a.adjoint())
        .ok_or_else(|| Error::invalid("B is not positive definite"))?;
    let c = c_adj.adjoint();
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(c);
    let (imax, lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let v: CVector = eig.eigenvectors.column(imax).into_owned();
    let mut u = l
        .adjoint()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::invalid("B is not positive definite"))?;
    let nrm = u.norm();
    u /= Complex64::new(nrm, 0.0);
    Ok((lambda, normalize_phase(u)))
}

/// Rotates `u` so that its largest-magnitude entry is real and positive.
pub fn normalize_phase(mut u: CVector) -> CVector {
    if let Some((_, pivot)) = u
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .map(|(i, v)| (i, *v))
    {
        if pivot.norm() > 0.0 {
            let rot = pivot.conj() / pivot.norm();
            u.iter_mut().for_each(|v| *v *= rot);
        }
    }
    u
}

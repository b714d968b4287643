//! Small complex linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `aᴴ b`.
pub fn dotc(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `aᵀ b` without conjugation.
pub fn dotu(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm_sqr(a: &CVector) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Column `k` of `m` as an owned vector.
pub fn column(m: &CMatrix, k: usize) -> CVector {
    m.column(k).into_owned()
}

/// Dominant right singular vector of `m` by power iteration on `mᴴm`.
pub fn dominant_right_singular(m: &CMatrix) -> CVector {
    let gram = m.adjoint() * m;
    let n = gram.nrows();
    let mut v = CVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    // A deterministic, generic start vector avoids landing in an invariant subspace.
    for (i, x) in v.iter_mut().enumerate() {
        *x += Complex64::new(1e-3 * (i as f64 + 1.0), 1e-3 * (i as f64 * 0.37).sin());
    }
    let mut lambda = 0.0;
    for _ in 0..500 {
        let next = &gram * &v;
        let nn = next.norm();
        if nn == 0.0 {
            return v.normalize();
        }
        let next = next / Complex64::new(nn, 0.0);
        let change = (&next - &v).norm();
        v = next;
        if (nn - lambda).abs() <= 1e-13 * nn && change < 1e-10 {
            break;
        }
        lambda = nn;
    }
    v
}

//! Small dense complex helpers shared by the physics modules.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};
use ndarray_linalg::{Eig, EigVals, Eigh, Inverse, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Conjugate transpose.
pub fn adjoint(m: &ArrayView2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Bra-ket `⟨u|v⟩ = Σ conj(u_k) v_k`.
pub fn braket(u: &ArrayView1<C64>, v: &ArrayView1<C64>) -> C64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &ArrayView1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry modulus.
pub fn max_abs(m: &ArrayView2<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &ArrayView2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

pub fn anticommutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) + b.dot(a)
}

pub fn all_finite(m: &ArrayView2<C64>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// General (non-Hermitian) eigendecomposition; columns of the second array are
/// right eigenvectors.
pub fn eig(m: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    Ok(m.eig()?)
}

pub fn eigvals(m: &Array2<C64>) -> Result<Array1<C64>> {
    Ok(m.eigvals()?)
}

/// Hermitian eigendecomposition (ascending real eigenvalues).
pub fn eigh(m: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    // column-major copy: a row-major input is read as its transpose, which for
    // a Hermitian matrix is the conjugate
    let mut f = Array2::<C64>::zeros(m.raw_dim().f());
    f.assign(m);
    Ok(f.eigh(UPLO::Upper)?)
}

/// `a⁻¹ b` for a small square `a`.
pub fn solve_matrix(a: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    let mut f = Array2::<C64>::zeros(a.raw_dim().f());
    f.assign(a);
    Ok(f.inv()?.dot(b))
}

/// Smallest singular value of a small square matrix, via the Hermitian
/// eigenproblem of `m† m`.
pub fn min_singular_value(m: &Array2<C64>) -> Result<f64> {
    let gram = adjoint(&m.view()).dot(m);
    let (vals, _) = eigh(&gram)?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt())
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// Intended for the short-time propagators used by the integrators, where
/// `‖m‖` is O(1); accuracy is close to machine precision there.
pub fn expm(m: &Array2<C64>) -> Result<Array2<C64>> {
    let n = m.nrows();
    if !all_finite(&m.view()) {
        return Err(Error::NonFinite("matrix exponential argument".into()));
    }
    // 1-norm bound
    let norm1 = (0..n)
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m.mapv(|z| z * scale);
    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=18 {
        term = term.dot(&a).mapv(|z| z / k as f64);
        result += &term;
        if max_abs(&term.view()) < 1e-18 * max_abs(&result.view()) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    Ok(result)
}

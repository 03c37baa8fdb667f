use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, max_abs, C64};

pub const DEFAULT_HERMITICITY_TOL: f64 = 1e-12;

/// A dense, finite, square and generally non-Hermitian Hamiltonian matrix
/// together with the value of ħ used by every formula that consumes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    matrix: Array2<C64>,
    hbar: f64,
}

impl Hamiltonian {
    pub fn new(matrix: Array2<C64>) -> Result<Self> {
        Self::with_hbar(matrix, 1.0)
    }

    pub fn with_hbar(matrix: Array2<C64>, hbar: f64) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows == 0 {
            return Err(Error::InvalidInput("Hamiltonian must have dimension ≥ 1".into()));
        }
        if rows != cols {
            return Err(Error::InvalidInput(format!(
                "Hamiltonian must be square, got {rows}x{cols}"
            )));
        }
        if !all_finite(&matrix.view()) {
            return Err(Error::NonFinite("Hamiltonian entries".into()));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidInput(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { matrix, hbar })
    }

    /// Build from row-major real and imaginary parts.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let n = re.len();
        if im.len() != n || re.iter().chain(im).any(|row| row.len() != n) {
            return Err(Error::InvalidInput(
                "re/im must both be n×n row-major arrays".into(),
            ));
        }
        let m = Array2::from_shape_fn((n, n), |(j, k)| C64::new(re[j][k], im[j][k]));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    /// `max |h_jk − conj(h_kj)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.matrix.t().mapv(|z| z.conj());
        max_abs(&(&self.matrix - &adj).view())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(&self.matrix)
    }
}

/// JSON interchange form of a dense complex matrix:
/// `{"dim": n, "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &Array2<C64>) -> Self {
        let n = m.nrows();
        Self {
            dim: n,
            re: (0..n).map(|j| m.row(j).iter().map(|z| z.re).collect()).collect(),
            im: (0..n).map(|j| m.row(j).iter().map(|z| z.im).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<Array2<C64>> {
        let n = self.dim;
        if self.re.len() != n
            || self.im.len() != n
            || self.re.iter().chain(&self.im).any(|row| row.len() != n)
        {
            return Err(Error::InvalidInput(format!(
                "matrix JSON declares dim {n} but re/im are not {n}×{n}"
            )));
        }
        Ok(Array2::from_shape_fn((n, n), |(j, k)| {
            C64::new(self.re[j][k], self.im[j][k])
        }))
    }

    pub fn to_hamiltonian(&self) -> Result<Hamiltonian> {
        Hamiltonian::new(self.to_matrix()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_square_and_nan() {
        let m = Array2::<C64>::zeros((2, 3));
        assert!(matches!(Hamiltonian::new(m), Err(Error::InvalidInput(_))));
        let m = array![[C64::new(f64::NAN, 0.0)]];
        assert!(matches!(Hamiltonian::new(m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn hermitian_flag() {
        let sx = Hamiltonian::from_parts(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[vec![0.0; 2], vec![0.0; 2]]).unwrap();
        assert!(sx.is_hermitian(DEFAULT_HERMITICITY_TOL));
        let pt = Hamiltonian::from_parts(
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            &[vec![0.5, 0.0], vec![0.0, -0.5]],
        )
        .unwrap();
        assert!(!pt.is_hermitian(DEFAULT_HERMITICITY_TOL));
        assert!((pt.hermiticity_defect() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_shape_checked() {
        let bad = MatrixJson { dim: 2, re: vec![vec![0.0; 2]], im: vec![vec![0.0; 2]; 2] };
        assert!(bad.to_matrix().is_err());
    }
}

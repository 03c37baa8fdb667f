//! Biorthonormal eigensystems of non-Hermitian matrices.
//!
//! A diagonalizable `h` has right eigenvectors `h|a_j⟩ = E_j|a_j⟩` and left
//! eigenvectors `⟨b_j|h = E_j⟨b_j|`. After normalization they satisfy
//! `⟨b_i|a_j⟩ = δ_ij` and resolve the identity, `Σ_j |a_j⟩⟨b_j| = 1`.
//!
//! Gauge used throughout the crate:
//!
//! * `‖a_j‖ = 1`, and the first component of `a_j` whose modulus is (up to
//!   a relative `1e-8`) maximal is real and positive;
//! * all remaining freedom is absorbed into `b_j`, so that `⟨b_j|a_j⟩ = 1`.
//!
//! Defective (or numerically near-defective) matrices are refused with
//! [`Error::ExceptionalPoint`].

use ndarray::{Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::Inverse;

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, DEFAULT_HERMITICITY_TOL};
use crate::linalg::{adjoint, braket, eig, eigh, max_abs, min_singular_value, norm, C64};

/// Relative slack used when picking the gauge pivot among near-equal moduli.
const PIVOT_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiorthoOptions {
    /// Minimum normalized overlap `|⟨b_j|a_j⟩|/(‖a_j‖‖b_j‖)` accepted before
    /// the matrix is declared defective.
    pub tol_ep: f64,
    /// Eigenvalues closer than this (relative to `max(1, max|E|)`) are treated
    /// as one degenerate cluster.
    pub degeneracy_tol: f64,
    /// Maximum `|E_right − conj(E_left)|` (relative) for a valid pairing.
    pub pairing_tol: f64,
    pub hermiticity_tol: f64,
    pub residual_tol: f64,
    pub completeness_tol: f64,
}

impl Default for BiorthoOptions {
    fn default() -> Self {
        Self {
            tol_ep: 1e-8,
            degeneracy_tol: 1e-10,
            pairing_tol: 1e-6,
            hermiticity_tol: DEFAULT_HERMITICITY_TOL,
            residual_tol: 1e-9,
            completeness_tol: 1e-9,
        }
    }
}

impl BiorthoOptions {
    pub fn with_tol_ep(tol_ep: f64) -> Self {
        Self { tol_ep, ..Self::default() }
    }
}

/// Eigenvalues with paired right (`a_j`) and left (`b_j`) eigenvectors,
/// stored as matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthoSystem {
    eigenvalues: Array1<C64>,
    right: Array2<C64>,
    left: Array2<C64>,
    condition_estimate: f64,
    hbar: f64,
}

impl BiorthoSystem {
    /// Assemble a system from raw parts without checking any invariant.
    ///
    /// Useful for deserialization and for tests that need a deliberately
    /// broken system.
    pub fn from_parts(
        eigenvalues: Array1<C64>,
        right: Array2<C64>,
        left: Array2<C64>,
        condition_estimate: f64,
        hbar: f64,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        for m in [&right, &left] {
            if m.dim() != (n, n) {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
            }
        }
        Ok(Self { eigenvalues, right, left, condition_estimate, hbar })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn eigenvalues(&self) -> &Array1<C64> {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> C64 {
        self.eigenvalues[j]
    }

    /// Right eigenvector `|a_j⟩`.
    pub fn right(&self, j: usize) -> ArrayView1<'_, C64> {
        self.right.column(j)
    }

    /// Left eigenvector `|b_j⟩` (as a ket; the bra is its conjugate).
    pub fn left(&self, j: usize) -> ArrayView1<'_, C64> {
        self.left.column(j)
    }

    pub fn right_vectors(&self) -> &Array2<C64> {
        &self.right
    }

    pub fn left_vectors(&self) -> &Array2<C64> {
        &self.left
    }

    /// Worst reciprocal normalized overlap `1/|⟨b_j|a_j⟩|` before rescaling.
    /// Large values signal proximity to an exceptional point.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// `max_{ij} |⟨b_i|a_j⟩ − δ_ij|`.
    pub fn biortho_defect(&self) -> f64 {
        let gram = adjoint(&self.left.view()).dot(&self.right);
        max_abs(&(gram - Array2::<C64>::eye(self.dim())).view())
    }

    /// `Σ_j E_j |a_j⟩⟨b_j|`.
    pub fn reconstruct(&self) -> Array2<C64> {
        let mut scaled = self.right.clone();
        for (mut col, e) in scaled.axis_iter_mut(Axis(1)).zip(self.eigenvalues.iter()) {
            col.mapv_inplace(|z| z * e);
        }
        scaled.dot(&adjoint(&self.left.view()))
    }

    /// Largest right and left eigen-equation residuals against `h`:
    /// `max_j ‖h a_j − E_j a_j‖` and `max_j ‖h† b_j − conj(E_j) b_j‖`.
    pub fn residuals(&self, h: &Hamiltonian) -> (f64, f64) {
        let m = h.matrix();
        let madj = adjoint(&m.view());
        let mut right = 0.0f64;
        let mut left = 0.0f64;
        for j in 0..self.dim() {
            let e = self.eigenvalues[j];
            let r = m.dot(&self.right.column(j)) - self.right.column(j).mapv(|z| z * e);
            let l = madj.dot(&self.left.column(j)) - self.left.column(j).mapv(|z| z * e.conj());
            right = right.max(norm(&r.view()));
            left = left.max(norm(&l.view()));
        }
        (right, left)
    }

    /// Projection coefficients `c_j = ⟨b_j|ψ⟩`.
    pub fn project(&self, psi: &ArrayView1<C64>) -> Array1<C64> {
        adjoint(&self.left.view()).dot(psi)
    }

    /// Index of the eigenvalue closest to `target`.
    pub fn closest_mode(&self, target: C64) -> usize {
        self.eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()))
            .map(|(j, _)| j)
            .unwrap_or(0)
    }

    /// Distance from `E_j` to the nearest other eigenvalue (infinite for 1×1).
    pub fn gap(&self, j: usize) -> f64 {
        let e = self.eigenvalues[j];
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, f)| (f - e).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Index of the gauge pivot: first component whose modulus is maximal up to
/// a relative [`PIVOT_SLACK`].
pub fn gauge_pivot(v: &ArrayView1<C64>) -> usize {
    let max = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    v.iter()
        .position(|z| z.norm() >= (1.0 - PIVOT_SLACK) * max)
        .unwrap_or(0)
}

/// Normalize `v` to unit length and rotate component `pivot` onto the
/// positive real axis. Returns the complex factor that was applied.
pub fn fix_gauge(v: &mut Array1<C64>, pivot: usize) -> C64 {
    let n = norm(&v.view());
    let p = v[pivot];
    let factor = if p.norm() > 0.0 {
        p.conj() / (p.norm() * n)
    } else {
        C64::new(1.0 / n, 0.0)
    };
    v.mapv_inplace(|z| z * factor);
    factor
}

/// Diagonalize `h` into a biorthonormal eigensystem.
///
/// Right eigenvectors come from `h`, left eigenvectors from `h†` (whose
/// eigenvalues are the conjugates). The two spectra are paired by nearest
/// conjugate eigenvalue; degenerate clusters are re-biorthogonalized as a
/// block. Hermitian inputs take the Hermitian solver and get `b_j = a_j`.
///
/// ```
/// use nhqm::{biortho::{diagonalize_biortho, BiorthoOptions}, builders::pt2x2};
/// let sys = diagonalize_biortho(&pt2x2(1.0, 0.5).unwrap(), &BiorthoOptions::default()).unwrap();
/// assert!((sys.eigenvalue(1).re - 0.75f64.sqrt()).abs() < 1e-12);
/// assert!(sys.biortho_defect() < 1e-12);
/// ```
pub fn diagonalize_biortho(h: &Hamiltonian, opts: &BiorthoOptions) -> Result<BiorthoSystem> {
    let n = h.dim();
    let m = h.matrix();
    if h.is_hermitian(opts.hermiticity_tol) {
        let (vals, vecs) = eigh(m)?;
        let mut right = vecs;
        for mut col in right.axis_iter_mut(Axis(1)) {
            let mut v = col.to_owned();
            let p = gauge_pivot(&v.view());
            fix_gauge(&mut v, p);
            col.assign(&v);
        }
        let eigenvalues = vals.mapv(|x| C64::new(x, 0.0));
        let scale = vals.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        let sys = BiorthoSystem {
            eigenvalues,
            left: right.clone(),
            right,
            condition_estimate: 1.0,
            hbar: h.hbar(),
        };
        let (rr, _) = sys.residuals(h);
        if rr > opts.residual_tol * scale {
            return Err(Error::Linalg(format!("Hermitian eigensolver residual {rr:.3e}")));
        }
        return Ok(sys);
    }

    let (er, vr) = eig(m)?;
    let (el, vl) = eig(&adjoint(&m.view()))?;
    let scale = er.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));

    // Sort right eigenpairs: by real part, ties (within tolerance) by imaginary part.
    let order = sorted_order(&er, 1e-9 * scale);
    let eigenvalues: Array1<C64> = order.iter().map(|&j| er[j]).collect();
    let mut right = Array2::<C64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let mut v = vr.column(src).to_owned();
        let p = gauge_pivot(&v.view());
        fix_gauge(&mut v, p);
        right.column_mut(dst).assign(&v);
    }

    let clusters = cluster(&eigenvalues, opts.degeneracy_tol * scale);
    let assignment = pair_left(&clusters, &eigenvalues, &el, opts.pairing_tol * scale)?;

    let mut left = Array2::<C64>::zeros((n, n));
    let mut condition_estimate = 1.0f64;
    for (members, lefts) in clusters.iter().zip(&assignment) {
        let k = members.len();
        let mut a_block = Array2::<C64>::zeros((n, k));
        let mut b_block = Array2::<C64>::zeros((n, k));
        for (c, &j) in members.iter().enumerate() {
            a_block.column_mut(c).assign(&right.column(j));
        }
        for (c, &l) in lefts.iter().enumerate() {
            let col = vl.column(l);
            let nb = norm(&col);
            b_block.column_mut(c).assign(&col.mapv(|z| z / nb));
        }
        let cross = adjoint(&b_block.view()).dot(&a_block);
        let overlap = if k == 1 { cross[[0, 0]].norm() } else { min_singular_value(&cross)? };
        if !(overlap >= opts.tol_ep) {
            return Err(Error::ExceptionalPoint {
                mode: members[0],
                overlap,
                threshold: opts.tol_ep,
            });
        }
        condition_estimate = condition_estimate.max(1.0 / overlap);
        let fixed = b_block.dot(&adjoint(&cross.inv()?.view()));
        for (c, &j) in members.iter().enumerate() {
            left.column_mut(j).assign(&fixed.column(c));
        }
    }

    let sys = BiorthoSystem {
        eigenvalues,
        right,
        left,
        condition_estimate,
        hbar: h.hbar(),
    };

    // Near-defective matrices can pass the overlap test and still lose the
    // biorthonormal structure to roundoff; refuse those too.
    let defect = sys.biortho_defect().max(verify_completeness(&sys));
    let (rr, rl) = sys.residuals(h);
    let tol = opts.completeness_tol.max(opts.residual_tol);
    if defect > tol || rr.max(rl) > opts.residual_tol * scale {
        return Err(Error::ExceptionalPoint {
            mode: 0,
            overlap: 1.0 / condition_estimate,
            threshold: opts.tol_ep,
        });
    }
    Ok(sys)
}

/// `max |Σ_j |a_j⟩⟨b_j| − I|`.
pub fn verify_completeness(sys: &BiorthoSystem) -> f64 {
    let res = sys.right.dot(&adjoint(&sys.left.view())) - Array2::<C64>::eye(sys.dim());
    max_abs(&res.view())
}

/// True iff every left vector equals its right partner up to a global phase,
/// i.e. `min_θ ‖a_j − e^{iθ} b_j‖ < tol` for all `j`.
pub fn hermitian_limit_check(sys: &BiorthoSystem, tol: f64) -> bool {
    (0..sys.dim()).all(|j| {
        let a = sys.right(j);
        let b = sys.left(j);
        let d2 = norm(&a).powi(2) + norm(&b).powi(2) - 2.0 * braket(&b, &a).norm();
        d2.max(0.0).sqrt() < tol
    })
}

fn sorted_order(vals: &Array1<C64>, tie: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re));
    // Re-sort runs of (numerically) equal real part by imaginary part.
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && vals[idx[end]].re - vals[idx[end - 1]].re <= tie {
            end += 1;
        }
        idx[start..end].sort_by(|&a, &b| vals[a].im.total_cmp(&vals[b].im));
        start = end;
    }
    idx
}

/// Connected components of the "closer than `tol`" relation.
fn cluster(vals: &Array1<C64>, tol: f64) -> Vec<Vec<usize>> {
    let n = vals.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (vals[i] - vals[j]).norm() < tol {
                let (ri, rj) = (find(&mut label, i), find(&mut label, j));
                if ri != rj {
                    label[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut label, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups
}

/// Assign each left eigenvalue (of `h†`) to the right cluster whose
/// eigenvalues are nearest to its conjugate; every cluster must receive
/// exactly as many left vectors as it has members.
fn pair_left(
    clusters: &[Vec<usize>],
    right_vals: &Array1<C64>,
    left_vals: &Array1<C64>,
    tol: f64,
) -> Result<Vec<Vec<usize>>> {
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); clusters.len()];
    for (l, el) in left_vals.iter().enumerate() {
        let target = el.conj();
        let mut dists: Vec<(f64, usize)> = clusters
            .iter()
            .enumerate()
            .map(|(c, members)| {
                let d = members
                    .iter()
                    .map(|&j| (right_vals[j] - target).norm())
                    .fold(f64::INFINITY, f64::min);
                (d, c)
            })
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (d1, c1) = dists[0];
        if d1 > tol {
            return Err(Error::PairingFailure(format!(
                "left eigenvalue {target} has no right partner within {tol:.1e} (nearest {d1:.3e})"
            )));
        }
        if let Some(&(d2, _)) = dists.get(1) {
            if d2 <= 10.0 * d1 && d2 <= tol {
                return Err(Error::PairingFailure(format!(
                    "left eigenvalue {target} is ambiguous between clusters ({d1:.3e} vs {d2:.3e})"
                )));
            }
        }
        assignment[c1].push(l);
    }
    for (members, lefts) in clusters.iter().zip(&assignment) {
        if members.len() != lefts.len() {
            return Err(Error::PairingFailure(format!(
                "cluster at {} has {} right but {} left eigenvectors",
                right_vals[members[0]],
                members.len(),
                lefts.len()
            )));
        }
    }
    Ok(assignment)
}

//! Truncated Fock spaces, ladder operators and many-body Hamiltonians.
//!
//! The conjugate field operators act as `φ̄̂_j ↦ Ĉ_j†` and `ψ̂_j ↦ Ĉ_j` in
//! the occupation basis; all non-Hermiticity sits in the complex
//! coefficients. Many-body matrices are assembled by applying ladder
//! strings to basis states.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::hamiltonian::MatrixJson;
use crate::linalg::{eigvals, max_abs, C64};

pub const DEFAULT_BOSON_CUTOFF: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistics {
    Boson,
    Fermion,
}

/// Occupation-number basis `(n_1, …, n_m)`, `0 ≤ n_j ≤ cutoff_j`, in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSpace {
    statistics: Statistics,
    cutoffs: Vec<usize>,
    basis: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl FockSpace {
    pub fn bosons(n_modes: usize, cutoff: usize) -> Result<Self> {
        Self::bosons_with_cutoffs(vec![cutoff; n_modes])
    }

    pub fn bosons_with_cutoffs(cutoffs: Vec<usize>) -> Result<Self> {
        if cutoffs.iter().any(|&c| c == 0) {
            return Err(Error::InvalidInput("bosonic cutoffs must be ≥ 1".into()));
        }
        Self::build(Statistics::Boson, cutoffs)
    }

    pub fn fermions(n_modes: usize) -> Result<Self> {
        Self::build(Statistics::Fermion, vec![1; n_modes])
    }

    pub fn new(statistics: Statistics, n_modes: usize, cutoff: usize) -> Result<Self> {
        match statistics {
            Statistics::Boson => Self::bosons(n_modes, cutoff),
            Statistics::Fermion => Self::fermions(n_modes),
        }
    }

    fn build(statistics: Statistics, cutoffs: Vec<usize>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::InvalidInput("a Fock space needs at least one mode".into()));
        }
        let dim = cutoffs
            .iter()
            .try_fold(1usize, |d, &c| d.checked_mul(c + 1))
            .filter(|&d| d <= 1 << 16)
            .ok_or_else(|| Error::InvalidInput("Fock space dimension exceeds 65536".into()))?;
        let mut basis = Vec::with_capacity(dim);
        let mut cur = vec![0usize; cutoffs.len()];
        loop {
            basis.push(cur.clone());
            // odometer, last mode fastest
            let mut k = cutoffs.len();
            loop {
                if k == 0 {
                    let index = basis.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
                    return Ok(Self { statistics, cutoffs, basis, index });
                }
                k -= 1;
                if cur[k] < cutoffs[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = 0;
            }
        }
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<usize>] {
        &self.basis
    }

    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Total particle number of basis state `i`.
    pub fn particles(&self, i: usize) -> usize {
        self.basis[i].iter().sum()
    }

    /// Apply `Ĉ_j` (`raise = false`) or `Ĉ_j†` to an occupation tuple in place.
    /// Returns the amplitude, or `None` when the result vanishes (including
    /// raising past the cutoff).
    fn ladder(&self, state: &mut [usize], j: usize, raise: bool) -> Option<f64> {
        let n = state[j];
        let amp = match (self.statistics, raise) {
            (Statistics::Boson, false) if n > 0 => (n as f64).sqrt(),
            (Statistics::Boson, true) if n < self.cutoffs[j] => ((n + 1) as f64).sqrt(),
            (Statistics::Fermion, false) if n == 1 => 1.0,
            (Statistics::Fermion, true) if n == 0 => 1.0,
            _ => return None,
        };
        let sign = if self.statistics == Statistics::Fermion && state[..j].iter().sum::<usize>() % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        state[j] = if raise { n + 1 } else { n - 1 };
        Some(sign * amp)
    }

    /// Apply a product of ladder operators, written left to right as in the
    /// operator expression (so the last entry acts first), to basis state `i`.
    fn apply(&self, ops: &[(usize, bool)], i: usize) -> Option<(usize, f64)> {
        let mut state = self.basis[i].clone();
        let mut amp = 1.0;
        for &(j, raise) in ops.iter().rev() {
            amp *= self.ladder(&mut state, j, raise)?;
        }
        Some((self.index[&state], amp))
    }

    /// Accumulate `coef · ops` into `m`.
    fn add_term(&self, m: &mut Array2<C64>, coef: C64, ops: &[(usize, bool)]) {
        if coef == C64::new(0.0, 0.0) {
            return;
        }
        for i in 0..self.dim() {
            if let Some((k, amp)) = self.apply(ops, i) {
                m[[k, i]] += coef * amp;
            }
        }
    }
}

/// Dense operator on a Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyOperator {
    space: Arc<FockSpace>,
    matrix: Array2<C64>,
}

impl ManyBodyOperator {
    pub fn new(space: Arc<FockSpace>, matrix: Array2<C64>) -> Result<Self> {
        if matrix.dim() != (space.dim(), space.dim()) {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: matrix.nrows() });
        }
        Ok(Self { space, matrix })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix
            .indexed_iter()
            .all(|((i, k), z)| i == k || *z == C64::new(0.0, 0.0))
    }

    /// Eigenvalues, read off the diagonal when the matrix is diagonal.
    pub fn spectrum(&self) -> Result<Array1<C64>> {
        if self.is_diagonal() {
            Ok(self.matrix.diag().to_owned())
        } else {
            eigvals(&self.matrix)
        }
    }

    /// Restriction to the states holding exactly `n` particles, with the
    /// indices of those states.
    pub fn sector(&self, n: usize) -> (Vec<usize>, Array2<C64>) {
        let idx: Vec<usize> = (0..self.dim()).filter(|&i| self.space.particles(i) == n).collect();
        let m = Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| self.matrix[[idx[a], idx[b]]]);
        (idx, m)
    }

    /// `max |[A, B]_{ik}|`.
    pub fn commutator_norm(&self, other: &ManyBodyOperator) -> f64 {
        let c = self.matrix.dot(&other.matrix) - other.matrix.dot(&self.matrix);
        max_abs(&c.view())
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(&self.matrix)
    }
}

/// Lowering operators `Ĉ_j` and raising operators `Ĉ_j†` of every mode,
/// together with a per-mode gauge factor `f_j` (`Ĉ_j → f_j Ĉ_j`,
/// `Ĉ_j† → Ĉ_j† / f_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperators {
    space: Arc<FockSpace>,
    lowering: Vec<Array2<C64>>,
    raising: Vec<Array2<C64>>,
    factors: Vec<C64>,
}

impl ModeOperators {
    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn n_modes(&self) -> usize {
        self.lowering.len()
    }

    /// `f_j Ĉ_j`.
    pub fn lowering(&self, j: usize) -> Array2<C64> {
        let f = self.factors[j];
        self.lowering[j].mapv(|z| z * f)
    }

    /// `Ĉ_j† / f_j`.
    pub fn raising(&self, j: usize) -> Array2<C64> {
        let f = self.factors[j];
        self.raising[j].mapv(|z| z / f)
    }

    pub fn factor(&self, j: usize) -> C64 {
        self.factors[j]
    }

    /// Rescale the ladder pair of mode `j` by `f` (composes with earlier
    /// rescalings).
    pub fn regauge(&self, j: usize, f: C64) -> Result<Self> {
        if j >= self.n_modes() {
            return Err(Error::InvalidInput(format!("mode {j} out of range")));
        }
        if f.norm() == 0.0 || !(f.re.is_finite() && f.im.is_finite()) {
            return Err(Error::InvalidInput(format!("gauge factor must be finite and nonzero, got {f}")));
        }
        let mut out = self.clone();
        out.factors[j] *= f;
        Ok(out)
    }

    /// `(Ĉ_j†/f_j)(f_j Ĉ_j) = Ĉ_j†Ĉ_j`, the diagonal matrix of occupations
    /// `n_j`. The gauge factors cancel identically, so the result does not
    /// depend on them at all.
    pub fn number(&self, j: usize) -> Array2<C64> {
        let d = self.space.dim();
        let mut m = Array2::zeros((d, d));
        for (i, occ) in self.space.basis().iter().enumerate() {
            m[[i, i]] = C64::new(occ[j] as f64, 0.0);
        }
        m
    }

    /// `[A, B]_∓ = AB ∓ BA` for bosons / fermions.
    pub fn bracket(&self, a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
        match self.space.statistics() {
            Statistics::Boson => a.dot(b) - b.dot(a),
            Statistics::Fermion => a.dot(b) + b.dot(a),
        }
    }

    /// Largest deviation of `[Ĉ_j, Ĉ_k†]_∓ − δ_jk` and `[Ĉ_j, Ĉ_k]_∓` over
    /// the given basis states (columns).
    pub fn algebra_defect(&self, states: &[usize]) -> f64 {
        let n = self.n_modes();
        let dim = self.space.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let mut ccd = self.bracket(&self.lowering(j), &self.raising(k));
                if j == k {
                    ccd -= &Array2::<C64>::eye(dim);
                }
                let cc = self.bracket(&self.lowering(j), &self.lowering(k));
                for &s in states {
                    for r in 0..dim {
                        worst = worst.max(ccd[[r, s]].norm()).max(cc[[r, s]].norm());
                    }
                }
            }
        }
        worst
    }
}

/// Ladder matrices for every mode of `space`.
pub fn build_mode_operators(space: Arc<FockSpace>) -> ModeOperators {
    let dim = space.dim();
    let n = space.n_modes();
    let mut lowering = Vec::with_capacity(n);
    let mut raising = Vec::with_capacity(n);
    for j in 0..n {
        let mut lo = Array2::zeros((dim, dim));
        let mut hi = Array2::zeros((dim, dim));
        space.add_term(&mut lo, C64::new(1.0, 0.0), &[(j, false)]);
        space.add_term(&mut hi, C64::new(1.0, 0.0), &[(j, true)]);
        lowering.push(lo);
        raising.push(hi);
    }
    ModeOperators { space, lowering, raising, factors: vec![C64::new(1.0, 0.0); n] }
}

/// `Σ_j E_j Ĉ_j†Ĉ_j`.
pub fn build_free_hamiltonian(space: Arc<FockSpace>, energies: &[C64]) -> Result<ManyBodyOperator> {
    if energies.len() != space.n_modes() {
        return Err(Error::DimensionMismatch { expected: space.n_modes(), found: energies.len() });
    }
    // Ĉ_j†Ĉ_j is diagonal with entry n_j; filling it directly keeps the
    // diagonal free of √n·√n roundoff.
    let mut m = Array2::zeros((space.dim(), space.dim()));
    for (i, occ) in space.basis().iter().enumerate() {
        m[[i, i]] = occ.iter().zip(energies).map(|(&n, e)| e * n as f64).sum();
    }
    ManyBodyOperator::new(space, m)
}

/// `Σ_j Ĉ_j†Ĉ_j`.
pub fn total_number_operator(space: Arc<FockSpace>) -> ManyBodyOperator {
    let ones = vec![C64::new(1.0, 0.0); space.n_modes()];
    build_free_hamiltonian(space, &ones).expect("one energy per mode")
}

/// Non-fatal remarks about a built operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FockWarning {
    /// A nonzero on-site contact coupling was given for fermions, where
    /// `Ĉ_j Ĉ_j = 0` makes the term vanish.
    FermionContactTerm,
}

impl std::fmt::Display for FockWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FockWarning::FermionContactTerm => {
                write!(f, "contact coupling has no effect on fermions (on-site pair term vanishes)")
            }
        }
    }
}

/// Interacting operator plus any warnings raised while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Interacting {
    pub operator: ManyBodyOperator,
    pub warnings: Vec<FockWarning>,
}

/// `Σ_{jk} h'_{jk} φ̄̂_j ψ̂_k + (λ/2) Σ_j φ̄̂_j φ̄̂_j ψ̂_j ψ̂_j
///  + (1/2) Σ_{jk} U_{jk} φ̄̂_j φ̄̂_k ψ̂_k ψ̂_j`, with sites as modes.
pub fn build_interacting_hamiltonian(
    space: Arc<FockSpace>,
    h_prime: &Array2<C64>,
    lambda: C64,
    pair_potential: Option<&Array2<C64>>,
) -> Result<Interacting> {
    let n = space.n_modes();
    if h_prime.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: h_prime.nrows() });
    }
    if let Some(u) = pair_potential {
        if u.dim() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: u.nrows() });
        }
    }
    let mut warnings = Vec::new();
    if space.statistics() == Statistics::Fermion && lambda != C64::new(0.0, 0.0) {
        warnings.push(FockWarning::FermionContactTerm);
    }
    let mut m = Array2::zeros((space.dim(), space.dim()));
    for j in 0..n {
        for k in 0..n {
            space.add_term(&mut m, h_prime[[j, k]], &[(j, true), (k, false)]);
        }
    }
    let half = 0.5;
    for j in 0..n {
        space.add_term(&mut m, lambda * half, &[(j, true), (j, true), (j, false), (j, false)]);
    }
    if let Some(u) = pair_potential {
        for j in 0..n {
            for k in 0..n {
                space.add_term(&mut m, u[[j, k]] * half, &[(j, true), (k, true), (k, false), (j, false)]);
            }
        }
    }
    Ok(Interacting { operator: ManyBodyOperator::new(space, m)?, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_is_lexicographic() {
        let s = FockSpace::bosons(2, 2).unwrap();
        assert_eq!(s.dim(), 9);
        assert_eq!(s.basis()[0], vec![0, 0]);
        assert_eq!(s.basis()[1], vec![0, 1]);
        assert_eq!(s.basis()[3], vec![1, 0]);
        assert_eq!(s.basis()[8], vec![2, 2]);
        assert_eq!(s.index_of(&[1, 2]), Some(5));
        let f = FockSpace::fermions(3).unwrap();
        assert_eq!(f.dim(), 8);
        assert!(f.cutoffs().iter().all(|&c| c == 1));
        let mixed = FockSpace::bosons_with_cutoffs(vec![1, 3]).unwrap();
        assert_eq!(mixed.dim(), 8);
    }

    #[test]
    fn single_boson_ladder() {
        let ops = build_mode_operators(Arc::new(FockSpace::bosons(1, 2).unwrap()));
        let expect = array![
            [c(0., 0.), c(1., 0.), c(0., 0.)],
            [c(0., 0.), c(0., 0.), c(2f64.sqrt(), 0.)],
            [c(0., 0.), c(0., 0.), c(0., 0.)]
        ];
        assert_eq!(ops.lowering(0), expect);
        assert_eq!(ops.raising(0), expect.t().to_owned());
    }

    #[test]
    fn boson_truncation_defect_on_top_rung() {
        let cutoff = 3;
        let ops = build_mode_operators(Arc::new(FockSpace::bosons(1, cutoff).unwrap()));
        let comm = ops.bracket(&ops.lowering(0), &ops.raising(0)) - Array2::<C64>::eye(cutoff + 1);
        // √n·√n products carry one rounding each
        for n in 0..cutoff {
            assert!(comm.column(n).iter().all(|z| z.norm() < 1e-14));
        }
        assert!((comm[[cutoff, cutoff]] + (cutoff + 1) as f64).norm() < 1e-14);
        assert!(ops.algebra_defect(&[0, 1, 2]) < 1e-14);
        assert!(ops.algebra_defect(&[3]) > cutoff as f64);
    }

    #[test]
    fn fermion_anticommutators_exact() {
        let ops = build_mode_operators(Arc::new(FockSpace::fermions(3).unwrap()));
        let all: Vec<usize> = (0..8).collect();
        assert_eq!(ops.algebra_defect(&all), 0.0);
        let ac = ops.bracket(&ops.lowering(0), &ops.raising(1));
        assert!(ac.iter().all(|z| *z == c(0., 0.)));
    }

    #[test]
    fn free_spectra() {
        let s = Arc::new(FockSpace::bosons(1, 3).unwrap());
        let h = build_free_hamiltonian(s, &[c(1.0, 0.3)]).unwrap();
        let spec = h.spectrum().unwrap();
        for (n, e) in spec.iter().enumerate() {
            assert_eq!(*e, c(1.0, 0.3) * n as f64);
        }

        let s = Arc::new(FockSpace::fermions(2).unwrap());
        let r3 = 3f64.sqrt();
        let h = build_free_hamiltonian(s, &[c(0., r3), c(0., -r3)]).unwrap();
        assert_eq!(h.spectrum().unwrap().to_vec(), vec![c(0., 0.), c(0., -r3), c(0., r3), c(0., 0.)]);

        let s = Arc::new(FockSpace::bosons(2, 2).unwrap());
        let h = build_free_hamiltonian(s, &[c(0., 0.), c(0., 0.)]).unwrap();
        assert!(h.matrix().iter().all(|z| *z == c(0., 0.)));
        assert!(matches!(
            build_free_hamiltonian(Arc::new(FockSpace::fermions(2).unwrap()), &[c(1., 0.)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn on_site_interaction_diagonal() {
        let s = Arc::new(FockSpace::bosons(1, 3).unwrap());
        let (e, g) = (c(0.7, -0.1), c(0.4, 0.2));
        let h = build_interacting_hamiltonian(s, &array![[e]], g, None).unwrap();
        assert!(h.warnings.is_empty());
        for n in 0..=3usize {
            let nf = n as f64;
            let oracle = e * nf + g * 0.5 * nf * (nf - 1.0);
            assert!((h.operator.matrix()[[n, n]] - oracle).norm() < 1e-14);
        }
    }

    #[test]
    fn pair_potential_adds_density_product() {
        let s = Arc::new(FockSpace::bosons(2, 2).unwrap());
        let u = c(0.3, 0.1);
        let pair = array![[c(0., 0.), u], [u, c(0., 0.)]];
        let zero = Array2::zeros((2, 2));
        let h = build_interacting_hamiltonian(s.clone(), &zero, c(0., 0.), Some(&pair)).unwrap();
        for (i, occ) in s.basis().iter().enumerate() {
            let oracle = u * (occ[0] * occ[1]) as f64;
            assert!((h.operator.matrix()[[i, i]] - oracle).norm() < 1e-14);
        }
        assert!(h.operator.is_diagonal());
    }

    #[test]
    fn fermion_contact_warns() {
        let s = Arc::new(FockSpace::fermions(2).unwrap());
        let hp = array![[c(0., 1.), c(1., 0.)], [c(1., 0.), c(0., -1.)]];
        let h = build_interacting_hamiltonian(s.clone(), &hp, c(1., 0.), None).unwrap();
        assert_eq!(h.warnings, vec![FockWarning::FermionContactTerm]);
        let h0 = build_interacting_hamiltonian(s, &hp, c(0., 0.), None).unwrap();
        assert_eq!(h.operator, h0.operator);
    }

    #[test]
    fn single_particle_sector_is_h_prime() {
        let hp = array![
            [c(0.1, 0.5), c(1., 0.), c(0., 0.)],
            [c(1., 0.), c(0., 0.), c(0.7, 0.)],
            [c(0., 0.), c(0.7, 0.), c(-0.2, -0.5)]
        ];
        for s in [FockSpace::bosons(3, 2).unwrap(), FockSpace::fermions(3).unwrap()] {
            let s = Arc::new(s);
            let h = build_interacting_hamiltonian(s, &hp, c(0., 0.), None).unwrap();
            let (idx, m) = h.operator.sector(1);
            assert_eq!(idx.len(), 3);
            // basis order within the sector is (0,0,1), (0,1,0), (1,0,0)
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(m[[a, b]], hp[[2 - a, 2 - b]]);
                }
            }
        }
    }

    #[test]
    fn number_operator_commutes() {
        let s = Arc::new(FockSpace::bosons(3, 2).unwrap());
        let n = total_number_operator(s.clone());
        assert_eq!(n.matrix()[[0, 0]], c(0., 0.));
        let free = build_free_hamiltonian(s.clone(), &[c(1., 0.2), c(-0.5, 0.), c(0.3, -0.3)]).unwrap();
        assert_eq!(n.commutator_norm(&free), 0.0);
        let hp = Array2::from_shape_fn((3, 3), |(j, k)| c(0.1 * (j + 2 * k) as f64, 0.05 * j as f64));
        let u = Array2::from_shape_fn((3, 3), |(j, k)| c(0.2 / (1 + j + k) as f64, 0.1));
        let int = build_interacting_hamiltonian(s, &hp, c(0.8, -0.4), Some(&u)).unwrap();
        assert!(n.commutator_norm(&int.operator) < 1e-12);
    }

    #[test]
    fn regauge_leaves_number_operator() {
        let ops = build_mode_operators(Arc::new(FockSpace::bosons(2, 3).unwrap()));
        let n0 = ops.number(1);
        for f in [c(2.0, 0.0), c(0.37, -1.3), c(1e-3, 7.0)] {
            let g = ops.regauge(1, f).unwrap();
            assert_eq!(g.number(1), n0);
            assert_ne!(g.lowering(1), ops.lowering(1));
        }
        assert!(ops.regauge(0, c(0., 0.)).is_err());
    }
}

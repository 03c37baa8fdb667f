//! Joint right/left canonical states and their time evolution.
//!
//! A right field `|ψ⟩ = Σ_j c_j |a_j⟩` is paired with the conjugate field
//! `⟨φ̄| = Σ_j c̄_j ⟨b_j|`, where `c̄_j = |C_j|² / c_j` for constant gauge
//! weights `|C_j|²`. The pair `(iħψ_k, φ̄_k)` obeys Hamilton's equations with
//! `𝓗 = ⟨φ̄|h|ψ⟩ = Σ_j E_j c̄_j c_j`, so the occupations `c̄_j c_j` and the
//! field energy stay constant even when the `E_j` are complex.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::biortho::BiorthoSystem;
use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, MatrixJson};
use crate::io::{pairs_to_vec, vec_to_pairs};
use crate::linalg::{eigvals, norm, solve_matrix, C64, I};

/// Largest allowed `dt · max|E_j| / ħ` for [`evolve_ode`].
pub const MAX_STEP_RATIO: f64 = 0.1;

/// How the gauge weights `|C_j|²` are chosen when building a state.
#[derive(Debug, Clone, PartialEq)]
pub enum Gauge {
    /// The same weight on every occupied mode (the default is `1`).
    Uniform(f64),
    /// One weight per mode; must be zero on unoccupied modes.
    Explicit(Vec<f64>),
    /// `|C_j|² = |c_j|²`, which gives `c̄_j = c_j*`. With a Hermitian
    /// Hamiltonian this recovers `⟨φ̄| = ⟨ψ|`.
    RightNorm,
}

impl Default for Gauge {
    fn default() -> Self {
        Gauge::Uniform(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateOptions {
    /// Modes with `|c_j| ≤ occ_threshold · ‖c‖` count as unoccupied.
    pub occ_threshold: f64,
    /// Rescale the gauge weights uniformly so that `Σ c̄_j c_j = 1`.
    pub normalize: bool,
}

impl Default for StateOptions {
    fn default() -> Self {
        Self { occ_threshold: 1e-12, normalize: true }
    }
}

/// Canonical coordinates `(c_j, c̄_j)` over a biorthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalState {
    basis: Arc<BiorthoSystem>,
    c: Array1<C64>,
    c_bar: Array1<C64>,
    gauge: Vec<f64>,
    time: f64,
}

/// The right field `ψ_k` and the conjugate (left) field `φ̄_k` in the site basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub psi: Array1<C64>,
    pub phi_bar: Array1<C64>,
}

impl CanonicalState {
    /// Expand `psi0` over the right eigenvectors, `c_j = ⟨b_j|ψ0⟩`, and pair
    /// each occupied mode with `c̄_j = |C_j|² / c_j`.
    pub fn from_right(
        basis: Arc<BiorthoSystem>,
        psi0: &ArrayView1<C64>,
        gauge: &Gauge,
        opts: &StateOptions,
    ) -> Result<Self> {
        let n = basis.dim();
        if psi0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: psi0.len() });
        }
        let c = basis.project(psi0);
        Self::from_coefficients(basis, c, gauge, opts)
    }

    pub fn from_coefficients(
        basis: Arc<BiorthoSystem>,
        mut c: Array1<C64>,
        gauge: &Gauge,
        opts: &StateOptions,
    ) -> Result<Self> {
        let n = basis.dim();
        if c.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: c.len() });
        }
        if let Gauge::Explicit(g) = gauge {
            if g.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: g.len() });
            }
            if let Some(bad) = g.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::InvalidInput(format!("gauge weights must be ≥ 0, got {bad}")));
            }
        }
        if let Gauge::Uniform(w) = gauge {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidInput(format!("uniform gauge weight must be > 0, got {w}")));
            }
        }
        let threshold = opts.occ_threshold * norm(&c.view());
        let mut weights = vec![0.0; n];
        let mut c_bar = Array1::<C64>::zeros(n);
        for j in 0..n {
            let occupied = c[j].norm() > threshold;
            let w = match gauge {
                Gauge::Uniform(w) => {
                    if occupied {
                        *w
                    } else {
                        0.0
                    }
                }
                Gauge::Explicit(g) => g[j],
                Gauge::RightNorm => {
                    if occupied {
                        c[j].norm_sqr()
                    } else {
                        0.0
                    }
                }
            };
            if !occupied {
                if w > 0.0 {
                    return Err(Error::GaugeConflict { mode: j, value: w });
                }
                c[j] = C64::new(0.0, 0.0);
                continue;
            }
            if w == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "mode {j} is occupied but was given gauge weight 0"
                )));
            }
            weights[j] = w;
            c_bar[j] = w / c[j];
        }
        let mut state = Self { basis, c, c_bar, gauge: weights, time: 0.0 };
        if opts.normalize {
            state.normalize(*gauge == Gauge::RightNorm);
        }
        Ok(state)
    }

    /// Rescale all gauge weights by the same factor so that `Σ c̄_j c_j = 1`.
    /// With `symmetric` the factor is split between `c` and `c̄`, keeping
    /// `c̄_j = c_j*`. An empty state is left untouched.
    fn normalize(&mut self, symmetric: bool) {
        let total: f64 = self.gauge.iter().sum();
        if total > 0.0 {
            for w in &mut self.gauge {
                *w /= total;
            }
            if symmetric {
                let s = total.sqrt();
                self.c.mapv_inplace(|z| z / s);
                self.c_bar.mapv_inplace(|z| z / s);
            } else {
                self.c_bar.mapv_inplace(|z| z / total);
            }
        }
    }

    pub fn basis(&self) -> &Arc<BiorthoSystem> {
        &self.basis
    }

    pub fn c(&self) -> &Array1<C64> {
        &self.c
    }

    pub fn c_bar(&self) -> &Array1<C64> {
        &self.c_bar
    }

    pub fn gauge(&self) -> &[f64] {
        &self.gauge
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn hbar(&self) -> f64 {
        self.basis.hbar()
    }

    /// Modal occupations `c̄_j c_j`.
    pub fn occupations(&self) -> Array1<C64> {
        &self.c_bar * &self.c
    }

    /// `⟨φ̄|ψ⟩ = Σ_j c̄_j c_j`.
    pub fn total_probability(&self) -> C64 {
        self.occupations().sum()
    }

    /// `𝓗 = Σ_j E_j c̄_j c_j`.
    pub fn field_energy(&self) -> C64 {
        self.occupations()
            .iter()
            .zip(self.basis.eigenvalues().iter())
            .map(|(n, e)| n * e)
            .sum()
    }

    /// Advance by `t`: `c_j → c_j e^{−iE_j t/ħ}`, `c̄_j → c̄_j e^{+iE_j t/ħ}`.
    pub fn evolve_spectral(&self, t: f64) -> Self {
        let hbar = self.hbar();
        let mut next = self.clone();
        for j in 0..self.basis.dim() {
            let phase = -I * self.basis.eigenvalue(j) * (t / hbar);
            next.c[j] = self.c[j] * phase.exp();
            next.c_bar[j] = self.c_bar[j] * (-phase).exp();
        }
        next.time = self.time + t;
        next
    }

    /// Site-basis fields `ψ = Σ c_j a_j`, `φ̄_k = Σ c̄_j conj(b_j[k])`.
    pub fn fields(&self) -> FieldPair {
        let psi = self.basis.right_vectors().dot(&self.c);
        let phi_bar = self.basis.left_vectors().mapv(|z| z.conj()).dot(&self.c_bar);
        FieldPair { psi, phi_bar }
    }

    pub fn to_json(&self) -> StateJson {
        StateJson {
            time: self.time,
            hbar: self.basis.hbar(),
            eigenvalues: vec_to_pairs(self.basis.eigenvalues().iter()),
            right: MatrixJson::from_matrix(self.basis.right_vectors()),
            left: MatrixJson::from_matrix(self.basis.left_vectors()),
            condition_estimate: self.basis.condition_estimate(),
            c: vec_to_pairs(self.c.iter()),
            c_bar: vec_to_pairs(self.c_bar.iter()),
            gauge: self.gauge.clone(),
        }
    }

    pub fn from_json(doc: &StateJson) -> Result<Self> {
        let basis = BiorthoSystem::from_parts(
            Array1::from(pairs_to_vec(&doc.eigenvalues)),
            doc.right.to_matrix()?,
            doc.left.to_matrix()?,
            doc.condition_estimate,
            doc.hbar,
        )?;
        let n = basis.dim();
        let c = Array1::from(pairs_to_vec(&doc.c));
        let c_bar = Array1::from(pairs_to_vec(&doc.c_bar));
        if c.len() != n || c_bar.len() != n || doc.gauge.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: c.len() });
        }
        Ok(Self {
            basis: Arc::new(basis),
            c,
            c_bar,
            gauge: doc.gauge.clone(),
            time: doc.time,
        })
    }
}

/// JSON snapshot of a [`CanonicalState`], including its basis. Complex
/// numbers are `[re, im]` pairs; matrices store `a_j`/`b_j` as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub time: f64,
    pub hbar: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    pub right: MatrixJson,
    pub left: MatrixJson,
    pub condition_estimate: f64,
    pub c: Vec<[f64; 2]>,
    pub c_bar: Vec<[f64; 2]>,
    pub gauge: Vec<f64>,
}

impl FieldPair {
    pub fn new(psi: Array1<C64>, phi_bar: Array1<C64>) -> Result<Self> {
        if psi.len() != phi_bar.len() {
            return Err(Error::DimensionMismatch { expected: psi.len(), found: phi_bar.len() });
        }
        Ok(Self { psi, phi_bar })
    }

    /// The Hermitian pairing `φ̄ = ψ†`.
    pub fn from_right_conjugate(psi: Array1<C64>) -> Self {
        let phi_bar = psi.mapv(|z| z.conj());
        Self { psi, phi_bar }
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    /// Site occupations `φ̄_k ψ_k`. For non-Hermitian systems these can be
    /// negative or complex; only their sum is a probability.
    pub fn local_probability(&self) -> Array1<C64> {
        &self.phi_bar * &self.psi
    }

    /// `⟨φ̄|ψ⟩`.
    pub fn total_probability(&self) -> C64 {
        self.local_probability().sum()
    }

    /// `‖ψ‖²`, which is *not* conserved for non-Hermitian `h`.
    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨φ̄|O|ψ⟩`.
    pub fn expectation(&self, op: &Array2<C64>) -> Result<C64> {
        if op.dim() != (self.dim(), self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.nrows() });
        }
        Ok(self.phi_bar.dot(&op.dot(&self.psi)))
    }

    /// Canonical coordinates `(c_j, c̄_j) = (⟨b_j|ψ⟩, ⟨φ̄|a_j⟩)`.
    pub fn project(&self, sys: &BiorthoSystem) -> (Array1<C64>, Array1<C64>) {
        let c = sys.project(&self.psi.view());
        let c_bar = self.phi_bar.dot(sys.right_vectors());
        (c, c_bar)
    }

    fn is_finite(&self) -> bool {
        self.psi.iter().chain(self.phi_bar.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Free-function form of [`FieldPair::local_probability`].
pub fn local_probability(fields: &FieldPair) -> Array1<C64> {
    fields.local_probability()
}

/// Free-function form of [`FieldPair::expectation`].
pub fn expectation(fields: &FieldPair, op: &Array2<C64>) -> Result<C64> {
    fields.expectation(op)
}

/// Hamilton's equations in the canonical pair `(q_k, p_k) = (iħψ_k, φ̄_k)`:
/// returns `(∂𝓗/∂φ̄_k, −∂𝓗/∂(iħψ_k))` for `𝓗 = φ̄ h ψ`, which must equal
/// `(d(iħψ_k)/dt, dφ̄_k/dt)` along a trajectory.
pub fn hamilton_gradients(fields: &FieldPair, h: &Hamiltonian) -> (Array1<C64>, Array1<C64>) {
    let m = h.matrix();
    let dq = m.dot(&fields.psi);
    let dp = fields.phi_bar.dot(m).mapv(|z| -z / (I * h.hbar()));
    (dq, dp)
}

/// Sampled trajectory of field pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<FieldPair>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&FieldPair> {
        self.fields.last()
    }

    /// The same trajectory in eigen-coordinates: component `j` of the result
    /// holds `(c_j(t), c̄_j(t))` in place of `(ψ_j, φ̄_j)`.
    pub fn to_modal(&self, sys: &BiorthoSystem) -> Trajectory {
        let fields = self
            .fields
            .iter()
            .map(|f| {
                let (c, c_bar) = f.project(sys);
                FieldPair { psi: c, phi_bar: c_bar }
            })
            .collect();
        Trajectory { times: self.times.clone(), fields }
    }
}

/// Integrate `iħ dψ/dt = hψ` and `−iħ dφ̄/dt = φ̄h` together with the
/// fixed-step two-stage Gauss–Legendre method (order 4) over `t_span`,
/// storing every `sample_every`-th step (plus the initial and final states).
///
/// Gauss–Legendre steps conserve every quadratic invariant, so `⟨φ̄|ψ⟩` and
/// `⟨φ̄|h|ψ⟩` drift only by roundoff.
///
/// The step actually used is `(t1 − t0)/ceil((t1 − t0)/dt) ≤ dt`.
pub fn evolve_ode(
    fields: &FieldPair,
    h: &Hamiltonian,
    t_span: (f64, f64),
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    let n = h.dim();
    if fields.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: fields.dim() });
    }
    let (t0, t1) = t_span;
    if !(dt > 0.0 && dt.is_finite()) || !(t1 >= t0) {
        return Err(Error::InvalidInput(format!("need dt > 0 and t1 ≥ t0, got dt={dt}, span={t_span:?}")));
    }
    let hbar = h.hbar();
    let emax = eigvals(h.matrix())?.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let ratio = dt * emax / hbar;
    if ratio > MAX_STEP_RATIO {
        return Err(Error::StepTooLarge { ratio, limit: MAX_STEP_RATIO });
    }
    let sample_every = sample_every.max(1);
    let steps = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let step = if steps > 0 { (t1 - t0) / steps as f64 } else { 0.0 };

    let z = h.matrix().mapv(|x| -I * x * step / hbar);
    let forward = gauss_legendre_step(&z)?;
    let backward = gauss_legendre_step(&z.mapv(|x| -x))?;

    let mut psi = fields.psi.clone();
    let mut phi = fields.phi_bar.clone();
    let mut traj = Trajectory { times: vec![t0], fields: vec![fields.clone()] };
    for k in 1..=steps {
        psi = forward.dot(&psi);
        phi = phi.dot(&backward);
        if k % sample_every == 0 || k == steps {
            let fp = FieldPair { psi: psi.clone(), phi_bar: phi.clone() };
            if !fp.is_finite() {
                return Err(Error::NonFinite(format!("ODE state at t = {}", t0 + k as f64 * step)));
            }
            traj.times.push(t0 + k as f64 * step);
            traj.fields.push(fp);
        }
    }
    Ok(traj)
}

/// Propagator of `y' = (Z/dt) y` over one step: the (2,2) Padé form
/// `(I − Z/2 + Z²/12)⁻¹ (I + Z/2 + Z²/12)` taken by Gauss–Legendre on a
/// linear system.
fn gauss_legendre_step(z: &Array2<C64>) -> Result<Array2<C64>> {
    let n = z.nrows();
    let z2 = z.dot(z).mapv(|x| x / 12.0);
    let half = z.mapv(|x| x / 2.0);
    let eye = Array2::<C64>::eye(n);
    let num = &eye + &half + &z2;
    let den = &eye - &half + &z2;
    solve_matrix(&den, &num)
}

/// One row of a trajectory trace, in eigen-coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub c: Array1<C64>,
    pub c_bar: Array1<C64>,
    pub total_probability: C64,
    pub field_energy: C64,
    pub norm_sqr: f64,
}

impl TraceRow {
    pub fn from_state(state: &CanonicalState) -> Self {
        Self {
            t: state.time(),
            c: state.c().clone(),
            c_bar: state.c_bar().clone(),
            total_probability: state.total_probability(),
            field_energy: state.field_energy(),
            norm_sqr: state.fields().norm_sqr(),
        }
    }

    pub fn from_fields(t: f64, fields: &FieldPair, sys: &BiorthoSystem) -> Self {
        let (c, c_bar) = fields.project(sys);
        let field_energy = c
            .iter()
            .zip(c_bar.iter())
            .zip(sys.eigenvalues().iter())
            .map(|((a, b), e)| a * b * e)
            .sum();
        Self {
            t,
            total_probability: fields.total_probability(),
            field_energy,
            norm_sqr: fields.norm_sqr(),
            c,
            c_bar,
        }
    }

    /// CSV header: `t, re_c0, im_c0, …, re_cbar0, im_cbar0, …, re_prob,
    /// im_prob, re_energy, im_energy, norm_sq`.
    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for j in 0..n {
            h.push(format!("re_c{j}"));
            h.push(format!("im_c{j}"));
        }
        for j in 0..n {
            h.push(format!("re_cbar{j}"));
            h.push(format!("im_cbar{j}"));
        }
        h.extend(["re_prob", "im_prob", "re_energy", "im_energy", "norm_sq"].map(String::from));
        h
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        v.extend(self.c.iter().flat_map(|z| [z.re, z.im]));
        v.extend(self.c_bar.iter().flat_map(|z| [z.re, z.im]));
        v.extend([
            self.total_probability.re,
            self.total_probability.im,
            self.field_energy.re,
            self.field_energy.im,
            self.norm_sqr,
        ]);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biortho::{diagonalize_biortho, BiorthoOptions};
    use crate::builders::pt2x2;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn system(kappa: f64, gamma: f64) -> Arc<BiorthoSystem> {
        Arc::new(diagonalize_biortho(&pt2x2(kappa, gamma).unwrap(), &BiorthoOptions::default()).unwrap())
    }

    /// Right/left eigenvectors of the PT dimer for real E, written out by hand:
    /// a ∝ (κ, E − iγ), b ∝ (κ, E + iγ), brought to the library gauge.
    fn analytic_pair(kappa: f64, gamma: f64, e: f64) -> (Array1<C64>, Array1<C64>) {
        let a = array![c(kappa, 0.0), c(e, -gamma)];
        let na = (kappa * kappa + e * e + gamma * gamma).sqrt();
        let a = a.mapv(|z| z / na); // first component already real positive and maximal
        let b = array![c(kappa, 0.0), c(e, gamma)];
        let ov: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
        let b = b.mapv(|z| z / ov.conj());
        (a, b)
    }

    #[test]
    fn hermitian_single_mode_state() {
        let h = Hamiltonian::new(array![[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]]).unwrap();
        let sys = Arc::new(diagonalize_biortho(&h, &BiorthoOptions::default()).unwrap());
        let psi0 = sys.right(0).to_owned();
        let st = CanonicalState::from_right(sys, &psi0.view(), &Gauge::default(), &StateOptions::default()).unwrap();
        assert!((st.c()[0] - c(1., 0.)).norm() < 1e-14);
        assert!((st.c_bar()[0] - c(1., 0.)).norm() < 1e-14);
        assert_eq!(st.c()[1], c(0., 0.));
        assert_eq!(st.c_bar()[1], c(0., 0.));
    }

    #[test]
    fn pt_unbroken_two_mode_state() {
        let sys = system(1.0, 0.5);
        let e = 0.75f64.sqrt();
        let (a_minus, _) = analytic_pair(1.0, 0.5, -e);
        let (a_plus, _) = analytic_pair(1.0, 0.5, e);
        let psi0 = &a_minus + &a_plus;
        let raw = CanonicalState::from_right(
            sys.clone(),
            &psi0.view(),
            &Gauge::Uniform(1.0),
            &StateOptions { normalize: false, ..Default::default() },
        )
        .unwrap();
        for j in 0..2 {
            assert!((raw.c()[j] - c(1., 0.)).norm() < 1e-12);
            assert!((raw.c_bar()[j] - c(1., 0.)).norm() < 1e-12);
        }
        let st = CanonicalState::from_right(sys, &psi0.view(), &Gauge::Uniform(1.0), &StateOptions::default()).unwrap();
        assert!((st.total_probability() - c(1., 0.)).norm() < 1e-12);
        for n in st.occupations() {
            assert!((n - c(0.5, 0.)).norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_on_absent_mode_conflicts() {
        let sys = system(1.0, 0.5);
        let psi0 = sys.right(0).to_owned();
        let err = CanonicalState::from_right(sys, &psi0.view(), &Gauge::Explicit(vec![1.0, 1.0]), &StateOptions::default())
            .unwrap_err();
        assert_eq!(err, Error::GaugeConflict { mode: 1, value: 1.0 });
    }

    #[test]
    fn spectral_evolution_examples() {
        let sys = system(1.0, 0.5);
        let psi0 = (&sys.right(0) + &sys.right(1)).to_owned();
        let st = CanonicalState::from_right(sys, &psi0.view(), &Gauge::default(), &StateOptions::default()).unwrap();
        assert_eq!(st.evolve_spectral(0.0), st);

        // Single unit-energy mode, t = π: both coefficients flip sign.
        let h = Hamiltonian::new(array![[c(1., 0.)]]).unwrap();
        let one = Arc::new(diagonalize_biortho(&h, &BiorthoOptions::default()).unwrap());
        let st = CanonicalState::from_right(one, &array![c(1., 0.)].view(), &Gauge::default(), &StateOptions::default()).unwrap();
        let later = st.evolve_spectral(std::f64::consts::PI);
        assert!((later.c()[0] - c(-1., 0.)).norm() < 1e-14);
        assert!((later.c_bar()[0] - c(-1., 0.)).norm() < 1e-14);
        assert!((later.total_probability() - c(1., 0.)).norm() < 1e-14);
    }

    #[test]
    fn broken_mode_grows_and_partner_shrinks() {
        let sys = system(1.0, 2.0);
        let up = 1; // E = +i√3
        let psi0 = sys.right(up).to_owned();
        let st = CanonicalState::from_right(sys, &psi0.view(), &Gauge::default(), &StateOptions::default()).unwrap();
        let later = st.evolve_spectral(1.0);
        let g = 3f64.sqrt().exp();
        assert!((later.c()[up].norm() / st.c()[up].norm() - g).abs() < 1e-12 * g);
        assert!((later.c_bar()[up].norm() / st.c_bar()[up].norm() - 1.0 / g).abs() < 1e-14);
        assert!((g - 5.6522).abs() < 1e-4 && (1.0 / g - 0.17692).abs() < 1e-5);
        assert!((later.occupations()[up] - st.occupations()[up]).norm() < 1e-14);
    }

    #[test]
    fn probability_and_energy_examples() {
        let sys = system(1.0, 2.0);
        let psi0 = (&sys.right(0) + &sys.right(1)).to_owned();
        let st = CanonicalState::from_right(sys.clone(), &psi0.view(), &Gauge::Explicit(vec![2.0, 3.0]), &StateOptions { normalize: false, ..Default::default() }).unwrap();
        assert!((st.total_probability() - c(5., 0.)).norm() < 1e-12);
        let p0 = st.total_probability();
        assert!((st.evolve_spectral(7.0).total_probability() - p0).norm() < 1e-12);

        let mixed = CanonicalState::from_right(sys.clone(), &psi0.view(), &Gauge::default(), &StateOptions::default()).unwrap();
        assert!(mixed.field_energy().norm() < 1e-12);

        let empty = CanonicalState::from_right(sys, &Array1::zeros(2).view(), &Gauge::default(), &StateOptions::default()).unwrap();
        assert_eq!(empty.field_energy(), c(0., 0.));
        assert_eq!(empty.total_probability(), c(0., 0.));
    }

    #[test]
    fn local_probability_examples() {
        // Hermitian eigenstate: |ψ_k|².
        let h = Hamiltonian::new(array![[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]]).unwrap();
        let sys = Arc::new(diagonalize_biortho(&h, &BiorthoOptions::default()).unwrap());
        let st = CanonicalState::from_right(sys.clone(), &sys.right(1), &Gauge::default(), &StateOptions::default()).unwrap();
        let lp = st.fields().local_probability();
        for p in lp.iter() {
            assert!((p - c(0.5, 0.)).norm() < 1e-14);
        }

        // PT-unbroken eigenmode: site products (1 ± i tanθ)/2 with sinθ = γ/κ.
        let sys = system(1.0, 0.5);
        let e = 0.75f64.sqrt();
        let (a, b) = analytic_pair(1.0, 0.5, e);
        let st = CanonicalState::from_right(sys, &a.view(), &Gauge::default(), &StateOptions::default()).unwrap();
        let lp = st.fields().local_probability();
        for k in 0..2 {
            let oracle = b[k].conj() * a[k];
            assert!((lp[k] - oracle).norm() < 1e-12);
        }
        let t = (0.5f64).asin().tan();
        assert!((lp[0] - c(0.5, t / 2.0)).norm() < 1e-12);
        assert!((lp.sum() - c(1., 0.)).norm() < 1e-12);

        let zero = FieldPair::new(Array1::zeros(3), Array1::zeros(3)).unwrap();
        assert!(local_probability(&zero).iter().all(|z| *z == c(0., 0.)));
    }

    #[test]
    fn expectation_examples() {
        let sz = array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]];
        let up = FieldPair::from_right_conjugate(array![c(1., 0.), c(0., 0.)]);
        assert_eq!(expectation(&up, &sz).unwrap(), c(1., 0.));

        let sys = system(1.0, 0.5);
        let st = CanonicalState::from_right(sys, &(&sys_right(1.0, 0.5, 1)).view(), &Gauge::default(), &StateOptions::default()).unwrap();
        let f = st.fields();
        let id = Array2::<C64>::eye(2);
        assert!((f.expectation(&id).unwrap() - f.total_probability()).norm() < 1e-14);
        let h = pt2x2(1.0, 0.5).unwrap();
        assert!((f.expectation(h.matrix()).unwrap() - c(0.75f64.sqrt(), 0.)).norm() < 1e-12);
        assert!(matches!(f.expectation(&Array2::eye(3)), Err(Error::DimensionMismatch { .. })));
    }

    fn sys_right(kappa: f64, gamma: f64, j: usize) -> Array1<C64> {
        system(kappa, gamma).right(j).to_owned()
    }

    #[test]
    fn step_guard_fires() {
        let h = pt2x2(1.0, 2.0).unwrap();
        let f = FieldPair::from_right_conjugate(array![c(1., 0.), c(0., 0.)]);
        let dt = 0.2 / 3f64.sqrt();
        assert!(matches!(evolve_ode(&f, &h, (0.0, 1.0), dt, 1), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn hermitian_ode_conserves_norm() {
        let h = Hamiltonian::new(array![[c(0.3, 0.), c(1., -0.2)], [c(1., 0.2), c(-0.7, 0.)]]).unwrap();
        let psi = array![c(0.6, 0.), c(0., 0.8)];
        let f = FieldPair::from_right_conjugate(psi);
        let traj = evolve_ode(&f, &h, (0.0, 10.0), 1e-3, 100).unwrap();
        for fp in &traj.fields {
            assert!((fp.norm_sqr() - 1.0).abs() < 1e-8);
            // φ̄ stays equal to ψ†
            let diff = &fp.phi_bar - &fp.psi.mapv(|z| z.conj());
            assert!(norm(&diff.view()) < 1e-8);
        }
        assert!((traj.times.last().unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let sys = system(1.0, 0.5);
        let psi0 = (&sys.right(0) + &sys.right(1).mapv(|z| z * 0.3)).to_owned();
        let st = CanonicalState::from_right(sys, &psi0.view(), &Gauge::default(), &StateOptions::default())
            .unwrap()
            .evolve_spectral(0.7);
        let text = serde_json::to_string(&st.to_json()).unwrap();
        let back: StateJson = serde_json::from_str(&text).unwrap();
        assert_eq!(CanonicalState::from_json(&back).unwrap(), st);
    }

    #[test]
    fn trace_header_matches_values() {
        let sys = system(1.0, 0.5);
        let st = CanonicalState::from_right(sys, &sys_right(1.0, 0.5, 0).view(), &Gauge::default(), &StateOptions::default()).unwrap();
        let row = TraceRow::from_state(&st);
        assert_eq!(TraceRow::header(2).len(), row.values().len());
    }
}

//! Complex Berry connections, curvatures and loop phases of biorthogonal
//! eigenstates, adiabatic transport along parameter loops, and canonical
//! action variables.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::biortho::{diagonalize_biortho, BiorthoOptions, BiorthoSystem};
use crate::builders::HamiltonianBuilder;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::{braket, expm, frobenius, norm, C64, I};

/// Continuation refuses a step larger than this fraction of the local gap.
pub const TRACKING_FRACTION: f64 = 0.4;
/// Upper bound on `ħ max‖dh/dt‖ / min gap²` accepted by [`adiabatic_evolve`].
pub const ADIABATICITY_LIMIT: f64 = 0.1;
/// Relative endpoint mismatch tolerated by [`action_variables`].
pub const CLOSURE_TOL: f64 = 1e-6;

const CLOSE_TOL: f64 = 1e-12;

/// An ordered list of points in the parameter space of a Hamiltonian family.
#[derive(Debug, Clone)]
pub struct ParameterPath {
    builder: Arc<dyn HamiltonianBuilder>,
    samples: Vec<Vec<f64>>,
    closed: bool,
}

impl ParameterPath {
    pub fn new(builder: Arc<dyn HamiltonianBuilder>, samples: Vec<Vec<f64>>, closed: bool) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput("a path needs at least two samples".into()));
        }
        for r in &samples {
            builder.check_dim(r)?;
        }
        for (k, w) in samples.windows(2).enumerate() {
            if distance(&w[0], &w[1]) == 0.0 {
                return Err(Error::InvalidInput(format!("path samples {k} and {} coincide", k + 1)));
            }
        }
        if closed {
            let gap = distance(&samples[0], samples.last().unwrap());
            if gap > CLOSE_TOL {
                return Err(Error::InvalidInput(format!(
                    "closed path must end where it starts (gap {gap:.3e})"
                )));
            }
        }
        Ok(Self { builder, samples, closed })
    }

    /// `n` segments around the circle `center + radius (cos φ u + sin φ v)`,
    /// traversed with increasing `φ` from `φ = 0`.
    pub fn circle(
        builder: Arc<dyn HamiltonianBuilder>,
        center: &[f64],
        radius: f64,
        u: &[f64],
        v: &[f64],
        n: usize,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput("a circle needs at least 3 segments".into()));
        }
        let mut samples: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / n as f64;
                (0..center.len())
                    .map(|i| center[i] + radius * (phi.cos() * u[i] + phi.sin() * v[i]))
                    .collect()
            })
            .collect();
        samples.push(samples[0].clone());
        Self::new(builder, samples, true)
    }

    /// Circle of constant polar angle `theta` on the sphere of radius `r`
    /// in a 3-parameter space, counterclockwise seen from `+z`.
    pub fn polar_circle(builder: Arc<dyn HamiltonianBuilder>, r: f64, theta: f64, n: usize) -> Result<Self> {
        Self::circle(
            builder,
            &[0.0, 0.0, r * theta.cos()],
            r * theta.sin(),
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            n,
        )
    }

    /// Closed polygon through `vertices` with `per_edge` segments per edge.
    pub fn polygon(builder: Arc<dyn HamiltonianBuilder>, vertices: &[Vec<f64>], per_edge: usize) -> Result<Self> {
        let per_edge = per_edge.max(1);
        let mut samples = Vec::with_capacity(vertices.len() * per_edge + 1);
        for (k, a) in vertices.iter().enumerate() {
            let b = &vertices[(k + 1) % vertices.len()];
            for s in 0..per_edge {
                let t = s as f64 / per_edge as f64;
                samples.push(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect());
            }
        }
        samples.push(vertices[0].clone());
        Self::new(builder, samples, true)
    }

    /// Out along `points` and back along the same points.
    pub fn retraced(builder: Arc<dyn HamiltonianBuilder>, points: &[Vec<f64>]) -> Result<Self> {
        let mut samples = points.to_vec();
        samples.extend(points.iter().rev().skip(1).cloned());
        Self::new(builder, samples, true)
    }

    pub fn builder(&self) -> &Arc<dyn HamiltonianBuilder> {
        &self.builder
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn segments(&self) -> usize {
        self.samples.len() - 1
    }

    /// Point at fraction `s ∈ [0, 1]` of the path, with uniform parameter
    /// time per segment.
    pub fn point_at(&self, s: f64) -> Vec<f64> {
        let m = self.segments();
        let x = (s.clamp(0.0, 1.0) * m as f64).min(m as f64);
        let k = (x.floor() as usize).min(m - 1);
        let t = x - k as f64;
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    }

    fn build(&self, r: &[f64]) -> Result<Hamiltonian> {
        self.builder.build(r)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Result of a loop phase computation or an adiabatic transport.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub mode_index: usize,
    /// `−∫E_j dt/ħ`; absent for purely geometric computations.
    #[serde(serialize_with = "crate::io::ser_opt_complex")]
    pub dynamical_phase: Option<C64>,
    #[serde(serialize_with = "crate::io::ser_complex")]
    pub geometric_phase_right: C64,
    #[serde(serialize_with = "crate::io::ser_complex")]
    pub geometric_phase_left: C64,
    /// `c̄_j c_j` after the loop; absent for purely geometric computations.
    #[serde(serialize_with = "crate::io::ser_opt_complex")]
    pub loop_occupation: Option<C64>,
    pub adiabaticity_ratio: Option<f64>,
    /// Largest `|⟨b_k|ψ⟩|` over the other modes at the end of the loop.
    pub leakage: Option<f64>,
}

/// Eigen-data of one tracked mode at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFrame {
    pub energy: C64,
    pub right: Array1<C64>,
    pub left: Array1<C64>,
    pub gap: f64,
}

fn frame(sys: &BiorthoSystem, j: usize) -> ModeFrame {
    ModeFrame {
        energy: sys.eigenvalue(j),
        right: sys.right(j).to_owned(),
        left: sys.left(j).to_owned(),
        gap: sys.gap(j),
    }
}

/// Index in `sys` continuing a mode whose previous eigenvalue was `prev`.
fn continue_mode(sys: &BiorthoSystem, prev: C64, step: usize) -> Result<usize> {
    let k = sys.closest_mode(prev);
    let jump = (sys.eigenvalue(k) - prev).norm();
    let gap = sys.gap(k);
    if jump > TRACKING_FRACTION * gap {
        return Err(Error::ModeTrackingLost {
            step,
            reason: format!(
                "eigenvalue moved by {jump:.3e}, more than {TRACKING_FRACTION} of the local gap {gap:.3e}"
            ),
        });
    }
    Ok(k)
}

/// Follow mode `j` (index at the first sample) along the path by
/// nearest-eigenvalue continuation. For closed paths the last frame is the
/// first one, and the mode must come back to itself.
pub fn track_mode(path: &ParameterPath, j: usize, opts: &BiorthoOptions) -> Result<Vec<ModeFrame>> {
    let first = diagonalize_biortho(&path.build(&path.samples[0])?, opts)?;
    if j >= first.dim() {
        return Err(Error::InvalidInput(format!("mode {j} out of range for dimension {}", first.dim())));
    }
    let mut frames = vec![frame(&first, j)];
    let n = path.samples.len();
    let last = if path.closed { n - 1 } else { n };
    for step in 1..last {
        let sys = diagonalize_biortho(&path.build(&path.samples[step])?, opts)?;
        let k = continue_mode(&sys, frames[step - 1].energy, step)?;
        frames.push(frame(&sys, k));
    }
    if path.closed {
        let k = continue_mode(&first, frames[n - 2].energy, n - 1)?;
        if k != j {
            return Err(Error::ModeTrackingLost {
                step: n - 1,
                reason: format!("mode {j} returns as mode {k} after one loop"),
            });
        }
        frames.push(frames[0].clone());
    }
    Ok(frames)
}

/// Loop phases `(β, β̄)` from right and left eigenvectors sampled around a
/// closed loop (`right[0] = right[N]` up to gauge).
///
/// With `M_k = ⟨b_k|a_{k+1}⟩` and `M'_k = ⟨b_{k+1}|a_k⟩`,
/// `Im β = ½ Σ ln(|M_k| / |M'_k|)` and
/// `Re β = −Σ (arg M_k − ½ arg M_k M'_k)` modulo `2π`, reported in `(−π, π]`.
/// `β̄` is the same construction with `a` and `b` exchanged.
pub fn loop_phases(right: &[Array1<C64>], left: &[Array1<C64>]) -> Result<(C64, C64)> {
    if right.len() != left.len() || right.len() < 2 {
        return Err(Error::InvalidInput("need matching right/left samples around a loop".into()));
    }
    let forward = |a: &[Array1<C64>], b: &[Array1<C64>]| -> Result<C64> {
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..a.len() - 1 {
            let m = braket(&b[k].view(), &a[k + 1].view());
            let mp = braket(&b[k + 1].view(), &a[k].view());
            let prod = m * mp;
            if prod.norm() < 1e-12 || prod.re < 0.5 {
                return Err(Error::BranchJump { step: k, phase: prod.arg() });
            }
            im += 0.5 * (m.norm().ln() - mp.norm().ln());
            re -= m.arg() - 0.5 * prod.arg();
        }
        Ok(C64::new(wrap(re), im))
    };
    Ok((forward(right, left)?, forward(left, right)?))
}

/// Wrap an angle into `(−π, π]`.
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Geometric phases `β_j` and `β̄_j` around a closed path.
pub fn geometric_phase_loop(path: &ParameterPath, j: usize, opts: &BiorthoOptions) -> Result<PhaseReport> {
    if !path.closed {
        return Err(Error::InvalidInput("geometric phase needs a closed path".into()));
    }
    let frames = track_mode(path, j, opts)?;
    let right: Vec<_> = frames.iter().map(|f| f.right.clone()).collect();
    let left: Vec<_> = frames.iter().map(|f| f.left.clone()).collect();
    let (beta, beta_bar) = loop_phases(&right, &left)?;
    Ok(PhaseReport {
        mode_index: j,
        dynamical_phase: None,
        geometric_phase_right: beta,
        geometric_phase_left: beta_bar,
        loop_occupation: None,
        adiabaticity_ratio: None,
        leakage: None,
    })
}

/// Default finite-difference step at `r`: `1e−5 · max(1, max|r_μ|)`.
pub fn default_delta(r: &[f64]) -> f64 {
    1e-5 * r.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

/// Mode `j` at `r` with gradients of its right and left eigenvectors, in the
/// gauge fixed at `r` and carried smoothly to the stencil points.
struct Stencil {
    frame: ModeFrame,
    d_right: Vec<Array1<C64>>,
    d_left: Vec<Array1<C64>>,
}

fn stencil(
    builder: &dyn HamiltonianBuilder,
    r: &[f64],
    j: usize,
    delta: Option<f64>,
    opts: &BiorthoOptions,
) -> Result<Stencil> {
    builder.check_dim(r)?;
    let delta = delta.unwrap_or_else(|| default_delta(r));
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("finite-difference delta must be > 0, got {delta}")));
    }
    let center = diagonalize_biortho(&builder.build(r)?, opts)?;
    if j >= center.dim() {
        return Err(Error::InvalidInput(format!("mode {j} out of range for dimension {}", center.dim())));
    }
    let frame = frame(&center, j);
    let pivot = crate::biortho::gauge_pivot(&frame.right.view());
    let aligned = |shift: f64, mu: usize| -> Result<(Array1<C64>, Array1<C64>)> {
        let mut p = r.to_vec();
        p[mu] += shift;
        let sys = diagonalize_biortho(&builder.build(&p)?, opts)?;
        let k = continue_mode(&sys, frame.energy, mu)?;
        let mut a = sys.right(k).to_owned();
        let mut b = sys.left(k).to_owned();
        let f = crate::biortho::fix_gauge(&mut a, pivot);
        // keep ⟨b|a⟩ = 1
        let g = f.conj().inv();
        b.mapv_inplace(|z| z * g);
        Ok((a, b))
    };
    let mut d_right = Vec::with_capacity(r.len());
    let mut d_left = Vec::with_capacity(r.len());
    for mu in 0..r.len() {
        let (ap, bp) = aligned(delta, mu)?;
        let (am, bm) = aligned(-delta, mu)?;
        let s = 1.0 / (2.0 * delta);
        d_right.push((ap - am).mapv(|z| z * s));
        d_left.push((bp - bm).mapv(|z| z * s));
    }
    Ok(Stencil { frame, d_right, d_left })
}

/// `A_j(R) = i⟨b_j|∂_R a_j⟩` by central differences (`delta` defaults to
/// [`default_delta`]).
pub fn berry_connection_right(
    builder: &dyn HamiltonianBuilder,
    r: &[f64],
    j: usize,
    delta: Option<f64>,
) -> Result<Array1<C64>> {
    let s = stencil(builder, r, j, delta, &BiorthoOptions::default())?;
    Ok(s.d_right.iter().map(|d| I * braket(&s.frame.left.view(), &d.view())).collect())
}

/// `Ā_j(R) = i⟨a_j|∂_R b_j⟩`; equals `A_j*` because `⟨b_j|a_j⟩ = 1`.
pub fn berry_connection_left(
    builder: &dyn HamiltonianBuilder,
    r: &[f64],
    j: usize,
    delta: Option<f64>,
) -> Result<Array1<C64>> {
    let s = stencil(builder, r, j, delta, &BiorthoOptions::default())?;
    Ok(s.d_left.iter().map(|d| I * braket(&s.frame.right.view(), &d.view())).collect())
}

/// `B_j = i⟨∇b_j| × |∇a_j⟩` for a three-parameter family.
pub fn berry_curvature(
    builder: &dyn HamiltonianBuilder,
    r: &[f64],
    j: usize,
    delta: Option<f64>,
) -> Result<Array1<C64>> {
    if r.len() != 3 {
        return Err(Error::DimensionError { expected: 3, found: r.len() });
    }
    let s = stencil(builder, r, j, delta, &BiorthoOptions::default())?;
    let g = |mu: usize, nu: usize| braket(&s.d_left[mu].view(), &s.d_right[nu].view());
    Ok(ndarray::array![
        I * (g(1, 2) - g(2, 1)),
        I * (g(2, 0) - g(0, 2)),
        I * (g(0, 1) - g(1, 0)),
    ])
}

/// One row of the per-sample trace written by [`adiabatic_evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub energy: C64,
    /// `⟨b_j(R(t))|ψ(t)⟩ e^{−iθ(t)}` and `⟨φ̄(t)|a_j(R(t))⟩ e^{iθ(t)}` in
    /// the canonical gauge, i.e. the coefficients with the dynamical factor
    /// removed. Their product is `c̄c`.
    pub c: C64,
    pub c_bar: C64,
    pub dynamical_phase: C64,
}

/// Outcome of [`adiabatic_evolve`]: the phase report and a per-sample trace.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticRun {
    pub report: PhaseReport,
    pub trace: Vec<AdiabaticSample>,
}

/// Transport mode `j` once around a closed path in time `total_time`.
///
/// `ψ` and `φ̄` start as `a_j(R_0)` and `b_j(R_0)†` and are propagated by a
/// fourth-order Magnus scheme through `h(R(t))`, with `R(t)` linear on each
/// segment and every segment taking the same time. At the end
/// `c = ⟨b_j|ψ⟩ = e^{iθ} e^{iβ}` and `c̄* = e^{iθ*} e^{iβ̄}` with
/// `θ = −∫E_j dt/ħ`.
///
/// `ψ` and `φ̄` are rescaled oppositely after every step and the scale is
/// carried separately, so complex energies do not overflow the state.
pub fn adiabatic_evolve(
    path: &ParameterPath,
    j: usize,
    total_time: f64,
    dt: f64,
    opts: &BiorthoOptions,
) -> Result<AdiabaticRun> {
    if !path.closed {
        return Err(Error::InvalidInput("adiabatic transport needs a closed path".into()));
    }
    if !(total_time > 0.0 && dt > 0.0 && total_time.is_finite() && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need total_time > 0 and dt > 0, got {total_time} and {dt}"
        )));
    }
    let frames = track_mode(path, j, opts)?;
    let hs = path
        .samples
        .iter()
        .map(|r| path.build(r))
        .collect::<Result<Vec<_>>>()?;
    let hbar = hs[0].hbar();
    let segments = path.segments();
    let seg_time = total_time / segments as f64;

    let min_gap = frames.iter().map(|f| f.gap).fold(f64::INFINITY, f64::min);
    let max_rate = hs
        .windows(2)
        .map(|w| frobenius(&(w[1].matrix() - w[0].matrix()).view()) / seg_time)
        .fold(0.0, f64::max);
    let ratio = hbar * max_rate / (min_gap * min_gap);
    if !(ratio < ADIABATICITY_LIMIT) {
        return Err(Error::AdiabaticityViolated { ratio, limit: ADIABATICITY_LIMIT });
    }

    let steps = ((seg_time / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = seg_time / steps as f64;
    let (g1, g2) = (0.5 - 3f64.sqrt() / 6.0, 0.5 + 3f64.sqrt() / 6.0);

    let a0 = frames[0].right.clone();
    let b0 = frames[0].left.clone();
    let mut psi = a0.clone();
    let mut phi = b0.mapv(|z| z.conj());
    let mut dyn_phase = C64::new(0.0, 0.0);
    // true ψ = e^{log_scale} ψ, true φ̄ = e^{−log_scale} φ̄
    let mut log_scale = 0.0f64;
    let mut energy = frames[0].energy;
    let mut trace = vec![AdiabaticSample {
        t: 0.0,
        point: path.samples[0].clone(),
        energy,
        c: C64::new(1.0, 0.0),
        c_bar: C64::new(1.0, 0.0),
        dynamical_phase: dyn_phase,
    }];

    for seg in 0..segments {
        let (ra, rb) = (&path.samples[seg], &path.samples[seg + 1]);
        let at = |s: f64| -> Vec<f64> { ra.iter().zip(rb).map(|(x, y)| x + s * (y - x)).collect() };
        for n in 0..steps {
            let s1 = (n as f64 + g1) / steps as f64;
            let s2 = (n as f64 + g2) / steps as f64;
            let h1 = path.build(&at(s1))?;
            let h2 = path.build(&at(s2))?;
            let (m1, m2) = (h1.matrix(), h2.matrix());
            let comm = m2.dot(m1) - m1.dot(m2);
            let omega: Array2<C64> = (m1 + m2).mapv(|z| -I * z * (h / (2.0 * hbar)))
                - comm.mapv(|z| z * (3f64.sqrt() / 12.0) * (h * h / (hbar * hbar)));
            let u = expm(&omega)?;
            let u_inv = expm(&omega.mapv(|z| -z))?;
            psi = u.dot(&psi);
            phi = phi.dot(&u_inv);
            let s = norm(&psi.view());
            if s > 0.0 && s.is_finite() {
                psi.mapv_inplace(|z| z / s);
                phi.mapv_inplace(|z| z * s);
                log_scale += s.ln();
            }

            let mut e_gauss = [C64::new(0.0, 0.0); 2];
            for (slot, hm) in [&h1, &h2].into_iter().enumerate() {
                let sys = diagonalize_biortho(hm, opts)?;
                let k = continue_mode(&sys, energy, seg)?;
                energy = sys.eigenvalue(k);
                e_gauss[slot] = energy;
            }
            dyn_phase -= (e_gauss[0] + e_gauss[1]) * (h / (2.0 * hbar));
        }
        if psi.iter().chain(phi.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(format!("adiabatic state after segment {seg}")));
        }
        let f = &frames[seg + 1];
        energy = f.energy;
        trace.push(AdiabaticSample {
            t: (seg + 1) as f64 * seg_time,
            point: rb.clone(),
            energy: f.energy,
            c: braket(&f.left.view(), &psi.view()) * (C64::from(log_scale) - I * dyn_phase).exp(),
            c_bar: phi.dot(&f.right) * (I * dyn_phase - log_scale).exp(),
            dynamical_phase: dyn_phase,
        });
    }

    let c = braket(&b0.view(), &psi.view());
    let c_bar = phi.dot(&a0);
    let beta = -I * (c * (C64::from(log_scale) - I * dyn_phase).exp()).ln();
    let beta_bar = -I * (c_bar.conj() * (-I * dyn_phase.conj() - log_scale).exp()).ln();

    let sys0 = diagonalize_biortho(&hs[0], opts)?;
    let coeffs = sys0.project(&psi.view());
    let own = sys0.closest_mode(frames[0].energy);
    let leakage = coeffs
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != own)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max)
        / coeffs[own].norm();

    Ok(AdiabaticRun {
        report: PhaseReport {
            mode_index: j,
            dynamical_phase: Some(dyn_phase),
            geometric_phase_right: beta,
            geometric_phase_left: beta_bar,
            loop_occupation: Some(c_bar * c),
            adiabaticity_ratio: Some(ratio),
            leakage: Some(leakage),
        },
        trace,
    })
}

/// Canonical actions `I_k = (iħ/2π) ∮ φ̄_k dψ_k` of a trajectory sampled
/// over one closed period, by trapezoidal quadrature.
pub fn action_variables(trajectory: &Trajectory, hbar: f64) -> Result<Vec<C64>> {
    let n = trajectory.fields.first().map_or(0, |f| f.dim());
    (0..n).map(|k| action_variable(trajectory, k, hbar)).collect()
}

/// Action of component `k` alone; only that component has to close.
pub fn action_variable(trajectory: &Trajectory, k: usize, hbar: f64) -> Result<C64> {
    let fields = &trajectory.fields;
    if fields.len() < 2 {
        return Err(Error::InvalidInput("need at least two trajectory samples".into()));
    }
    if k >= fields[0].dim() {
        return Err(Error::InvalidInput(format!("component {k} out of range")));
    }
    let first = &fields[0];
    let last = fields.last().unwrap();
    let scale = fields
        .iter()
        .map(|f| f.psi[k].norm().max(f.phi_bar[k].norm()))
        .fold(1.0f64, f64::max);
    let mismatch = (last.psi[k] - first.psi[k]).norm().max((last.phi_bar[k] - first.phi_bar[k]).norm());
    if mismatch > CLOSURE_TOL * scale {
        return Err(Error::NotClosed { component: k, mismatch });
    }
    let sum: C64 = fields
        .windows(2)
        .map(|w| (w[0].phi_bar[k] + w[1].phi_bar[k]) * 0.5 * (w[1].psi[k] - w[0].psi[k]))
        .sum();
    Ok(I * hbar / (2.0 * PI) * sum)
}

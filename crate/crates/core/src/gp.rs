//! Stationary non-Hermitian Gross–Pitaevskii problem on a 1D grid.
//!
//! The right field `ψ` and the conjugate field `φ̄` are found together by a
//! damped fixed-point loop: build `ĥ[φ̄ψ]`, diagonalize it biorthogonally,
//! pick the target eigenpair, rebuild `(ψ, φ̄)` from it and mix.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::biortho::{diagonalize_biortho, BiorthoOptions};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::io::{read_csv, ser_complex};
use crate::linalg::{braket, C64, I};

pub const MIN_POINTS: usize = 16;
/// Smallest gap to the nearest other eigenvalue tolerated for the target mode.
pub const COLLAPSE_GAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Uniform grid on `[x_min, x_max]`. Dirichlet grids include both
/// endpoints; periodic grids omit `x_max`, which is identified with `x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    n_points: usize,
    x_min: f64,
    x_max: f64,
    boundary: Boundary,
}

impl Grid1D {
    pub fn new(n_points: usize, x_min: f64, x_max: f64, boundary: Boundary) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::InvalidInput(format!("grid needs at least {MIN_POINTS} points, got {n_points}")));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidInput(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
        }
        Ok(Self { n_points, x_min, x_max, boundary })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn spacing(&self) -> f64 {
        let cells = match self.boundary {
            Boundary::Dirichlet => self.n_points - 1,
            Boundary::Periodic => self.n_points,
        };
        (self.x_max - self.x_min) / cells as f64
    }

    pub fn points(&self) -> Array1<f64> {
        let dx = self.spacing();
        Array1::from_shape_fn(self.n_points, |k| self.x_min + k as f64 * dx)
    }

    /// `∫ f dx ≈ dx Σ_k f_k`.
    pub fn integrate(&self, f: &Array1<C64>) -> C64 {
        f.sum() * self.spacing()
    }

    /// `√(∫|f|² dx)`.
    pub fn l2_norm(&self, f: &Array1<C64>) -> f64 {
        (f.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spacing()).sqrt()
    }
}

/// Mass and `ħ` entering the kinetic term `−ħ²/2m ∂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kinetic {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Kinetic {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

/// External potentials on the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `m ω² (x − x0)² / 2`.
    Harmonic { omega: f64, mass: f64, x0: f64 },
    /// `m ω² x² / 2 + i γ x exp(−x²/2w²)`.
    ComplexWell { omega: f64, mass: f64, gamma: f64, width: f64 },
    /// Tabulated `(x, V)` samples, interpolated linearly.
    Table { x: Vec<f64>, v: Vec<C64> },
}

impl Potential {
    /// Tabulated potential from CSV columns `x, re, im`.
    pub fn from_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let (header, rows) = read_csv(input)?;
        if header.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "potential CSV needs 3 columns (x, Re V, Im V), got {}",
                header.len()
            )));
        }
        let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        if x.len() < 2 || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("potential CSV needs ≥ 2 rows with increasing x".into()));
        }
        let v = rows.iter().map(|r| C64::new(r[1], r[2])).collect();
        Ok(Potential::Table { x, v })
    }

    pub fn value(&self, x: f64) -> Result<C64> {
        Ok(match self {
            Potential::Harmonic { omega, mass, x0 } => C64::new(0.5 * mass * omega * omega * (x - x0).powi(2), 0.0),
            Potential::ComplexWell { omega, mass, gamma, width } => C64::new(
                0.5 * mass * omega * omega * x * x,
                gamma * x * (-x * x / (2.0 * width * width)).exp(),
            ),
            Potential::Table { x: xs, v } => {
                let tol = 1e-9 * (xs[xs.len() - 1] - xs[0]);
                if x < xs[0] - tol || x > xs[xs.len() - 1] + tol {
                    return Err(Error::InvalidInput(format!(
                        "x = {x} outside tabulated potential [{}, {}]",
                        xs[0],
                        xs[xs.len() - 1]
                    )));
                }
                let k = xs.partition_point(|&p| p <= x).clamp(1, xs.len() - 1);
                let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                v[k - 1] + (v[k] - v[k - 1]) * t
            }
        })
    }

    pub fn sample(&self, grid: &Grid1D) -> Result<Array1<C64>> {
        grid.points().iter().map(|&x| self.value(x)).collect::<Result<Vec<_>>>().map(Array1::from)
    }
}

/// `−ħ²/2m ∂² + V + c·density` with the three-point Laplacian.
pub fn build_gp_operator(
    grid: &Grid1D,
    kinetic: Kinetic,
    v: &Array1<C64>,
    c: C64,
    density: &Array1<C64>,
) -> Result<Hamiltonian> {
    let n = grid.n_points();
    for len in [v.len(), density.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let dx = grid.spacing();
    let t = kinetic.hbar * kinetic.hbar / (2.0 * kinetic.mass * dx * dx);
    let mut m = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        m[[k, k]] = C64::new(2.0 * t, 0.0) + v[k] + c * density[k];
        if k + 1 < n {
            m[[k, k + 1]] = C64::new(-t, 0.0);
            m[[k + 1, k]] = C64::new(-t, 0.0);
        }
    }
    if grid.boundary() == Boundary::Periodic {
        m[[0, n - 1]] += C64::new(-t, 0.0);
        m[[n - 1, 0]] += C64::new(-t, 0.0);
    }
    Hamiltonian::with_hbar(m, kinetic.hbar)
}

/// Which eigenpair the iteration follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeSelection {
    /// Smallest real part on the first iteration, then the eigenvalue
    /// closest to the previous `μ`.
    Lowest,
    /// Closest to the given value on the first iteration, then to the
    /// previous `μ`.
    Nearest(C64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpOptions {
    pub selection: ModeSelection,
    /// Gauge constant `g`: fixes `∫|ψ|² dx = g` while `∫φ̄ψ dx = 1`.
    pub gauge: f64,
    pub mix: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub biortho: BiorthoOptions,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            selection: ModeSelection::Lowest,
            gauge: 1.0,
            mix: 0.3,
            tol: 1e-10,
            max_iter: 500,
            biortho: BiorthoOptions::default(),
        }
    }
}

/// Grid, kinetic constants, sampled potential and coupling `c = Nλ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpProblem {
    pub grid: Grid1D,
    pub kinetic: Kinetic,
    pub v: Array1<C64>,
    pub c: C64,
}

impl GpProblem {
    pub fn new(grid: Grid1D, kinetic: Kinetic, potential: &Potential, c: C64) -> Result<Self> {
        Ok(Self { v: potential.sample(&grid)?, grid, kinetic, c })
    }

    pub fn operator(&self, density: &Array1<C64>) -> Result<Hamiltonian> {
        build_gp_operator(&self.grid, self.kinetic, &self.v, self.c, density)
    }
}

/// A self-consistent pair `(ψ, φ̄)` with `ĥ[φ̄ψ]ψ = μψ`, `φ̄ĥ[φ̄ψ] = μφ̄`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GPSolution {
    #[serde(skip)]
    pub psi: Array1<C64>,
    #[serde(skip)]
    pub phi_bar: Array1<C64>,
    #[serde(serialize_with = "ser_complex")]
    pub mu: C64,
    pub residual: f64,
    pub iterations: usize,
    pub gauge: Vec<f64>,
    /// Relative distance between `φ̄` and the one regenerated from `ψ`.
    pub fixed_point_defect: f64,
}

impl GPSolution {
    pub fn density(&self) -> Array1<C64> {
        &self.phi_bar * &self.psi
    }

    pub fn csv_header() -> Vec<String> {
        ["x", "re_psi", "im_psi", "re_phibar", "im_phibar", "re_density", "im_density"]
            .map(String::from)
            .to_vec()
    }

    pub fn csv_rows(&self, grid: &Grid1D) -> Vec<Vec<f64>> {
        let rho = self.density();
        grid.points()
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                vec![x, self.psi[k].re, self.psi[k].im, self.phi_bar[k].re, self.phi_bar[k].im, rho[k].re, rho[k].im]
            })
            .collect()
    }
}

struct Pick {
    mu: C64,
    right: Array1<C64>,
    left: Array1<C64>,
}

fn pick(problem: &GpProblem, density: &Array1<C64>, target: Option<C64>, opts: &GpOptions) -> Result<Pick> {
    let sys = diagonalize_biortho(&problem.operator(density)?, &opts.biortho)?;
    let j = match target {
        Some(t) => sys.closest_mode(t),
        None => (0..sys.dim())
            .min_by(|&a, &b| sys.eigenvalue(a).re.total_cmp(&sys.eigenvalue(b).re))
            .unwrap_or(0),
    };
    let gap = sys.gap(j);
    if gap < COLLAPSE_GAP {
        return Err(Error::ModeCollapse { gap });
    }
    Ok(Pick { mu: sys.eigenvalue(j), right: sys.right(j).to_owned(), left: sys.left(j).to_owned() })
}

/// `(ψ, φ̄)` from an eigenpair: `ψ = c' a` with `∫|ψ|² = g` and the phase of
/// `⟨b|reference⟩`, `φ̄ = c̄' b†` with `∫φ̄ψ = 1`.
fn from_eigenpair(p: &Pick, reference: Option<&Array1<C64>>, g: f64, dx: f64) -> (Array1<C64>, Array1<C64>) {
    let phase = reference
        .map(|r| braket(&p.left.view(), &r.view()))
        .filter(|z| z.norm() > 0.0)
        .map(|z| z / z.norm())
        .unwrap_or(C64::new(1.0, 0.0));
    let an = p.right.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let c = phase * (g / dx).sqrt() / an;
    let c_bar = 1.0 / (dx * c);
    (p.right.mapv(|z| z * c), p.left.mapv(|z| z.conj() * c_bar))
}

/// Rescale so that `∫|ψ|² = g` and `∫φ̄ψ = 1`.
fn renormalize(grid: &Grid1D, psi: &mut Array1<C64>, phi: &mut Array1<C64>, g: f64) {
    let s = (g.sqrt()) / grid.l2_norm(psi);
    psi.mapv_inplace(|z| z * s);
    let p = grid.integrate(&(&*phi * &*psi));
    phi.mapv_inplace(|z| z / p);
}

fn relative(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

/// `φ̄` regenerated from `ψ`: target left eigenvector of `ĥ[φ̄ψ]` scaled so
/// that `∫φ̄ψ = 1`.
pub fn regenerate_left(
    problem: &GpProblem,
    psi: &Array1<C64>,
    phi_bar: &Array1<C64>,
    mu: C64,
    opts: &GpOptions,
) -> Result<(C64, Array1<C64>)> {
    let p = pick(problem, &(phi_bar * psi), Some(mu), opts)?;
    let dx = problem.grid.spacing();
    let ov = braket(&p.left.view(), &psi.view());
    if ov.norm() == 0.0 {
        return Err(Error::NonFinite("ψ has no component along the target mode".into()));
    }
    Ok((p.mu, p.left.mapv(|z| z.conj() / (dx * ov))))
}

/// Damped self-consistent iteration for the target eigenpair of `ĥ[φ̄ψ]`.
pub fn solve_self_consistent(problem: &GpProblem, opts: &GpOptions) -> Result<GPSolution> {
    if !(opts.mix > 0.0 && opts.mix <= 1.0) {
        return Err(Error::InvalidInput(format!("mix must lie in (0, 1], got {}", opts.mix)));
    }
    if !(opts.gauge > 0.0 && opts.gauge.is_finite()) {
        return Err(Error::InvalidInput(format!("gauge must be > 0, got {}", opts.gauge)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {}", opts.tol)));
    }
    let grid = &problem.grid;
    let dx = grid.spacing();
    let g = opts.gauge;
    let first_target = match opts.selection {
        ModeSelection::Lowest => None,
        ModeSelection::Nearest(t) => Some(t),
    };

    let zero = Array1::<C64>::zeros(grid.n_points());
    let start = pick(problem, &zero, first_target, opts)?;
    let mut mu = start.mu;
    let (mut psi, mut phi) = from_eigenpair(&start, None, g, dx);
    let mut change = f64::INFINITY;

    for it in 1..=opts.max_iter {
        let p = pick(problem, &(&phi * &psi), Some(mu), opts)?;
        mu = p.mu;
        let (psi_p, phi_p) = from_eigenpair(&p, Some(&psi), g, dx);
        let mut psi_new = psi.mapv(|z| z * (1.0 - opts.mix)) + psi_p.mapv(|z| z * opts.mix);
        let mut phi_new = phi.mapv(|z| z * (1.0 - opts.mix)) + phi_p.mapv(|z| z * opts.mix);
        renormalize(grid, &mut psi_new, &mut phi_new, g);
        change = relative(&psi_new, &psi);
        psi = psi_new;
        phi = phi_new;
        if !psi.iter().chain(phi.iter()).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite(format!("GP iterate {it}")));
        }
        if change < opts.tol {
            let (mu_final, regen) = regenerate_left(problem, &psi, &phi, mu, opts)?;
            let defect = relative(&regen, &phi);
            if defect < opts.tol {
                let mut sol = GPSolution {
                    psi,
                    phi_bar: phi,
                    mu: mu_final,
                    residual: 0.0,
                    iterations: it,
                    gauge: vec![g],
                    fixed_point_defect: defect,
                };
                sol.residual = gp_residual(&sol, problem)?;
                return Ok(sol);
            }
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, change })
}

/// `‖ĥψ − μψ‖ + ‖φ̄ĥ − μφ̄‖` with `ĥ = ĥ'[V] + c·φ̄ψ`, both in the grid
/// `L²` norm.
pub fn gp_residual(solution: &GPSolution, problem: &GpProblem) -> Result<f64> {
    let h = problem.operator(&solution.density())?;
    let m = h.matrix();
    let right = m.dot(&solution.psi) - solution.psi.mapv(|z| z * solution.mu);
    let left = solution.phi_bar.dot(m) - solution.phi_bar.mapv(|z| z * solution.mu);
    Ok(problem.grid.l2_norm(&right) + problem.grid.l2_norm(&left))
}

/// Outcome of solving the same problem with several mixing parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub mixes: Vec<f64>,
    /// Largest relative difference of the densities `φ̄ψ` between runs.
    pub density_spread: f64,
    /// Largest relative difference of `φ̄` after matching the gauge of `ψ`.
    pub left_spread: f64,
    pub unique: bool,
}

/// Solve with each mix in `mixes` and compare the fixed points reached.
/// Differences beyond `10·tol` are reported as non-unique.
pub fn check_uniqueness(problem: &GpProblem, opts: &GpOptions, mixes: &[f64]) -> Result<UniquenessReport> {
    let sols = mixes
        .iter()
        .map(|&mix| solve_self_consistent(problem, &GpOptions { mix, ..*opts }))
        .collect::<Result<Vec<_>>>()?;
    let mut density_spread = 0.0f64;
    let mut left_spread = 0.0f64;
    for s in &sols[1..] {
        let r = &sols[0];
        density_spread = density_spread.max(relative(&s.density(), &r.density()));
        // remove the global phase of ψ, which φ̄ carries inversely
        let ov = braket(&r.psi.view(), &s.psi.view());
        let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
        left_spread = left_spread.max(relative(&s.phi_bar.mapv(|z| z * ph), &r.phi_bar));
    }
    let unique = density_spread < 10.0 * opts.tol.max(1e-12) && left_spread < 10.0 * opts.tol.max(1e-12);
    Ok(UniquenessReport { mixes: mixes.to_vec(), density_spread, left_spread, unique })
}

/// `∫φ̄ (iΓ) ψ dx`, the first-order shift of `μ` under a perturbation `iΓ(x)`.
pub fn imaginary_shift(grid: &Grid1D, psi: &Array1<C64>, phi_bar: &Array1<C64>, gamma: &Array1<f64>) -> C64 {
    let f: Array1<C64> = (0..psi.len()).map(|k| phi_bar[k] * I * gamma[k] * psi[k]).collect();
    grid.integrate(&f)
}

use std::f64::consts::PI;

use ndarray::Array1;
use proptest::prelude::*;

use nhqm::gp::{check_uniqueness, imaginary_shift, regenerate_left, GpOptions};
use nhqm::linalg::eigvals;
use nhqm::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn grid(n: usize) -> Grid1D {
    Grid1D::new(n, -8.0, 8.0, Boundary::Dirichlet).unwrap()
}

fn harmonic() -> Potential {
    Potential::Harmonic { omega: 1.0, mass: 1.0, x0: 0.0 }
}

fn well(gamma: f64) -> Potential {
    Potential::ComplexWell { omega: 1.0, mass: 1.0, gamma, width: 1.0 }
}

fn tight() -> GpOptions {
    GpOptions { tol: 1e-11, ..Default::default() }
}

fn sup(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn solutions_are_normalized_fixed_points(gamma in 0.0f64..0.1, coupling in 0.0f64..1.5) {
        let p = GpProblem::new(grid(48), Kinetic::default(), &well(gamma), c(coupling, 0.0)).unwrap();
        let opts = tight();
        let sol = solve_self_consistent(&p, &opts).unwrap();
        prop_assert!((p.grid.integrate(&sol.density()) - 1.0).norm() < 1e-10);
        prop_assert!(sol.residual < 1e-8);
        prop_assert!((gp_residual(&sol, &p).unwrap() - sol.residual).abs() < 1e-12);
        let (mu, regen) = regenerate_left(&p, &sol.psi, &sol.phi_bar, sol.mu, &opts).unwrap();
        prop_assert!((mu - sol.mu).norm() < 1e-9);
        prop_assert!(sup(&(&regen - &sol.phi_bar)) < 1e-9 * sup(&sol.phi_bar));
    }

    #[test]
    fn gauge_rescales_fields_oppositely(weight in 0.2f64..5.0, coupling in 0.0f64..1.0) {
        let p = GpProblem::new(grid(40), Kinetic::default(), &well(0.05), c(coupling, 0.0)).unwrap();
        let base = solve_self_consistent(&p, &tight()).unwrap();
        let other = solve_self_consistent(&p, &GpOptions { gauge: weight, ..tight() }).unwrap();
        prop_assert!((base.mu - other.mu).norm() < 1e-10);
        prop_assert!(sup(&(base.density() - other.density())) < 1e-10);
        prop_assert!((base.residual - other.residual).abs() < 1e-10);
        let peak = (0..base.psi.len()).max_by(|&a, &b| base.psi[a].norm().total_cmp(&base.psi[b].norm())).unwrap();
        let ratio = other.psi[peak].norm() / base.psi[peak].norm();
        prop_assert!((ratio - weight.sqrt()).abs() < 1e-8);
        prop_assert!((p.grid.integrate(&other.psi.mapv(|z| z.norm_sqr()).mapv(C64::from)).re - weight).abs() < 1e-8);
    }
}

#[test]
fn hermitian_limit_is_standard_gp() {
    let p = GpProblem::new(grid(64), Kinetic::default(), &harmonic(), c(0.8, 0.0)).unwrap();
    let sol = solve_self_consistent(&p, &tight()).unwrap();
    assert!(sol.mu.im.abs() < 1e-8);
    assert!(sol.psi.iter().zip(&sol.phi_bar).all(|(p, q)| (p.conj() - q).norm() < 1e-8));
}

#[test]
fn linear_limit_is_the_lowest_eigenpair() {
    let p = GpProblem::new(grid(64), Kinetic::default(), &well(0.1), c(0.0, 0.0)).unwrap();
    let sol = solve_self_consistent(&p, &tight()).unwrap();
    let lowest = eigvals(p.operator(&Array1::zeros(64)).unwrap().matrix())
        .unwrap()
        .iter()
        .cloned()
        .min_by(|a, b| a.re.total_cmp(&b.re))
        .unwrap();
    assert!((sol.mu - lowest).norm() < 1e-10);
    assert!(sol.residual < 1e-10);
}

#[test]
fn grid_refinement_is_second_order() {
    // linear trap: μ → ħω/2
    let err = |n| {
        let p = GpProblem::new(grid(n), Kinetic::default(), &harmonic(), c(0.0, 0.0)).unwrap();
        (solve_self_consistent(&p, &tight()).unwrap().mu - 0.5).norm()
    };
    let (e1, e2, e3) = (err(33), err(65), err(129));
    for r in [e1 / e2, e2 / e3] {
        assert!((3.6..4.4).contains(&r), "errors {e1:e} {e2:e} {e3:e}");
    }
}

#[test]
fn weak_loss_shifts_mu_at_first_order() {
    let g = grid(64);
    let xs = g.points();
    let profile: Array1<f64> = xs.mapv(|x| (-x * x).exp());
    for coupling in [0.0, 0.05] {
        let base = GpProblem::new(g, Kinetic::default(), &harmonic(), c(coupling, 0.0)).unwrap();
        let herm = solve_self_consistent(&base, &tight()).unwrap();
        let strength = 1e-3;
        let table = Potential::Table {
            x: xs.to_vec(),
            v: xs.iter().zip(&profile).map(|(x, p)| c(0.5 * x * x, strength * p)).collect(),
        };
        let lossy = GpProblem::new(g, Kinetic::default(), &table, c(coupling, 0.0)).unwrap();
        let sol = solve_self_consistent(&lossy, &tight()).unwrap();
        let predicted = imaginary_shift(&g, &herm.psi, &herm.phi_bar, &profile.mapv(|p| strength * p));
        let shift = sol.mu - herm.mu;
        assert!((shift - predicted).norm() < 2e-2 * predicted.norm(), "c = {coupling}: {shift} vs {predicted}");
        assert!((g.integrate(&sol.density()) - 1.0).norm() < 1e-10);
    }
}

#[test]
fn periodic_free_operator_follows_stencil_dispersion() {
    let n = 32;
    let g = Grid1D::new(n, 0.0, 2.0 * PI, Boundary::Periodic).unwrap();
    let dx = g.spacing();
    let op = build_gp_operator(&g, Kinetic::default(), &Array1::zeros(n), c(0.0, 0.0), &Array1::zeros(n)).unwrap();
    assert!(op.is_hermitian(0.0));
    let mut got: Vec<f64> = eigvals(op.matrix()).unwrap().iter().map(|z| z.re).collect();
    let mut want: Vec<f64> = (0..n)
        .map(|m| {
            let k = 2.0 * PI * m as f64 / (n as f64 * dx);
            2.0 * (1.0 - (k * dx).cos()) / (2.0 * dx * dx)
        })
        .collect();
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-10);
    }
    // low modes approach ħ²k²/2m
    assert!((want[2] - 0.5).abs() < 1e-2);
}

#[test]
fn random_fields_have_order_one_residual() {
    let p = GpProblem::new(grid(32), Kinetic::default(), &harmonic(), c(1.0, 0.0)).unwrap();
    let psi: Array1<C64> = (0..32).map(|k| c((k as f64 * 1.3).sin(), (k as f64 * 0.7).cos())).collect();
    let phi = psi.mapv(|z| z.conj());
    let sol = GPSolution {
        psi,
        phi_bar: phi,
        mu: c(0.5, 0.0),
        residual: 0.0,
        iterations: 0,
        gauge: vec![1.0],
        fixed_point_defect: 0.0,
    };
    assert!(gp_residual(&sol, &p).unwrap() > 0.1);
}

#[test]
fn mixing_does_not_change_the_answer() {
    let p = GpProblem::new(grid(40), Kinetic::default(), &well(0.05), c(1.0, 0.0)).unwrap();
    let report = check_uniqueness(&p, &tight(), &[0.2, 0.5]).unwrap();
    assert!(report.unique, "{report:?}");
}

#[test]
fn bad_options_are_input_errors() {
    let p = GpProblem::new(grid(20), Kinetic::default(), &harmonic(), c(1.0, 0.0)).unwrap();
    let err = solve_self_consistent(&p, &GpOptions { mix: 0.0, ..Default::default() }).unwrap_err();
    assert!(!err.is_physics());
    assert!(Grid1D::new(8, 0.0, 1.0, Boundary::Dirichlet).is_err());
    let stuck = solve_self_consistent(&p, &GpOptions { max_iter: 2, tol: 1e-14, ..Default::default() }).unwrap_err();
    assert!(matches!(stuck, Error::NoConvergence { .. }));
}

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use nhqm::geometric::{loop_phases, track_mode, wrap};
use nhqm::prelude::*;

fn spin(gamma: f64) -> Arc<dyn HamiltonianBuilder> {
    Arc::new(SpinHalfBuilder { gamma, hbar: 1.0 })
}

fn opts() -> BiorthoOptions {
    BiorthoOptions::default()
}

fn phase_gap(a: C64, b: C64) -> f64 {
    C64::new(wrap(a.re - b.re), a.im - b.im).norm()
}

fn tilted_loop(gamma: f64, tilt: f64, n: usize) -> ParameterPath {
    let u = [tilt.cos(), 0.0, tilt.sin()];
    // stays above z = 0, so it never links the exceptional ring z = 0, ρ = γ
    ParameterPath::circle(spin(gamma), &[0.1, -0.2, 0.8], 0.7, &u, &[0.0, 1.0, 0.0], n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn loop_phase_ignores_smooth_regauging(gamma in 0.0f64..0.4, tilt in -1.0f64..1.0, w in 0.5f64..3.0) {
        let path = tilted_loop(gamma, tilt, 120);
        for j in 0..2 {
            let frames = track_mode(&path, j, &opts()).unwrap();
            let right: Vec<_> = frames.iter().map(|f| f.right.clone()).collect();
            let left: Vec<_> = frames.iter().map(|f| f.left.clone()).collect();
            let (b0, bb0) = loop_phases(&right, &left).unwrap();
            let f = |r: &[f64]| C64::new(1.0 + 0.3 * r[0], 0.2 * r[1]) * C64::from_polar(1.0, w * r[0] - r[1] * r[2]);
            let right2: Vec<_> = right.iter().zip(path.samples()).map(|(a, r)| a.mapv(|z| z * f(r))).collect();
            let left2: Vec<_> = left.iter().zip(path.samples()).map(|(b, r)| b.mapv(|z| z / f(r).conj())).collect();
            let (b1, bb1) = loop_phases(&right2, &left2).unwrap();
            prop_assert!(phase_gap(b0, b1) < 1e-9 && phase_gap(bb0, bb1) < 1e-9, "{b0} vs {b1}");
        }
    }

    #[test]
    fn left_phase_is_conjugate(gamma in 0.0f64..0.4, tilt in -1.0f64..1.0) {
        let path = tilted_loop(gamma, tilt, 150);
        for j in 0..2 {
            let rep = geometric_phase_loop(&path, j, &opts()).unwrap();
            prop_assert!(phase_gap(rep.geometric_phase_left, rep.geometric_phase_right.conj()) < 1e-8);
        }
    }

    #[test]
    fn hermitian_builders_give_real_phases(tilt in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let path = tilted_loop(0.0, tilt, 150);
        for j in 0..2 {
            let rep = geometric_phase_loop(&path, j, &opts()).unwrap();
            prop_assert!(rep.geometric_phase_right.im.abs() < 1e-8);
            let a = berry_connection_right(spin(0.0).as_ref(), &[x, y, 0.5], j, None).unwrap();
            prop_assert!(a.iter().all(|z| z.im.abs() < 1e-8));
        }
    }
}

#[test]
fn refinement_converges_at_second_order() {
    let reference = geometric_phase_loop(&tilted_loop(0.3, 0.4, 3200), 1, &opts()).unwrap().geometric_phase_right;
    let err = |n| phase_gap(geometric_phase_loop(&tilted_loop(0.3, 0.4, n), 1, &opts()).unwrap().geometric_phase_right, reference);
    let (e1, e2, e3) = (err(100), err(200), err(400));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((3.5..4.5).contains(&ratio), "error ratios {e1:e} {e2:e} {e3:e}");
    }
}

#[test]
fn stokes_on_small_patches() {
    for (gamma, center) in [(0.0, [0.3, 0.2, 0.8]), (0.3, [0.3, 0.2, 0.8]), (0.4, [-0.5, 0.6, -0.3])] {
        let b = spin(gamma);
        let s = 0.02;
        let corners: Vec<Vec<f64>> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|(dx, dy)| vec![center[0] + dx * s / 2.0, center[1] + dy * s / 2.0, center[2]])
            .collect();
        let path = ParameterPath::polygon(b.clone(), &corners, 40).unwrap();
        for j in 0..2 {
            let beta = geometric_phase_loop(&path, j, &opts()).unwrap().geometric_phase_right;
            let curv = berry_curvature(b.as_ref(), &center, j, None).unwrap();
            let flux = curv[2] * s * s;
            let gap = phase_gap(beta, flux);
            assert!(gap < 2e-3 * flux.norm(), "γ = {gamma}, mode {j}: β = {beta}, flux = {flux}");
            if gamma > 0.0 {
                assert!(flux.im.abs() > 1e-3 * flux.norm());
            }
        }
    }
}

#[test]
fn solid_angle_for_several_latitudes() {
    for theta in [0.3, PI / 4.0, 1.2, 2.0] {
        let path = ParameterPath::polar_circle(spin(0.0), 1.3, theta, 600).unwrap();
        let lower = geometric_phase_loop(&path, 0, &opts()).unwrap().geometric_phase_right;
        let upper = geometric_phase_loop(&path, 1, &opts()).unwrap().geometric_phase_right;
        let omega = 2.0 * PI * (1.0 - theta.cos());
        assert!(wrap(upper.re + omega / 2.0).abs() < 1e-3, "θ = {theta}: {upper}");
        assert!(wrap(lower.re - omega / 2.0).abs() < 1e-3, "θ = {theta}: {lower}");
    }
}

#[test]
fn adiabatic_run_matches_loop_formula() {
    // equatorial loops keep E real while β picks up an imaginary part
    for (gamma, radius) in [(0.3, 1.2), (0.6, 1.5)] {
        let path = ParameterPath::polar_circle(spin(gamma), radius, PI / 2.0, 300).unwrap();
        let formula = geometric_phase_loop(&path, 1, &opts()).unwrap().geometric_phase_right;
        let run = adiabatic_evolve(&path, 1, 6000.0, 1.0, &opts()).unwrap();
        let beta = run.report.geometric_phase_right;
        let analytic = PI * gamma / (radius * radius - gamma * gamma).sqrt();
        assert!(phase_gap(beta, formula) < 5e-3, "{beta} vs {formula}");
        assert!((beta.im - analytic).abs() < 1e-3, "{beta} vs Im {analytic}");
        let occ = run.report.loop_occupation.unwrap();
        assert!((occ - 1.0).norm() < 1e-5, "{occ}");
        let last = run.trace.last().unwrap();
        assert!((last.c_bar * last.c - occ).norm() < 1e-9);
    }
}

#[test]
fn fast_loops_are_refused() {
    let path = ParameterPath::polar_circle(spin(0.3), 1.0, 1.1, 100).unwrap();
    let err = adiabatic_evolve(&path, 1, 5.0, 0.01, &opts()).unwrap_err();
    assert!(matches!(err, Error::AdiabaticityViolated { .. }));
    assert!(err.is_physics());
}

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nhqm::biortho::hermitian_limit_check;
use nhqm::linalg::{adjoint, eigvals};
use nhqm::prelude::*;

fn random_matrix(n: usize, seed: u64) -> Array2<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_hermitian(n: usize, seed: u64) -> Array2<C64> {
    let m = random_matrix(n, seed);
    (&m + &adjoint(&m.view())).mapv(|z| z * 0.5)
}

/// Greedy nearest matching; returns the largest distance used.
fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_and_biorthonormality(n in 1usize..=12, seed in any::<u64>()) {
        let m = random_matrix(n, seed);
        let h = Hamiltonian::new(m.clone()).unwrap();
        let sys = diagonalize_biortho(&h, &BiorthoOptions::default()).unwrap();
        let rec = sys.reconstruct();
        let err = (&rec - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "reconstruction error {err:e}");
        prop_assert!(sys.biortho_defect() < 1e-10, "defect {:e}", sys.biortho_defect());
        for j in 0..n {
            let a = sys.right(j);
            prop_assert!((a.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_spectrum_is_conjugate(n in 1usize..=12, seed in any::<u64>()) {
        let m = random_matrix(n, seed);
        let e: Vec<C64> = eigvals(&m).unwrap().to_vec();
        let f: Vec<C64> = eigvals(&adjoint(&m.view())).unwrap().iter().map(|z| z.conj()).collect();
        prop_assert!(multiset_distance(&e, &f) < 1e-9);
    }

    #[test]
    fn hermitian_input_gives_real_spectrum(n in 1usize..=12, seed in any::<u64>()) {
        let h = Hamiltonian::new(random_hermitian(n, seed)).unwrap();
        let sys = diagonalize_biortho(&h, &BiorthoOptions::default()).unwrap();
        prop_assert!(sys.eigenvalues().iter().all(|e| e.im.abs() < 1e-12));
        prop_assert!(hermitian_limit_check(&sys, 1e-10));
    }

    #[test]
    fn eigenvalues_are_sorted(n in 1usize..=8, seed in any::<u64>()) {
        let h = Hamiltonian::new(random_matrix(n, seed)).unwrap();
        let sys = diagonalize_biortho(&h, &BiorthoOptions::default()).unwrap();
        let e = sys.eigenvalues();
        for j in 1..n {
            prop_assert!(e[j - 1].re <= e[j].re);
        }
    }
}

#[test]
fn pt_dimer_broken_and_unbroken() {
    let unbroken = diagonalize_biortho(&pt2x2(1.0, 0.5).unwrap(), &BiorthoOptions::default()).unwrap();
    let r = 0.75f64.sqrt();
    assert!(multiset_distance(unbroken.eigenvalues().as_slice().unwrap(), &[C64::new(-r, 0.), C64::new(r, 0.)]) < 1e-12);
    let broken = diagonalize_biortho(&pt2x2(1.0, 2.0).unwrap(), &BiorthoOptions::default()).unwrap();
    let s = 3f64.sqrt();
    assert!(multiset_distance(broken.eigenvalues().as_slice().unwrap(), &[C64::new(0., -s), C64::new(0., s)]) < 1e-12);
}

#[test]
fn exceptional_point_is_refused() {
    let err = diagonalize_biortho(&pt2x2(1.0, 1.0).unwrap(), &BiorthoOptions::default()).unwrap_err();
    assert!(matches!(err, Error::ExceptionalPoint { .. }), "{err:?}");
    assert!(err.is_physics());
}

#[test]
fn degenerate_block_is_biorthogonalized() {
    let mut m = Array2::<C64>::zeros((4, 4));
    m[[0, 0]] = C64::new(1.0, 0.5);
    m[[1, 1]] = C64::new(1.0, 0.5);
    m[[2, 2]] = C64::new(-1.0, 0.0);
    m[[3, 3]] = C64::new(2.0, -1.0);
    // similarity transform mixes the degenerate pair
    let s = random_matrix(4, 7) + Array2::<C64>::eye(4).mapv(|z| z * 3.0);
    let s_inv = ndarray_inv(&s);
    let h = Hamiltonian::new(s.dot(&m).dot(&s_inv)).unwrap();
    let sys = diagonalize_biortho(&h, &BiorthoOptions::default()).unwrap();
    assert!(sys.biortho_defect() < 1e-10);
    let rec = sys.reconstruct();
    assert!((&rec - h.matrix()).iter().all(|z| z.norm() < 1e-9));
}

fn ndarray_inv(m: &Array2<C64>) -> Array2<C64> {
    use ndarray_linalg::Inverse;
    m.inv().unwrap()
}

mod common;

use diffgeo::curvature::{force, lie_bracket, riemann_fd_oracle, sectional_numerator, sharp_jacobian, stress};
use diffgeo::dynamics::{cometric, metric, sharp};
use diffgeo::kernels::{KernelFamily, KernelSpec, LandmarkConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn gauss() -> KernelSpec {
    KernelSpec::gaussian(1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn antisymmetric_stress_is_the_bracket(seed in 0u64..10_000, npts in 2usize..6, dim in 1usize..3) {
        let mut rng = common::rng(seed);
        let k = gauss();
        let q = common::random_config(&mut rng, npts, dim, 1.5, 0.3);
        let a = common::random_matrix(&mut rng, npts, dim, 1.0);
        let b = common::random_matrix(&mut rng, npts, dim, 1.0);
        let lhs = stress(&k, &q, &a, &b).unwrap() - stress(&k, &q, &b, &a).unwrap();
        // independent bracket: J_β α♯ − J_α β♯ with J the Jacobian of q ↦ β♯(q)
        let flat = |m: &DMatrix<f64>| DMatrix::from_row_slice(npts * dim, 1, &m.transpose().as_slice().to_vec());
        let sa = flat(&sharp(&k, &q, &a).unwrap());
        let sb = flat(&sharp(&k, &q, &b).unwrap());
        let rhs = sharp_jacobian(&k, &q, &b).unwrap() * sa - sharp_jacobian(&k, &q, &a).unwrap() * sb;
        let lhs_flat = flat(&lhs);
        prop_assert!((&lhs_flat - &rhs).amax() < 1e-10);
        prop_assert!((lhs - lie_bracket(&k, &q, &a, &b).unwrap()).amax() < 1e-10);
    }

    #[test]
    fn translation_leaves_the_numerator_unchanged(seed in 0u64..10_000, shift in -5.0f64..5.0) {
        let mut rng = common::rng(seed);
        let k = gauss();
        let q = common::random_config(&mut rng, 3, 2, 1.5, 0.3);
        let a = common::random_matrix(&mut rng, 3, 2, 1.0);
        let b = common::random_matrix(&mut rng, 3, 2, 1.0);
        let n0 = sectional_numerator(&k, &q, &a, &b).unwrap().numerator;
        let moved = q.translated(&[shift, -0.5 * shift]).unwrap();
        let n1 = sectional_numerator(&k, &moved, &a, &b).unwrap().numerator;
        prop_assert!((n0 - n1).abs() < 1e-10 * (1.0 + n0.abs()));
    }

    #[test]
    fn oneill_term_is_three_quarters_bracket_norm(seed in 0u64..10_000) {
        let mut rng = common::rng(seed);
        let k = gauss();
        let q = common::random_config(&mut rng, 4, 2, 1.5, 0.3);
        let a = common::random_matrix(&mut rng, 4, 2, 1.0);
        let b = common::random_matrix(&mut rng, 4, 2, 1.0);
        let rep = sectional_numerator(&k, &q, &a, &b).unwrap();
        let br = lie_bracket(&k, &q, &a, &b).unwrap();
        let want = 0.75 * metric(&k, &q, &br, &br).unwrap();
        prop_assert!(rep.terms.oneill_term >= 0.0);
        prop_assert!((rep.terms.oneill_term - want).abs() < 1e-9 * (1.0 + want));
    }
}

#[test]
fn force_is_half_the_cometric_gradient() {
    let mut rng = common::rng(5);
    let k = gauss();
    let q = common::random_config(&mut rng, 4, 2, 1.5, 0.3);
    let a = common::random_matrix(&mut rng, 4, 2, 1.0);
    let b = common::random_matrix(&mut rng, 4, 2, 1.0);
    let f = force(&k, &q, &a, &b).unwrap();
    let h = 1e-5;
    for i in 0..4 {
        for c in 0..2 {
            let at = |s: f64| {
                let mut m = q.as_matrix().clone();
                m[(i, c)] += s * h;
                cometric(&k, &LandmarkConfig::new(m).unwrap(), &a, &b).unwrap()
            };
            let fd = 0.5 * (at(1.0) - at(-1.0)) / (2.0 * h);
            assert!((fd - f[(i, c)]).abs() < 1e-6, "{fd} vs {}", f[(i, c)]);
        }
    }
}

#[test]
fn parallel_covectors_give_zero() {
    let mut rng = common::rng(9);
    let k = gauss();
    let q = common::random_config(&mut rng, 3, 2, 1.5, 0.3);
    let a = common::random_matrix(&mut rng, 3, 2, 1.0);
    let rep = sectional_numerator(&k, &q, &a, &(&a * -2.5)).unwrap();
    assert!(rep.numerator.abs() < 1e-12);
    assert!(rep.sectional.is_none());
}

#[test]
fn benchmark_pair_matches_frozen_oracle() {
    let k = gauss();
    let q = LandmarkConfig::from_rows(&[vec![0.0], vec![1.5]]).unwrap();
    let a = DMatrix::from_row_slice(2, 1, &[0.3, -0.7]);
    let b = DMatrix::from_row_slice(2, 1, &[1.1, 0.4]);
    let rep = sectional_numerator(&k, &q, &a, &b).unwrap();
    // Richardson-extrapolated Christoffel-symbol oracle computed offline
    assert!(common::rel_err(rep.numerator, -0.013836566391596255) < 1e-5, "{}", rep.numerator);
    let (pa, pb) = (sharp(&k, &q, &a).unwrap(), sharp(&k, &q, &b).unwrap());
    let fd = riemann_fd_oracle(&k, &q, &pa, &pb).unwrap();
    assert!(common::rel_err(rep.numerator, fd) < 1e-3);
}

#[test]
fn numerator_matches_fd_oracle_on_random_instances() {
    let mut rng = common::rng(2024);
    let families = [KernelFamily::Gaussian, KernelFamily::Matern52];
    for trial in 0..50 {
        let npts = 2 + trial % 3;
        let dim = 1 + trial % 2;
        let k = KernelSpec::new(families[trial % 2], 1.0).unwrap();
        let q = common::random_config(&mut rng, npts, dim, 1.2, 0.4);
        let a = common::random_matrix(&mut rng, npts, dim, 1.0);
        let b = common::random_matrix(&mut rng, npts, dim, 1.0);
        let rep = sectional_numerator(&k, &q, &a, &b).unwrap();
        let fd = riemann_fd_oracle(&k, &q, &sharp(&k, &q, &a).unwrap(), &sharp(&k, &q, &b).unwrap()).unwrap();
        assert!(common::rel_err(rep.numerator, fd) < 1e-3, "trial {trial}: {} vs {fd}", rep.numerator);
    }
}

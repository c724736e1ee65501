mod common;

use diffgeo::kernels::{kernel_matrix, KernelFactor, KernelFamily, KernelSpec, LandmarkConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;

const FAMILIES: [KernelFamily; 3] = [KernelFamily::Gaussian, KernelFamily::Matern32, KernelFamily::Matern52];

fn family() -> impl Strategy<Value = KernelFamily> {
    prop::sample::select(FAMILIES.to_vec())
}

fn vec2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2)
}

proptest! {
    #[test]
    fn even(fam in family(), sigma in 0.2f64..3.0, r in vec2()) {
        let k = KernelSpec::new(fam, sigma).unwrap();
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        prop_assert_eq!(k.eval(&r), k.eval(&neg));
    }

    #[test]
    fn gradient_is_odd(fam in family(), sigma in 0.2f64..3.0, r in vec2()) {
        let k = KernelSpec::new(fam, sigma).unwrap();
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let (g, gn) = (k.grad(&r), k.grad(&neg));
        for c in 0..2 {
            prop_assert!((g[c] + gn[c]).abs() <= 1e-15 * (1.0 + g[c].abs()));
        }
    }

    #[test]
    fn gradient_matches_differences(fam in family(), sigma in 0.5f64..2.0, r in vec2()) {
        let k = KernelSpec::new(fam, sigma).unwrap();
        let h = 1e-5;
        let g = k.grad(&r);
        for c in 0..2 {
            let mut p = r.clone();
            let mut m = r.clone();
            p[c] += h;
            m[c] -= h;
            let fd = (k.eval(&p) - k.eval(&m)) / (2.0 * h);
            prop_assert!((fd - g[c]).abs() < 1e-8, "{fd} vs {}", g[c]);
        }
    }

    #[test]
    fn hessian_matches_differences(fam in family(), sigma in 0.5f64..2.0, r in vec2()) {
        prop_assume!(r.iter().map(|v| v * v).sum::<f64>() > 1e-4);
        let k = KernelSpec::new(fam, sigma).unwrap();
        let h = 1e-5;
        let hess = k.hess(&r);
        for c in 0..2 {
            let mut p = r.clone();
            let mut m = r.clone();
            p[c] += h;
            m[c] -= h;
            let fd = (k.grad(&p) - k.grad(&m)) / (2.0 * h);
            for d in 0..2 {
                let scale = hess.amax().max(1e-3);
                prop_assert!((fd[d] - hess[(d, c)]).abs() < 1e-6 * scale, "{} vs {}", fd[d], hess[(d, c)]);
            }
        }
    }
}

#[test]
fn kernel_matrices_are_positive_definite() {
    let mut rng = common::rng(11);
    for trial in 0..1000 {
        let fam = FAMILIES[trial % 3];
        let npts = 1 + trial % 10;
        let dim = 1 + trial % 3;
        let k = KernelSpec::new(fam, 1.0).unwrap();
        let q = common::random_config(&mut rng, npts, dim, 2.0, 0.05);
        let m = kernel_matrix(&k, &q).unwrap();
        let min_eig = m.symmetric_eigenvalues().min();
        assert!(min_eig > 0.0, "trial {trial}: smallest eigenvalue {min_eig}");
    }
}

#[test]
fn inverse_matches_adjugate() {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let q = LandmarkConfig::from_rows(&[vec![0.0, 0.0], vec![0.9, 0.1], vec![-0.3, 1.1]]).unwrap();
    let m = kernel_matrix(&k, &q).unwrap();
    let c = |i: usize, j: usize| m[(i, j)];
    let det = m.determinant();
    // cofactor formula for 3×3 (symmetric matrix)
    let adj = DMatrix::from_fn(3, 3, |i, j| {
        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
        c(r0, c0) * c(r1, c1) - c(r0, c1) * c(r1, c0)
    });
    let inv = KernelFactor::new(&k, &q).unwrap().inverse();
    assert!((inv - adj / det).amax() < 1e-12);
}

#[test]
fn conditioning_degrades_as_points_merge() {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let mut last = 0.0;
    for sep in [1.0, 0.3, 0.1, 0.03, 0.01] {
        let q = LandmarkConfig::from_rows(&[vec![0.0], vec![sep]]).unwrap();
        let eig = kernel_matrix(&k, &q).unwrap().symmetric_eigenvalues();
        let cond = eig.max() / eig.min();
        // two-point Gram matrix has eigenvalues 1 ± e^{−s²/2}
        let e = (-sep * sep / 2.0f64).exp();
        assert!(common::rel_err(cond, (1.0 + e) / (1.0 - e)) < 1e-8);
        assert!(cond > last);
        last = cond;
    }
}

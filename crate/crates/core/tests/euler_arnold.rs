mod common;

use std::f64::consts::{PI, TAU};

use diffgeo::euler_arnold::{
    ad_star, bracket, ea_evolve, low_mode_field, vanish_distance_experiment, EaEvolveOptions, InertiaOp,
    PeriodicField, VanishOptions,
};
use diffgeo::Error;
use proptest::prelude::*;
use rand::Rng;

const M: usize = 64;

fn field(m: usize, f: impl Fn(f64) -> f64) -> PeriodicField {
    PeriodicField::from_fn(m, f).unwrap()
}

fn random_field(seed: u64, m: usize, modes: usize) -> PeriodicField {
    let mut rng = common::rng(seed);
    let coeffs: Vec<(f64, f64)> = (0..modes).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    low_mode_field(m, modes, &coeffs).unwrap()
}

/// `(1/2π) ∮ a b dx` by the trapezoid rule on the grid.
fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

fn pointwise(a: &PeriodicField, b: &PeriodicField) -> Vec<f64> {
    a.samples().iter().zip(b.samples()).map(|(x, y)| x * y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_round_trip(samples in prop::collection::vec(-10.0f64..10.0, 32)) {
        let u = PeriodicField::new(samples.clone()).unwrap();
        let c = u.coefficients();
        for k in 1..32 {
            prop_assert!((c[k] - c[32 - k].conj()).norm() < 1e-12);
        }
        let back = PeriodicField::from_coefficients(&c).unwrap();
        prop_assert!(back.max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn inertia_round_trip(seed in 0u64..10_000, s in 0.0f64..3.0) {
        let op = InertiaOp::new(s, M).unwrap();
        let u = random_field(seed, M, 8);
        let lu = op.apply(&u);
        prop_assert!(op.invert(&lu).max_abs_diff(&u) < 1e-13 + 1e-14 * lu.max_abs());
        let c = PeriodicField::constant(M, 1.7).unwrap();
        prop_assert!(op.invert(&c).max_abs_diff(&c) < 1e-14);
        let v = random_field(seed + 1, M, 8);
        prop_assert!((op.metric(&u, &v) - op.metric(&v, &u)).abs() < 1e-14 * (1.0 + op.norm_sq(&u)));
        prop_assert!((0..M as i64).all(|k| op.multiplier(k) >= 1.0 && op.multiplier(k) == op.multiplier(-k)));
    }

    #[test]
    fn ad_star_is_dual_to_the_bracket(seed in 0u64..10_000, s in 0.0f64..2.0) {
        let op = InertiaOp::new(s, M).unwrap();
        let (u, v, w) = (random_field(seed, M, 5), random_field(seed + 1, M, 5), random_field(seed + 2, M, 5));
        let lv = op.apply(&v);
        let lhs = mean_product(ad_star(&u, &lv).samples(), w.samples());
        // [u,w] = u w_x − u_x w, computed pointwise on the grid
        let uw: Vec<f64> = pointwise(&u, &w.derivative(1))
            .iter()
            .zip(pointwise(&u.derivative(1), &w))
            .map(|(a, b)| a - b)
            .collect();
        let rhs = -mean_product(lv.samples(), &uw);
        prop_assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn rho_identities(seed in 0u64..10_000, s in 1.0f64..3.0) {
        let op = InertiaOp::new(s, M).unwrap();
        let (xi, eta, zeta) = (random_field(seed, M, 4), random_field(seed + 1, M, 4), random_field(seed + 2, M, 4));
        prop_assert!(op.rho(&xi, &eta).max_abs_diff(&op.rho(&eta, &xi)) < 1e-12);
        let lhs = op.metric(&op.rho(&xi, &eta), &zeta);
        let rhs = 0.5 * op.metric(&xi, &bracket(&eta, &zeta)) + 0.5 * op.metric(&eta, &bracket(&xi, &zeta));
        prop_assert!((lhs - rhs).abs() < 1e-8);
        let cyclic = lhs + op.metric(&op.rho(&eta, &zeta), &xi) + op.metric(&op.rho(&zeta, &xi), &eta);
        prop_assert!(cyclic.abs() < 1e-8);
    }
}

#[test]
fn burgers_rhs_matches_grid_computation() {
    let op = InertiaOp::new(0.0, M).unwrap();
    for seed in 0..10 {
        let u = random_field(seed, M, 6);
        let want: Vec<f64> = pointwise(&u, &u.derivative(1)).iter().map(|v| -3.0 * v).collect();
        let got = op.rhs(&u);
        assert!(got.max_abs_diff(&PeriodicField::new(want).unwrap()) < 1e-10);
    }
}

#[test]
fn h1_inertia_is_one_minus_second_derivative() {
    let op = InertiaOp::new(1.0, M).unwrap();
    let u = random_field(5, M, 10);
    let want = &u - &u.derivative(2);
    assert!(op.apply(&u).max_abs_diff(&want) < 1e-10);
}

#[test]
fn curvature_formulas_agree() {
    for s in [1.0, 2.0] {
        let op = InertiaOp::new(s, M).unwrap();
        for seed in 0..20 {
            let (x, y) = (random_field(100 + seed, M, 4), random_field(200 + seed, M, 4));
            let a = op.sectional_numerator(&x, &y);
            let b = op.arnold_numerator(&x, &y).unwrap();
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "s={s} seed={seed}: {a} vs {b}");
            let swapped = op.sectional_numerator(&y, &x);
            assert!((a - swapped).abs() < 1e-8 * (1.0 + a.abs()));
            assert!(op.sectional_numerator(&x, &x).abs() < 1e-10);
            assert!(op.arnold_numerator(&x, &x).unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn frozen_numerators() {
    // exact rational values from an independent symbolic computation
    let x = field(M, f64::cos);
    let y = field(M, |t| t.sin() + 0.5 * (2.0 * t).cos());
    let h1 = InertiaOp::new(1.0, M).unwrap();
    let h2 = InertiaOp::new(2.0, M).unwrap();
    assert!((h1.sectional_numerator(&x, &y) - -9.0 / 80.0).abs() < 1e-12);
    assert!((h2.sectional_numerator(&x, &y) - 1923.0 / 800.0).abs() < 1e-11);
    let (c, s) = (field(M, f64::cos), field(M, f64::sin));
    let a = h1.sectional_numerator(&c, &s);
    assert!((a - h1.arnold_numerator(&c, &s).unwrap()).abs() < 1e-8);
}

#[test]
fn arnold_formula_refuses_low_order() {
    let op = InertiaOp::new(0.25, M).unwrap();
    let c = field(M, f64::cos);
    assert!(matches!(op.arnold_numerator(&c, &c), Err(Error::OrderTooLow { .. })));
}

fn smooth_initial(m: usize) -> PeriodicField {
    field(m, |x| 0.5 * x.cos() + 0.3 * (2.0 * x).sin() + 0.1 * (3.0 * x).cos())
}

#[test]
fn camassa_holm_conserves_energy_and_momentum_mean() {
    let op = InertiaOp::new(1.0, 256).unwrap();
    let traj = ea_evolve(&op, &smooth_initial(256), &EaEvolveOptions { t_end: 1.0, dt: 1e-3, snapshot_every: 1000 }).unwrap();
    assert!(traj.max_energy_drift() < 1e-8, "{}", traj.max_energy_drift());
    assert!(traj.max_momentum_drift() < 1e-10, "{}", traj.max_momentum_drift());
}

#[test]
fn short_time_solution_is_resolved() {
    let opts = |dt: f64| EaEvolveOptions { t_end: 0.1, dt, snapshot_every: 100_000 };
    let coarse = ea_evolve(&InertiaOp::new(1.0, 64).unwrap(), &smooth_initial(64), &opts(1e-3)).unwrap();
    let fine = ea_evolve(&InertiaOp::new(1.0, 128).unwrap(), &smooth_initial(128), &opts(5e-4)).unwrap();
    let (c, f) = (coarse.last().samples(), fine.last().samples());
    let err = (0..64).map(|j| (c[j] - f[2 * j]).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn time_stepping_is_fourth_order() {
    let op = InertiaOp::new(1.0, 128).unwrap();
    let run = |dt: f64| {
        ea_evolve(&op, &smooth_initial(128), &EaEvolveOptions { t_end: 1.0, dt, snapshot_every: 100_000 })
            .unwrap()
            .last()
            .clone()
    };
    let (a, b, c) = (run(0.04), run(0.02), run(0.01));
    let ratio = a.max_abs_diff(&b) / b.max_abs_diff(&c);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn path_energy_basics() {
    let op = InertiaOp::new(1.0, M).unwrap();
    let zero = vec![PeriodicField::zeros(M).unwrap(); 10];
    assert_eq!(op.path_energy(&zero, 0.1), 0.0);
    let u = field(M, f64::cos);
    let path = vec![u.clone(); 20];
    assert!((op.path_energy(&path, 0.05) - 0.5 * op.norm_sq(&u)).abs() < 1e-14);
}

#[test]
fn geodesic_energy_is_stationary() {
    let m = 128;
    let op = InertiaOp::new(1.0, m).unwrap();
    let n = 400;
    let dt = 1.0 / n as f64;
    // half steps so that odd snapshots sit at interval midpoints
    let traj = ea_evolve(&op, &smooth_initial(m), &EaEvolveOptions { t_end: 1.0, dt: 0.5 * dt, snapshot_every: 1 }).unwrap();
    let bumpy = random_field(77, m, 4);
    let mut mids = Vec::new();
    let mut variations = Vec::new();
    for i in 0..n {
        let t = (i as f64 + 0.5) * dt;
        let u = traj.fields[2 * i + 1].clone();
        let eta = &bumpy * (PI * t).sin();
        let eta_t = &bumpy * (PI * (PI * t).cos());
        // δu = η_t + u η_x − u_x η
        let transport = &u.product(&eta.derivative(1)) - &u.derivative(1).product(&eta);
        variations.push(&eta_t + &transport);
        mids.push(u);
    }
    let eps = 1e-4;
    let shifted = |sign: f64| -> Vec<PeriodicField> {
        mids.iter().zip(&variations).map(|(u, d)| u + &(d * (sign * eps))).collect()
    };
    let de = (op.path_energy(&shifted(1.0), dt) - op.path_energy(&shifted(-1.0), dt)) / (2.0 * eps);
    let energy = op.path_energy(&mids, dt);
    let scale = (energy * 2.0 * op.path_energy(&variations, dt)).sqrt();
    assert!((de / scale).abs() < 1e-4, "normalized derivative {}", de / scale);
    // a non-geodesic comparison path is not stationary
    let frozen: Vec<PeriodicField> = (0..n).map(|_| smooth_initial(m)).collect();
    let fv: Vec<PeriodicField> = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            let u = &frozen[i];
            let eta = &bumpy * (PI * t).sin();
            &(&bumpy * (PI * (PI * t).cos())) + &(&u.product(&eta.derivative(1)) - &u.derivative(1).product(&eta))
        })
        .collect();
    let d_frozen: f64 = frozen.iter().zip(&fv).map(|(u, d)| op.metric(u, d) * dt).sum();
    let s_frozen = (op.path_energy(&frozen, dt) * 2.0 * op.path_energy(&fv, dt)).sqrt();
    assert!((d_frozen / s_frozen).abs() > 1e-2);
}

#[test]
fn straight_path_lengths_match_quadrature() {
    // length of φ_t = x + t·d(x) in closed form by adaptive quadrature:
    // ∫₀¹ sqrt((1/2π)∫ d²(1 + t d') + s d'²/(1 + t d') dx) dt
    let target = field(64, |x| 0.2 + 0.05 * x.sin());
    let opts = VanishOptions { levels: 1, base_points: 256, base_slices: 64, iterations: 0, ..Default::default() };
    for (s, want) in [(0.0, 0.203100960115899), (1.0, 0.20615717844695247)] {
        let table = vanish_distance_experiment(&InertiaOp::new(s, 64).unwrap(), &target, &opts).unwrap();
        let got = table.rows[0].straight_length;
        assert!(common::rel_err(got, want) < 1e-4, "s={s}: {got} vs {want}");
    }
}

#[test]
fn vanish_rejects_folding_targets() {
    let op = InertiaOp::new(0.0, 64).unwrap();
    let target = field(64, |x| 1.5 * x.sin());
    assert!(matches!(
        vanish_distance_experiment(&op, &target, &VanishOptions::default()),
        Err(Error::NotDiffeo(_))
    ));
    let _ = TAU;
}

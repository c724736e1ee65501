mod common;

use diffgeo::hunter_saxton::{
    bump, bump_derivative, flat_path_energy, h1_path_energy, hs_distance, hs_evolve, hs_geodesic, hs_pde_rhs,
    r_inverse, r_map, DiffLine, FlatPoint, HsEvolveOptions, HsGeodesic, LineGrid,
};
use proptest::prelude::*;

fn grid(points: usize) -> LineGrid {
    LineGrid::new(-1.0, 3.0, points).unwrap()
}

/// `φ = Id + c·bump` with exact samples of `f` and `f'`.
fn bump_diffeo(g: LineGrid, c: f64, center: f64) -> DiffLine {
    let f = g.sample(|x| c * bump(x, center, 0.5));
    let fp = g.sample(|x| c * bump_derivative(x, center, 0.5));
    DiffLine::new(g, f, fp).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn path_energies_agree_through_the_square_root_map() {
    let g = grid(2048);
    let steps = 200;
    let dt = 1.0 / steps as f64;
    // a non-geodesic path from the identity
    let path: Vec<DiffLine> = (0..=steps)
        .map(|i| {
            let s = (std::f64::consts::FRAC_PI_2 * i as f64 * dt).sin();
            bump_diffeo(g, 0.2 * s, 0.2 * s)
        })
        .collect();
    let e_h1 = h1_path_energy(&path, dt).unwrap();
    let e_flat = flat_path_energy(&path, dt).unwrap();
    assert!(common::rel_err(e_h1, e_flat) < 1e-4, "{e_h1} vs {e_flat}");
}

#[test]
fn round_trip_is_second_order() {
    let mut errors = Vec::new();
    let sizes = [257usize, 513, 1025, 2049];
    for &m in &sizes {
        let phi = bump_diffeo(grid(m), 0.2, 0.1);
        let back = r_inverse(&r_map(&phi).unwrap()).unwrap();
        errors.push(max_diff(back.f(), phi.f()));
        assert!(max_diff(back.fp(), phi.fp()) < 1e-14);
    }
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "observed order {order} from {errors:?}");
    }
}

#[test]
fn forward_round_trip_is_exact() {
    let g = grid(401);
    let gamma = g.sample(|x| 0.7 * bump(x, 0.4, 0.5) - 0.5 * bump(x, 1.2, 0.3));
    let back = r_map(&r_inverse(&FlatPoint::new(g, gamma.clone()).unwrap()).unwrap()).unwrap();
    assert!(max_diff(back.gamma(), &gamma) < 1e-12);
}

#[test]
fn geodesics_are_straight_in_the_chart() {
    let g = grid(401);
    let geo = HsGeodesic::between(&bump_diffeo(g, 0.2, 0.0), &bump_diffeo(g, -0.2, 0.6)).unwrap();
    for i in 1..10 {
        let t = i as f64 / 10.0;
        let (a, b, c) = (geo.gamma_at(t - 0.1), geo.gamma_at(t), geo.gamma_at(t + 0.1));
        for j in 0..g.len() {
            assert!((a[j] - 2.0 * b[j] + c[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn frozen_distance_to_a_bump() {
    let g = grid(2049);
    let phi = DiffLine::from_derivative(g, g.sample(|x| 0.8 * bump(x, 0.0, 0.5))).unwrap();
    let d = hs_distance(&DiffLine::identity(g), &phi).unwrap();
    // adaptive-quadrature reference computed offline
    assert!((d - 0.4879285591128527).abs() < 1e-9, "{d}");
}

#[test]
fn sampled_geodesic_energy_is_squared_distance() {
    let g = grid(2048);
    let (p0, p1) = (bump_diffeo(g, 0.2, 0.0), bump_diffeo(g, -0.2, 0.6));
    let steps = 400;
    let path: Vec<DiffLine> = (0..=steps).map(|i| hs_geodesic(&p0, &p1, i as f64 / steps as f64).unwrap()).collect();
    let d2 = hs_distance(&p0, &p1).unwrap().powi(2);
    let dt = 1.0 / steps as f64;
    assert!(common::rel_err(flat_path_energy(&path, dt).unwrap(), d2) < 1e-4);
    let e = h1_path_energy(&path, dt).unwrap();
    assert!(common::rel_err(e, d2) < 1e-4, "{e} vs {d2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn triangle_inequality(c in prop::collection::vec(-0.2f64..0.2, 3), s in prop::collection::vec(-0.1f64..0.8, 3)) {
        let g = grid(301);
        let p: Vec<DiffLine> = (0..3).map(|i| bump_diffeo(g, c[i], s[i])).collect();
        let d = |a: usize, b: usize| hs_distance(&p[a], &p[b]).unwrap();
        prop_assert!(d(0, 1) + d(1, 2) - d(0, 2) >= -1e-12);
    }

    #[test]
    fn distinct_points_are_apart(c in 0.01f64..0.2, shift in 0.05f64..0.5) {
        let g = grid(301);
        prop_assert!(hs_distance(&bump_diffeo(g, c, 0.0), &bump_diffeo(g, c, shift)).unwrap() > 0.0);
    }

    #[test]
    fn geodesics_stay_in_the_chart(c0 in -0.2f64..0.2, c1 in -0.2f64..0.2, t in 0.0f64..=1.0) {
        let g = grid(301);
        prop_assert!(hs_geodesic(&bump_diffeo(g, c0, 0.0), &bump_diffeo(g, c1, 0.4), t).is_ok());
    }
}

fn initial_velocity(g: LineGrid, c: f64) -> (Vec<f64>, Vec<f64>) {
    (g.sample(|x| c * bump(x, 0.0, 0.5)), g.sample(|x| c * bump_derivative(x, 0.0, 0.5)))
}

#[test]
fn pde_follows_the_closed_form_geodesic() {
    let g = grid(2048);
    let (u0, u0x) = initial_velocity(g, 0.3);
    let traj = hs_evolve(&g, &u0, &HsEvolveOptions { t_end: 0.5, dt: 1e-3, slope_cap: 1e4, snapshot_every: 500 }).unwrap();
    let exact = HsGeodesic::from_identity(g, u0x).unwrap().eulerian_velocity(0.5).unwrap();
    let err = max_diff(traj.fields.last().unwrap(), &exact);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn rhs_is_the_time_derivative_of_the_closed_form() {
    let g = grid(4096);
    let (_, u0x) = initial_velocity(g, 0.3);
    let geo = HsGeodesic::from_identity(g, u0x).unwrap();
    let (t, dt) = (0.3, 1e-4);
    let u = geo.eulerian_velocity(t).unwrap();
    let du: Vec<f64> = geo
        .eulerian_velocity(t + dt)
        .unwrap()
        .iter()
        .zip(geo.eulerian_velocity(t - dt).unwrap())
        .map(|(a, b)| (a - b) / (2.0 * dt))
        .collect();
    assert!(max_diff(&hs_pde_rhs(&g, &u).unwrap(), &du) < 1e-3);
}

#[test]
fn time_stepping_is_fourth_order() {
    let g = grid(1024);
    let (u0, _) = initial_velocity(g, 0.3);
    let run = |dt: f64| {
        hs_evolve(&g, &u0, &HsEvolveOptions { t_end: 0.5, dt, slope_cap: 1e4, snapshot_every: 100_000 })
            .unwrap()
            .fields
            .pop()
            .unwrap()
    };
    let (a, b, c) = (run(0.02), run(0.01), run(0.005));
    let ratio = max_diff(&a, &b) / max_diff(&b, &c);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

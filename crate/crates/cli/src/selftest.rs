//! Fixed cases with known answers from every module.

use diffgeo::curvature::{force, riemann_fd_oracle, sectional_numerator, stress};
use diffgeo::dynamics::{
    cometric, energy, geodesic_accel, hamiltonian_rhs, horizontal_lift, metric, sharp, shoot, LandmarkState,
    ShootOptions,
};
use diffgeo::euler_arnold::{
    ad_star, ea_evolve, vanish_distance_experiment, EaEvolveOptions, InertiaOp, PeriodicField, VanishOptions,
};
use diffgeo::hunter_saxton::{
    bump, hs_distance, hs_evolve, hs_geodesic, hs_pde_rhs, r_inverse, r_map, DiffLine, FlatPoint, HsEvolveOptions,
    LineGrid,
};
use diffgeo::kernels::{kernel_matrix, kernel_solve, KernelSpec, LandmarkConfig};
use diffgeo::matching::{endpoint, match_landmarks, MatchMode, MatchProblem};
use diffgeo::ode::Integrator;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::CliError;
use crate::output::Report;

type Check = Result<(), String>;

fn ensure(ok: bool, what: impl Into<String>) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn close(got: f64, want: f64, tol: f64) -> Check {
    ensure((got - want).abs() <= tol, format!("got {got}, expected {want}"))
}

fn err(e: diffgeo::Error) -> String {
    e.to_string()
}

fn gauss() -> KernelSpec {
    KernelSpec::gaussian(1.0).expect("positive sigma")
}

fn line(points: &[f64]) -> LandmarkConfig {
    LandmarkConfig::from_rows(&points.iter().map(|p| vec![*p]).collect::<Vec<_>>()).expect("finite points")
}

fn col(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(values.len(), 1, values)
}

fn kernel_values() -> Check {
    let k = gauss();
    close(k.eval(&[0.0, 0.0]), 1.0, 0.0)?;
    close(KernelSpec::gaussian(2.0).map_err(err)?.eval(&[2.0, 0.0]), (-0.5f64).exp(), 1e-15)?;
    let g = k.grad(&[1.0, 0.0]);
    close(g[0], -(-0.5f64).exp(), 1e-15)?;
    close(g[1], 0.0, 0.0)?;
    let h = k.hess(&[0.0, 0.0]);
    ensure((h + DMatrix::identity(2, 2)).amax() < 1e-15, "Hessian at 0 is not -I")
}

fn kernel_matrices() -> Check {
    let k = gauss();
    let m = kernel_matrix(&k, &line(&[0.0, 1.0])).map_err(err)?;
    close(m[(0, 1)], (-0.5f64).exp(), 1e-15)?;
    close(m[(1, 1)], 1.0, 0.0)?;
    let q = line(&[0.0, 0.7, 2.0]);
    let x = col(&[0.3, -1.0, 2.0]);
    let back = kernel_solve(&k, &q, &(kernel_matrix(&k, &q).map_err(err)? * &x)).map_err(err)?;
    ensure((back - x).amax() < 1e-10, "solve round trip")
}

fn single_landmark_metric() -> Check {
    let k = gauss();
    let q = LandmarkConfig::from_rows(&[vec![0.3, -0.2]]).map_err(err)?;
    let p = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
    let v = DMatrix::from_row_slice(1, 2, &[-3.0, 0.5]);
    close(metric(&k, &q, &p, &v).map_err(err)?, -2.0, 1e-15)?;
    close(cometric(&k, &q, &p, &p).map_err(err)?, 5.0, 1e-15)?;
    close(energy(&k, &q, &p).map_err(err)?, 2.5, 1e-15)?;
    ensure(sharp(&k, &q, &p).map_err(err)? == p, "sharp at N=1")?;
    let lift = horizontal_lift(&k, &q, &p, &[1.3, -0.2]).map_err(err)?;
    close(lift[0], (-0.5f64).exp(), 1e-15)
}

fn cometric_cross_term() -> Check {
    let c = cometric(&gauss(), &line(&[0.0, 1.0]), &col(&[1.0, 0.0]), &col(&[0.0, 1.0])).map_err(err)?;
    close(c, (-0.5f64).exp(), 1e-15)
}

fn single_landmark_flow() -> Check {
    let k = gauss();
    let s = LandmarkState::new(LandmarkConfig::from_rows(&[vec![0.5, 0.5]]).map_err(err)?, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]))
        .map_err(err)?;
    let (dq, da) = hamiltonian_rhs(&k, &s).map_err(err)?;
    ensure(dq == s.alpha && da.amax() == 0.0, "N=1 Hamiltonian field")?;
    ensure(geodesic_accel(&k, &s.q, &s.alpha).map_err(err)?.amax() == 0.0, "N=1 acceleration")?;
    let path = shoot(&k, &s, &ShootOptions { t_end: 1.0, dt: 1e-2, integrator: Integrator::Rk4 }).map_err(err)?;
    let q = path.last().q.point(0);
    close(q[0], 1.5, 1e-14)?;
    close(q[1], 0.5, 1e-14)
}

fn momentum_balance() -> Check {
    let s = LandmarkState::new(line(&[0.0, 0.8, 1.9]), col(&[0.4, -1.0, 0.3])).map_err(err)?;
    let (_, da) = hamiltonian_rhs(&gauss(), &s).map_err(err)?;
    close(da.sum(), 0.0, 1e-15)
}

fn curvature_degenerate_cases() -> Check {
    let k = gauss();
    let q1 = LandmarkConfig::from_rows(&[vec![0.1, 0.2]]).map_err(err)?;
    let a1 = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
    let b1 = DMatrix::from_row_slice(1, 2, &[0.5, 2.0]);
    ensure(stress(&k, &q1, &a1, &b1).map_err(err)?.amax() == 0.0, "stress at N=1")?;
    ensure(force(&k, &q1, &a1, &a1).map_err(err)?.amax() == 0.0, "force at N=1")?;
    close(sectional_numerator(&k, &q1, &a1, &b1).map_err(err)?.numerator, 0.0, 1e-15)?;
    let q = line(&[0.0, 1.5]);
    let a = col(&[0.3, -0.7]);
    close(sectional_numerator(&k, &q, &a, &a).map_err(err)?.numerator, 0.0, 1e-15)?;
    let b = col(&[1.1, 0.4]);
    ensure(force(&k, &q, &a, &b).map_err(err)? == force(&k, &q, &b, &a).map_err(err)?, "force symmetry")?;
    let (pa, pb) = (sharp(&k, &q, &a).map_err(err)?, sharp(&k, &q, &b).map_err(err)?);
    let (x, y) = (riemann_fd_oracle(&k, &q, &pa, &pb).map_err(err)?, riemann_fd_oracle(&k, &q, &pb, &pa).map_err(err)?);
    close(x, y, 1e-8)
}

fn matching_trivial_cases() -> Check {
    let k = gauss();
    let q0 = LandmarkConfig::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.5]]).map_err(err)?;
    let still = endpoint(&k, &q0, &DMatrix::zeros(2, 2), 1e-2, Integrator::Rk4).map_err(err)?;
    ensure(still == q0, "zero momentum moves the landmarks")?;
    let same = match_landmarks(&MatchProblem::new(q0.clone(), q0, k, MatchMode::Exact).map_err(err)?).map_err(err)?;
    ensure(same.alpha0.amax() == 0.0 && same.iterations <= 1, "identical endpoints need zero momentum")?;
    let a = LandmarkConfig::from_rows(&[vec![0.2, -0.4]]).map_err(err)?;
    let b = LandmarkConfig::from_rows(&[vec![1.5, 0.9]]).map_err(err)?;
    let one = match_landmarks(&MatchProblem::new(a, b, k, MatchMode::Exact).map_err(err)?).map_err(err)?;
    close(one.alpha0[(0, 0)], 1.3, 1e-12)?;
    close(one.alpha0[(0, 1)], 1.3, 1e-12)
}

fn square_root_map() -> Check {
    let g = LineGrid::new(-1.0, 3.0, 401).map_err(err)?;
    let id = DiffLine::identity(g);
    ensure(r_map(&id).map_err(err)?.gamma().iter().all(|v| *v == 0.0), "identity maps to 0")?;
    let centre = 150;
    let phi = DiffLine::from_derivative(g, g.sample(|x| 3.0 * bump(x, 0.5, 0.5))).map_err(err)?;
    close(r_map(&phi).map_err(err)?.gamma()[centre], 2.0, 1e-12)?;
    let gamma = FlatPoint::new(g, g.sample(|x| 2.0 * bump(x, 0.5, 0.5))).map_err(err)?;
    close(r_inverse(&gamma).map_err(err)?.fp()[centre], 3.0, 1e-12)?;
    let back = r_map(&r_inverse(&gamma).map_err(err)?).map_err(err)?;
    ensure(back.gamma().iter().zip(gamma.gamma()).all(|(a, b)| (a - b).abs() < 1e-12), "forward round trip")
}

fn hunter_saxton_trivial_cases() -> Check {
    let g = LineGrid::new(-1.0, 3.0, 401).map_err(err)?;
    let phi = DiffLine::from_derivative(g, g.sample(|x| 0.8 * bump(x, 0.0, 0.5))).map_err(err)?;
    close(hs_distance(&phi, &phi).map_err(err)?, 0.0, 0.0)?;
    let id = DiffLine::identity(g);
    let gamma = r_map(&phi).map_err(err)?;
    let norm = g.integrate(&gamma.gamma().iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    close(hs_distance(&id, &phi).map_err(err)?, norm, 1e-14)?;
    let mid = hs_geodesic(&phi, &phi, 0.5).map_err(err)?;
    ensure(mid.fp().iter().zip(phi.fp()).all(|(a, b)| (a - b).abs() < 1e-14), "constant path")?;
    let zero = vec![0.0; g.len()];
    ensure(hs_pde_rhs(&g, &zero).map_err(err)?.iter().all(|v| *v == 0.0), "rhs of zero")?;
    let traj = hs_evolve(&g, &zero, &HsEvolveOptions { t_end: 0.1, dt: 1e-2, slope_cap: 1e4, snapshot_every: 5 }).map_err(err)?;
    ensure(traj.fields.iter().all(|u| u.iter().all(|v| *v == 0.0)), "zero data stays zero")
}

fn field(f: impl Fn(f64) -> f64) -> Result<PeriodicField, String> {
    PeriodicField::from_fn(32, f).map_err(err)
}

fn inertia_trivial_cases() -> Check {
    let (c, s) = (field(f64::cos)?, field(f64::sin)?);
    let l2 = InertiaOp::new(0.0, 32).map_err(err)?;
    let h1 = InertiaOp::new(1.0, 32).map_err(err)?;
    ensure(l2.apply(&c).max_abs_diff(&c) < 1e-15, "L = I at s = 0")?;
    ensure(h1.apply(&c).max_abs_diff(&(&c * 2.0)) < 1e-13, "L cos = 2 cos at s = 1")?;
    let m = PeriodicField::constant(32, 0.7).map_err(err)?;
    ensure(h1.invert(&m).max_abs_diff(&m) < 1e-15, "K of a constant")?;
    close(l2.metric(&c, &c), 0.5, 1e-15)?;
    close(h1.metric(&c, &s), 0.0, 1e-15)?;
    ensure(ad_star(&m, &m).max_abs() < 1e-15, "ad* of constants")?;
    ensure(ad_star(&c, &c).max_abs_diff(&field(|x| -1.5 * (2.0 * x).sin())?) < 1e-13, "ad*(cos, cos)")?;
    ensure(l2.rhs(&c).max_abs_diff(&field(|x| 1.5 * (2.0 * x).sin())?) < 1e-13, "Burgers rhs of cos")
}

fn euler_arnold_trivial_cases() -> Check {
    let h1 = InertiaOp::new(1.0, 32).map_err(err)?;
    let u0 = PeriodicField::constant(32, 0.4).map_err(err)?;
    let tr = ea_evolve(&h1, &u0, &EaEvolveOptions { t_end: 0.2, dt: 0.01, snapshot_every: 5 }).map_err(err)?;
    ensure(tr.last().max_abs_diff(&u0) < 1e-14, "constant data is stationary")?;
    let (x, y) = (field(f64::cos)?, field(|t| t.sin() + 0.5 * (2.0 * t).cos())?);
    ensure(h1.rho(&x, &y).max_abs_diff(&h1.rho(&y, &x)) < 1e-12, "rho symmetry")?;
    close(h1.sectional_numerator(&x, &x), 0.0, 1e-12)?;
    close(h1.arnold_numerator(&x, &x).map_err(err)?, 0.0, 1e-12)?;
    let low = InertiaOp::new(0.25, 32).map_err(err)?;
    ensure(matches!(low.arnold_numerator(&x, &y), Err(diffgeo::Error::OrderTooLow { .. })), "s = 0.25 is refused")?;
    let zero = vec![PeriodicField::zeros(32).map_err(err)?; 4];
    close(h1.path_energy(&zero, 0.25), 0.0, 0.0)?;
    close(h1.path_energy(&vec![x.clone(); 4], 0.25), 0.5 * h1.norm_sq(&x), 1e-15)
}

fn vanish_zero_target() -> Check {
    let op = InertiaOp::new(0.0, 32).map_err(err)?;
    let opts = VanishOptions { levels: 2, base_points: 32, base_slices: 8, iterations: 2, ..Default::default() };
    let t = vanish_distance_experiment(&op, &PeriodicField::zeros(32).map_err(err)?, &opts).map_err(err)?;
    ensure(t.rows.iter().all(|r| r.length == 0.0), "zero target has zero length")
}

#[derive(Serialize)]
struct Outcome {
    name: &'static str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

pub fn run() -> Result<Report, CliError> {
    let checks: [(&'static str, fn() -> Check); 14] = [
        ("kernel_values", kernel_values),
        ("kernel_matrices", kernel_matrices),
        ("single_landmark_metric", single_landmark_metric),
        ("cometric_cross_term", cometric_cross_term),
        ("single_landmark_flow", single_landmark_flow),
        ("momentum_balance", momentum_balance),
        ("curvature_degenerate_cases", curvature_degenerate_cases),
        ("matching_trivial_cases", matching_trivial_cases),
        ("square_root_map", square_root_map),
        ("hunter_saxton_trivial_cases", hunter_saxton_trivial_cases),
        ("inertia_trivial_cases", inertia_trivial_cases),
        ("euler_arnold_trivial_cases", euler_arnold_trivial_cases),
        ("vanish_zero_target", vanish_zero_target),
        ("fd_oracle_single_landmark", || {
            let q = LandmarkConfig::from_rows(&[vec![0.0, 0.0]]).map_err(err)?;
            let p = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
            close(riemann_fd_oracle(&gauss(), &q, &p, &p).map_err(err)?, 0.0, 0.0)
        }),
    ];
    let outcomes: Vec<Outcome> = checks
        .iter()
        .map(|(name, check)| {
            let result = check();
            Outcome { name, passed: result.is_ok(), detail: result.err() }
        })
        .collect();
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    let report = Report::new(serde_json::json!({ "passed": outcomes.len() - failed.len(), "failed": failed.len(), "checks": outcomes }))?;
    Ok(if failed.is_empty() {
        report
    } else {
        report.failing(CliError::CheckFailed(format!("self-test failed: {}", failed.join(", "))))
    })
}

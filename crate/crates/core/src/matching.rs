//! Geodesic matching on landmark space: find initial momenta so the geodesic
//! from `q0` reaches `q1` (exact mode) or balances energy against the endpoint
//! mismatch (inexact mode).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_shape, flat, pack_rows, rhs_flat, step_plan, LandmarkState};
use crate::error::{Error, Result};
use crate::kernels::{gram, min_pair_distance, KernelFactor, KernelSpec, LandmarkConfig};
use crate::ode::{implicit_midpoint_step, rk4_step, Integrator, Rk4Work};

/// Data term handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatchMode {
    Exact,
    /// Minimize `E(q0, α0) + λ ‖q(1) − q1‖²`.
    Inexact { lambda: f64 },
}

/// How the endpoint Jacobian is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianBackend {
    /// Central differences of the endpoint map.
    #[default]
    FiniteDifference,
    /// Tangent-linear propagation through the RK4 stages.
    Tangent,
}

/// Numerical settings shared by all matching problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchSettings {
    pub dt: f64,
    pub integrator: Integrator,
    pub backend: JacobianBackend,
    pub max_iterations: usize,
    /// Target for the largest per-landmark endpoint error (exact mode) or the
    /// gradient norm (inexact mode).
    pub tolerance: f64,
}

impl Default for MatchSettings {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            integrator: Integrator::Rk4,
            backend: JacobianBackend::FiniteDifference,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

/// A boundary-value problem on landmark space over the unit time interval.
#[derive(Debug, Clone)]
pub struct MatchProblem {
    pub q0: LandmarkConfig,
    pub q1: LandmarkConfig,
    pub kernel: KernelSpec,
    pub mode: MatchMode,
    pub settings: MatchSettings,
}

/// Outcome of a matching run.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub alpha0: DMatrix<f64>,
    /// Largest Euclidean distance between a shot landmark and its target.
    pub endpoint_error: f64,
    /// `E(q0, α0)`, the kinetic energy of the geodesic.
    pub path_energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Serializable view of a [`MatchResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub alpha0: Vec<Vec<f64>>,
    pub endpoint_error: f64,
    pub path_energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&MatchResult> for MatchRecord {
    fn from(r: &MatchResult) -> Self {
        Self {
            alpha0: (0..r.alpha0.nrows()).map(|i| r.alpha0.row(i).iter().copied().collect()).collect(),
            endpoint_error: r.endpoint_error,
            path_energy: r.path_energy,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

impl MatchProblem {
    pub fn new(q0: LandmarkConfig, q1: LandmarkConfig, kernel: KernelSpec, mode: MatchMode) -> Result<Self> {
        if q0.num_points() != q1.num_points() || q0.dim() != q1.dim() {
            return Err(Error::invalid(format!(
                "source has {}x{} landmarks, target has {}x{}",
                q0.num_points(),
                q0.dim(),
                q1.num_points(),
                q1.dim()
            )));
        }
        if let MatchMode::Inexact { lambda } = mode {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
            }
        }
        q0.check_separation(kernel.min_separation())?;
        q1.check_separation(kernel.min_separation())?;
        Ok(Self { q0, q1, kernel, mode, settings: MatchSettings::default() })
    }

    pub fn with_settings(mut self, settings: MatchSettings) -> Self {
        self.settings = settings;
        self
    }
}

/// Landmark positions at `t = 1` of the geodesic with initial momenta `alpha0`.
pub fn endpoint(
    k: &KernelSpec,
    q0: &LandmarkConfig,
    alpha0: &DMatrix<f64>,
    dt: f64,
    integrator: Integrator,
) -> Result<LandmarkConfig> {
    let state = LandmarkState::new(q0.clone(), alpha0.clone())?;
    let y = shoot_flat(k, &state, dt, integrator)?;
    let (npts, dim) = (q0.num_points(), q0.dim());
    LandmarkConfig::new(DMatrix::from_row_slice(npts, dim, &y[..npts * dim]))
}

fn shoot_flat(k: &KernelSpec, state: &LandmarkState, dt: f64, integrator: Integrator) -> Result<Vec<f64>> {
    let (steps, last_dt) = step_plan(1.0, dt)?;
    let (npts, dim) = (state.q.num_points(), state.q.dim());
    let mut y = state.to_flat();
    let mut f = |y: &[f64], dy: &mut [f64]| rhs_flat(k, npts, dim, y, dy);
    let mut work = Rk4Work::new(y.len());
    for step in 0..steps {
        let h = if step + 1 == steps { last_dt } else { dt };
        match integrator {
            Integrator::Rk4 => rk4_step(&mut f, &mut y, h, &mut work),
            Integrator::ImplicitMidpoint => {
                implicit_midpoint_step(&mut f, &mut y, h)?;
            }
        }
    }
    let qm = DMatrix::from_row_slice(npts, dim, &y[..npts * dim]);
    if y.iter().any(|v| !v.is_finite()) || min_pair_distance(&qm) <= k.min_separation() {
        return Err(Error::DegenerateConfig("landmarks collided before t = 1".into()));
    }
    Ok(y)
}

/// Jacobian of the Hamiltonian vector field on the flat state `[q, α]`.
pub(crate) fn rhs_jacobian(k: &KernelSpec, npts: usize, dim: usize, y: &[f64]) -> DMatrix<f64> {
    let m = npts * dim;
    let (q, a) = y.split_at(m);
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    let k0 = k.radial_sq(0.0).value;
    for p in 0..npts {
        for c in 0..dim {
            jac[(p * dim + c, m + p * dim + c)] += k0;
        }
        for i in 0..npts {
            if i == p {
                continue;
            }
            let r: Vec<f64> = (0..dim).map(|c| q[p * dim + c] - q[i * dim + c]).collect();
            let kv = k.eval(&r);
            let g = k.grad(&r);
            let hs = k.hess(&r);
            let ap = &a[p * dim..(p + 1) * dim];
            let ai = &a[i * dim..(i + 1) * dim];
            let w: f64 = ap.iter().zip(ai).map(|(x, z)| x * z).sum();
            for c in 0..dim {
                let row_q = p * dim + c;
                let row_a = m + p * dim + c;
                jac[(row_q, m + i * dim + c)] += kv;
                for d in 0..dim {
                    // position rows
                    jac[(row_q, p * dim + d)] += ai[c] * g[d];
                    jac[(row_q, i * dim + d)] -= ai[c] * g[d];
                    // momentum rows
                    jac[(row_a, m + p * dim + d)] -= g[c] * ai[d];
                    jac[(row_a, m + i * dim + d)] -= g[c] * ap[d];
                    jac[(row_a, p * dim + d)] -= hs[(c, d)] * w;
                    jac[(row_a, i * dim + d)] += hs[(c, d)] * w;
                }
            }
        }
    }
    jac
}

/// Endpoint Jacobian `∂q(1)/∂α0` by tangent-linear RK4. Only the RK4 scheme is
/// supported.
pub fn endpoint_jacobian_tangent(
    k: &KernelSpec,
    q0: &LandmarkConfig,
    alpha0: &DMatrix<f64>,
    dt: f64,
) -> Result<DMatrix<f64>> {
    let state = LandmarkState::new(q0.clone(), alpha0.clone())?;
    let (steps, last_dt) = step_plan(1.0, dt)?;
    let (npts, dim) = (q0.num_points(), q0.dim());
    let m = npts * dim;
    let mut y = DVector::from_vec(state.to_flat());
    let mut s = DMatrix::zeros(2 * m, m);
    for i in 0..m {
        s[(m + i, i)] = 1.0;
    }
    let field = |y: &DVector<f64>| {
        let mut dy = vec![0.0; 2 * m];
        rhs_flat(k, npts, dim, y.as_slice(), &mut dy);
        DVector::from_vec(dy)
    };
    for step in 0..steps {
        let h = if step + 1 == steps { last_dt } else { dt };
        let k1 = field(&y);
        let s1 = rhs_jacobian(k, npts, dim, y.as_slice()) * &s;
        let y2 = &y + &k1 * (0.5 * h);
        let k2 = field(&y2);
        let s2 = rhs_jacobian(k, npts, dim, y2.as_slice()) * (&s + &s1 * (0.5 * h));
        let y3 = &y + &k2 * (0.5 * h);
        let k3 = field(&y3);
        let s3 = rhs_jacobian(k, npts, dim, y3.as_slice()) * (&s + &s2 * (0.5 * h));
        let y4 = &y + &k3 * h;
        let k4 = field(&y4);
        let s4 = rhs_jacobian(k, npts, dim, y4.as_slice()) * (&s + &s3 * h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        s += (s1 + s2 * 2.0 + s3 * 2.0 + s4) * (h / 6.0);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateConfig("non-finite state while propagating tangents".into()));
    }
    Ok(s.rows(0, m).into_owned())
}

/// Endpoint Jacobian by central differences with relative step `rel_step`.
pub fn endpoint_jacobian_fd(
    k: &KernelSpec,
    q0: &LandmarkConfig,
    alpha0: &DMatrix<f64>,
    dt: f64,
    integrator: Integrator,
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    check_shape(q0, alpha0, "alpha0")?;
    let (npts, dim) = (q0.num_points(), q0.dim());
    let m = npts * dim;
    let cols: Vec<Result<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let (i, c) = (j / dim, j % dim);
            let h = rel_step * alpha0[(i, c)].abs().max(1.0);
            let mut ap = alpha0.clone();
            let mut am = alpha0.clone();
            ap[(i, c)] += h;
            am[(i, c)] -= h;
            let ep = endpoint(k, q0, &ap, dt, integrator)?;
            let em = endpoint(k, q0, &am, dt, integrator)?;
            let diff = (ep.as_matrix() - em.as_matrix()) / (2.0 * h);
            let mut col = Vec::with_capacity(m);
            pack_rows(&diff, &mut col);
            Ok(col)
        })
        .collect();
    let mut jac = DMatrix::zeros(m, m);
    for (j, col) in cols.into_iter().enumerate() {
        for (r, v) in col?.into_iter().enumerate() {
            jac[(r, j)] = v;
        }
    }
    Ok(jac)
}

fn max_landmark_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (0..a.nrows()).map(|i| (a.row(i) - b.row(i)).norm()).fold(0.0, f64::max)
}

struct Evaluation {
    residual: DVector<f64>,
    objective: f64,
    endpoint: DMatrix<f64>,
}

struct Solver<'a> {
    p: &'a MatchProblem,
    npts: usize,
    dim: usize,
    /// `Lᵀ ⊗ I` with `K(q0) = L Lᵀ`, used by the inexact energy term.
    energy_root: Option<DMatrix<f64>>,
    data_weight: f64,
}

impl<'a> Solver<'a> {
    fn new(p: &'a MatchProblem) -> Result<Self> {
        let (npts, dim) = (p.q0.num_points(), p.q0.dim());
        let (energy_root, data_weight) = match p.mode {
            MatchMode::Exact => (None, 1.0),
            MatchMode::Inexact { lambda } => {
                let l = KernelFactor::new(&p.kernel, &p.q0)?.lower();
                let m = npts * dim;
                let lt = DMatrix::from_fn(m, m, |r, c| {
                    if r % dim == c % dim {
                        l[(c / dim, r / dim)]
                    } else {
                        0.0
                    }
                });
                (Some(lt), (2.0 * lambda).sqrt())
            }
        };
        Ok(Self { p, npts, dim, energy_root, data_weight })
    }

    fn flat_vec(&self, a: &DMatrix<f64>) -> DVector<f64> {
        let mut v = Vec::with_capacity(a.len());
        pack_rows(a, &mut v);
        DVector::from_vec(v)
    }

    fn unflat(&self, v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.npts, self.dim, v.as_slice())
    }

    fn evaluate(&self, a: &DMatrix<f64>) -> Result<Evaluation> {
        let s = &self.p.settings;
        let e = endpoint(&self.p.kernel, &self.p.q0, a, s.dt, s.integrator)?;
        let mismatch = self.flat_vec(&(e.as_matrix() - self.p.q1.as_matrix())) * self.data_weight;
        let residual = match &self.energy_root {
            None => mismatch,
            Some(lt) => {
                let top = lt * self.flat_vec(a);
                let mut v = top.as_slice().to_vec();
                v.extend_from_slice(mismatch.as_slice());
                DVector::from_vec(v)
            }
        };
        let objective = 0.5 * residual.norm_squared();
        Ok(Evaluation { residual, objective, endpoint: e.into_matrix() })
    }

    fn jacobian(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let s = &self.p.settings;
        let je = match s.backend {
            JacobianBackend::FiniteDifference => {
                endpoint_jacobian_fd(&self.p.kernel, &self.p.q0, a, s.dt, s.integrator, 1e-6)?
            }
            JacobianBackend::Tangent => {
                if s.integrator != Integrator::Rk4 {
                    return Err(Error::invalid("the tangent backend requires the RK4 integrator"));
                }
                endpoint_jacobian_tangent(&self.p.kernel, &self.p.q0, a, s.dt)?
            }
        } * self.data_weight;
        Ok(match &self.energy_root {
            None => je,
            Some(lt) => {
                let m = je.ncols();
                let mut full = DMatrix::zeros(2 * m, m);
                full.rows_mut(0, m).copy_from(lt);
                full.rows_mut(m, m).copy_from(&je);
                full
            }
        })
    }

    fn converged(&self, ev: &Evaluation, grad_norm: Option<f64>) -> bool {
        let tol = self.p.settings.tolerance;
        match self.p.mode {
            MatchMode::Exact => max_landmark_distance(&ev.endpoint, self.p.q1.as_matrix()) <= tol,
            MatchMode::Inexact { .. } => grad_norm.is_some_and(|g| g <= tol * (1.0 + ev.objective)),
        }
    }

    fn result(&self, a: &DMatrix<f64>, ev: &Evaluation, iterations: usize, converged: bool) -> MatchResult {
        let km = gram(&self.p.kernel, self.p.q0.as_matrix());
        MatchResult {
            alpha0: a.clone(),
            endpoint_error: max_landmark_distance(&ev.endpoint, self.p.q1.as_matrix()),
            path_energy: 0.5 * a.component_mul(&(km * a)).sum(),
            iterations,
            converged,
        }
    }

    fn run(&self) -> Result<MatchResult> {
        let settings = &self.p.settings;
        let mut a = flat(&self.p.kernel, &self.p.q0, &(self.p.q1.as_matrix() - self.p.q0.as_matrix()))?;
        let mut ev = self.evaluate(&a)?;
        if self.converged(&ev, None) {
            return Ok(self.result(&a, &ev, 0, true));
        }
        for iter in 1..=settings.max_iterations {
            let jac = self.jacobian(&a)?;
            let grad = jac.transpose() * &ev.residual;
            if self.converged(&ev, Some(grad.amax())) {
                return Ok(self.result(&a, &ev, iter - 1, true));
            }
            let step = jac
                .clone()
                .svd(true, true)
                .solve(&(-&ev.residual), 1e-14 * jac.amax().max(f64::MIN_POSITIVE))
                .map_err(|e| Error::NotConverged { reason: format!("Gauss-Newton solve failed: {e}"), best: None })?;
            let slope = grad.dot(&step);
            let base = self.flat_vec(&a);
            let mut t = 1.0;
            let mut accepted = None;
            while t >= 1e-10 {
                let trial = self.unflat(&(&base + &step * t));
                if let Ok(tev) = self.evaluate(&trial) {
                    if tev.objective <= ev.objective + 1e-4 * t * slope.min(0.0) && tev.objective < ev.objective {
                        accepted = Some((trial, tev));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((na, nev)) => {
                    a = na;
                    ev = nev;
                }
                None => {
                    let resolved = grad.amax() <= 1e-8 * (1.0 + ev.objective)
                        || -slope <= 1e-12 * (1.0 + ev.objective);
                    if matches!(self.p.mode, MatchMode::Inexact { .. }) && resolved {
                        // The model decrease is below what the objective can resolve.
                        return Ok(self.result(&a, &ev, iter - 1, true));
                    }
                    let best = self.result(&a, &ev, iter - 1, false);
                    return Err(Error::NotConverged {
                        reason: format!("line search stalled at iteration {iter}"),
                        best: Some(Box::new(best)),
                    });
                }
            }
            if self.converged(&ev, None) {
                return Ok(self.result(&a, &ev, iter, true));
            }
        }
        let best = self.result(&a, &ev, settings.max_iterations, false);
        Err(Error::NotConverged {
            reason: format!("iteration cap {} reached", settings.max_iterations),
            best: Some(Box::new(best)),
        })
    }
}

/// Solve a matching problem by damped Gauss–Newton from `α0 = flat(q1 − q0)`.
pub fn match_landmarks(problem: &MatchProblem) -> Result<MatchResult> {
    Solver::new(problem)?.run()
}

/// Solve independent problems concurrently; results keep the input order.
pub fn match_batch(problems: &[MatchProblem]) -> Vec<Result<MatchResult>> {
    problems.par_iter().map(match_landmarks).collect()
}

//! Metric, cometric and geodesics on landmark space.
//!
//! Tangent vectors `P` and covectors `α` are `N × n` matrices whose rows belong
//! to the individual landmarks. The kernel matrix acts blockwise: the cometric
//! is `Σ K(q)_ij ⟨α_i, β_j⟩` and the metric uses `K(q)⁻¹` the same way.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram, min_pair_distance, KernelFactor, KernelSpec, LandmarkConfig};
use crate::ode::{dopri5, implicit_midpoint_step, rk4_step, AdaptiveTolerance, Integrator, Rk4Work};

pub(crate) fn check_shape(q: &LandmarkConfig, m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.shape() != (q.num_points(), q.dim()) {
        return Err(Error::invalid(format!(
            "{what} has shape {:?}, expected ({}, {})",
            m.shape(),
            q.num_points(),
            q.dim()
        )));
    }
    Ok(())
}

/// Frobenius pairing `Σ_i ⟨a_i, b_i⟩` between a covector and a tangent vector.
pub fn pairing(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// `g_q(P, Q) = Σ K⁻¹(q)_kl ⟨P_k, Q_l⟩`.
pub fn metric(k: &KernelSpec, q: &LandmarkConfig, p: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    check_shape(q, p, "P")?;
    check_shape(q, v, "Q")?;
    let f = KernelFactor::new(k, q)?;
    Ok(pairing(p, &f.solve(v)?))
}

/// `g_q⁻¹(α, β) = Σ K(q)_ij ⟨α_i, β_j⟩`. No linear solve is involved.
pub fn cometric(k: &KernelSpec, q: &LandmarkConfig, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_shape(q, a, "alpha")?;
    check_shape(q, b, "beta")?;
    Ok(pairing(a, &(gram(k, q.as_matrix()) * b)))
}

/// `α♯_k = Σ_i K(q_k − q_i) α_i`.
pub fn sharp(k: &KernelSpec, q: &LandmarkConfig, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shape(q, a, "alpha")?;
    Ok(gram(k, q.as_matrix()) * a)
}

/// The covector `α` with `α♯ = P`.
pub fn flat(k: &KernelSpec, q: &LandmarkConfig, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shape(q, p, "P")?;
    KernelFactor::new(k, q)?.solve(p)
}

/// `E(q, α) = ½ Σ K(q)_ij ⟨α_i, α_j⟩`.
pub fn energy(k: &KernelSpec, q: &LandmarkConfig, a: &DMatrix<f64>) -> Result<f64> {
    Ok(0.5 * cometric(k, q, a, a)?)
}

/// Minimal-norm vector field on `Rⁿ` inducing the landmark velocity `P`.
#[derive(Debug, Clone)]
pub struct HorizontalLift {
    kernel: KernelSpec,
    points: DMatrix<f64>,
    coeffs: DMatrix<f64>,
}

impl HorizontalLift {
    pub fn new(k: &KernelSpec, q: &LandmarkConfig, p: &DMatrix<f64>) -> Result<Self> {
        let coeffs = flat(k, q, p)?;
        Ok(Self { kernel: *k, points: q.as_matrix().clone(), coeffs })
    }

    /// `P^hor(x) = Σ_i K(x − q_i) (K⁻¹ P)_i`.
    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        let n = self.points.ncols();
        if x.len() != n {
            return Err(Error::invalid("evaluation point has the wrong dimension"));
        }
        let mut out = DVector::zeros(n);
        let mut r = vec![0.0; n];
        for i in 0..self.points.nrows() {
            for c in 0..n {
                r[c] = x[c] - self.points[(i, c)];
            }
            let w = self.kernel.eval(&r);
            for c in 0..n {
                out[c] += w * self.coeffs[(i, c)];
            }
        }
        Ok(out)
    }

    /// The covector `K(q)⁻¹ P` carried by the lift.
    pub fn momentum(&self) -> &DMatrix<f64> {
        &self.coeffs
    }
}

pub fn horizontal_lift(k: &KernelSpec, q: &LandmarkConfig, p: &DMatrix<f64>, x: &[f64]) -> Result<DVector<f64>> {
    HorizontalLift::new(k, q, p)?.eval(x)
}

/// A phase point `(q, α)` of the cotangent bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkState {
    pub q: LandmarkConfig,
    pub alpha: DMatrix<f64>,
}

impl LandmarkState {
    pub fn new(q: LandmarkConfig, alpha: DMatrix<f64>) -> Result<Self> {
        check_shape(&q, &alpha, "alpha")?;
        if alpha.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("momenta must be finite"));
        }
        Ok(Self { q, alpha })
    }

    pub fn energy(&self, k: &KernelSpec) -> f64 {
        0.5 * pairing(&self.alpha, &(gram(k, self.q.as_matrix()) * &self.alpha))
    }

    /// Sum of all momenta; conserved by translation invariance.
    pub fn total_momentum(&self) -> DVector<f64> {
        self.alpha.row_sum().transpose()
    }

    pub(crate) fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.alpha.len());
        pack_rows(self.q.as_matrix(), &mut y);
        pack_rows(&self.alpha, &mut y);
        y
    }

    pub(crate) fn from_flat(npts: usize, dim: usize, y: &[f64]) -> Result<Self> {
        let m = npts * dim;
        let q = LandmarkConfig::new(DMatrix::from_row_slice(npts, dim, &y[..m]))?;
        Self::new(q, DMatrix::from_row_slice(npts, dim, &y[m..2 * m]))
    }
}

pub(crate) fn pack_rows(m: &DMatrix<f64>, out: &mut Vec<f64>) {
    for i in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(i, c)]);
        }
    }
}

/// Hamiltonian vector field on the flat state `[q rows, α rows]`.
pub(crate) fn rhs_flat(k: &KernelSpec, npts: usize, dim: usize, y: &[f64], dy: &mut [f64]) {
    let m = npts * dim;
    let (q, a) = y.split_at(m);
    let (dq, da) = dy.split_at_mut(m);
    dq.fill(0.0);
    da.fill(0.0);
    let k0 = k.radial_sq(0.0).value;
    let mut r = vec![0.0; dim];
    for p in 0..npts {
        for c in 0..dim {
            dq[p * dim + c] += k0 * a[p * dim + c];
        }
        for i in 0..p {
            let mut rho2 = 0.0;
            let mut ai_ap = 0.0;
            for c in 0..dim {
                r[c] = q[p * dim + c] - q[i * dim + c];
                rho2 += r[c] * r[c];
                ai_ap += a[p * dim + c] * a[i * dim + c];
            }
            let rad = k.radial_sq(rho2);
            for c in 0..dim {
                dq[p * dim + c] += rad.value * a[i * dim + c];
                dq[i * dim + c] += rad.value * a[p * dim + c];
                // -grad K(q_p - q_i) <α_p, α_i>, and the odd image for i.
                let g = rad.slope * r[c] * ai_ap;
                da[p * dim + c] -= g;
                da[i * dim + c] += g;
            }
        }
    }
}

/// `(dq, dα)` of the geodesic flow: `dq = α♯` and
/// `dα_k = −Σ_i grad K(q_k − q_i) ⟨α_k, α_i⟩`, the negative `q`-gradient of the
/// energy.
pub fn hamiltonian_rhs(k: &KernelSpec, state: &LandmarkState) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    state.q.check_separation(k.min_separation())?;
    let (npts, dim) = (state.q.num_points(), state.q.dim());
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    rhs_flat(k, npts, dim, &y, &mut dy);
    let m = npts * dim;
    Ok((
        DMatrix::from_row_slice(npts, dim, &dy[..m]),
        DMatrix::from_row_slice(npts, dim, &dy[m..]),
    ))
}

/// Second derivative of the landmark positions from the velocity form of the
/// geodesic equation, evaluated with the explicit inverse kernel matrix.
pub fn geodesic_accel(k: &KernelSpec, q: &LandmarkConfig, qdot: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shape(q, qdot, "qdot")?;
    let factor = KernelFactor::new(k, q)?;
    Ok(accel_with(k, q.as_matrix(), factor.matrix(), &factor.inverse(), qdot))
}

fn accel_with(
    k: &KernelSpec,
    q: &DMatrix<f64>,
    kq: &DMatrix<f64>,
    kinv: &DMatrix<f64>,
    qdot: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (npts, dim) = q.shape();
    // w_ij = Σ_{k,l} K⁻¹_ki K⁻¹_jl <q̇_k, q̇_l>
    let gq = qdot * qdot.transpose();
    let w = kinv * gq * kinv;
    // c_i = Σ_k K⁻¹_ki q̇_k
    let c = kinv * qdot;
    let mut acc = DMatrix::zeros(npts, dim);
    let mut r = vec![0.0; dim];
    for i in 0..npts {
        for j in 0..npts {
            if i == j {
                continue;
            }
            for d in 0..dim {
                r[d] = q[(i, d)] - q[(j, d)];
            }
            let g = k.grad(&r);
            for target in 0..npts {
                let coef = -0.5 * (kq[(i, target)] - kq[(j, target)]) * w[(i, j)];
                for d in 0..dim {
                    acc[(target, d)] += coef * g[d];
                }
            }
        }
    }
    for target in 0..npts {
        for i in 0..npts {
            if i == target {
                continue;
            }
            for d in 0..dim {
                r[d] = q[(i, d)] - q[(target, d)];
            }
            let g = k.grad(&r);
            let mut s = 0.0;
            for d in 0..dim {
                s += g[d] * (qdot[(i, d)] - qdot[(target, d)]);
            }
            for d in 0..dim {
                acc[(target, d)] += s * c[(i, d)];
            }
        }
    }
    acc
}

/// Step count and final step length covering `[0, t_end]` with nominal `dt`.
pub(crate) fn step_plan(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("time horizon must be positive, got {t_end}")));
    }
    let ratio = t_end / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) && rounded >= 1.0 {
        Ok((rounded as usize, dt))
    } else {
        let steps = ratio.ceil() as usize;
        Ok((steps, t_end - (steps - 1) as f64 * dt))
    }
}

/// Settings for [`shoot`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootOptions {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { t_end: 1.0, dt: 1e-2, integrator: Integrator::Rk4 }
    }
}

/// How an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathStatus {
    Complete,
    /// Two landmarks met; the path stops at the last valid sample.
    Collision { time: f64 },
}

/// Time-sampled landmark geodesic.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub states: Vec<LandmarkState>,
    pub integrator: Integrator,
    pub dt: f64,
    pub energy_trace: Vec<f64>,
    pub status: PathStatus,
}

impl GeodesicPath {
    pub fn last(&self) -> &LandmarkState {
        self.states.last().expect("a path always holds its initial state")
    }

    /// `max_t |E(t) − E(0)| / E(0)`, or the absolute drift when `E(0) = 0`.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy_trace[0];
        let scale = if e0 > 0.0 { e0 } else { 1.0 };
        self.energy_trace.iter().map(|e| (e - e0).abs() / scale).fold(0.0, f64::max)
    }

    /// Convert a truncated path into a `DegenerateConfig` error.
    pub fn into_complete(self) -> Result<Self> {
        match self.status {
            PathStatus::Complete => Ok(self),
            PathStatus::Collision { time } => Err(Error::DegenerateConfig(format!(
                "landmarks collided at t = {time}"
            ))),
        }
    }

    /// CSV with columns `t, q<i>_<c>…, alpha<i>_<c>…, energy` (1-based indices).
    pub fn to_csv(&self) -> String {
        let s0 = &self.states[0];
        let (npts, dim) = (s0.q.num_points(), s0.q.dim());
        let mut out = String::from("t");
        for name in ["q", "alpha"] {
            for i in 1..=npts {
                for c in 1..=dim {
                    let _ = write!(out, ",{name}{i}_{c}");
                }
            }
        }
        out.push_str(",energy\n");
        for ((t, s), e) in self.times.iter().zip(&self.states).zip(&self.energy_trace) {
            let _ = write!(out, "{t}");
            for v in s.to_flat() {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{e}");
        }
        out
    }

    pub fn record(&self) -> PathRecord {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        PathRecord {
            integrator: self.integrator,
            dt: self.dt,
            status: self.status,
            times: self.times.clone(),
            q: self.states.iter().map(|s| rows(s.q.as_matrix())).collect(),
            alpha: self.states.iter().map(|s| rows(&s.alpha)).collect(),
            energy: self.energy_trace.clone(),
        }
    }
}

/// Serializable view of a [`GeodesicPath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub integrator: Integrator,
    pub dt: f64,
    pub status: PathStatus,
    pub times: Vec<f64>,
    pub q: Vec<Vec<Vec<f64>>>,
    pub alpha: Vec<Vec<Vec<f64>>>,
    pub energy: Vec<f64>,
}

/// Integrate the Hamiltonian geodesic equations from `state0` over
/// `[0, t_end]`, recording every step.
pub fn shoot(k: &KernelSpec, state0: &LandmarkState, opts: &ShootOptions) -> Result<GeodesicPath> {
    let (steps, last_dt) = step_plan(opts.t_end, opts.dt)?;
    state0.q.check_separation(k.min_separation())?;
    let (npts, dim) = (state0.q.num_points(), state0.q.dim());
    let mut y = state0.to_flat();
    let mut f = |y: &[f64], dy: &mut [f64]| rhs_flat(k, npts, dim, y, dy);
    let mut work = Rk4Work::new(y.len());
    let mut path = GeodesicPath {
        times: vec![0.0],
        states: vec![state0.clone()],
        integrator: opts.integrator,
        dt: opts.dt,
        energy_trace: vec![state0.energy(k)],
        status: PathStatus::Complete,
    };
    let eps = k.min_separation();
    for step in 0..steps {
        let h = if step + 1 == steps { last_dt } else { opts.dt };
        match opts.integrator {
            Integrator::Rk4 => rk4_step(&mut f, &mut y, h, &mut work),
            Integrator::ImplicitMidpoint => {
                implicit_midpoint_step(&mut f, &mut y, h)?;
            }
        }
        let t = if step + 1 == steps { opts.t_end } else { (step + 1) as f64 * opts.dt };
        let qm = DMatrix::from_row_slice(npts, dim, &y[..npts * dim]);
        if y.iter().any(|v| !v.is_finite()) || min_pair_distance(&qm) <= eps {
            log::warn!("landmark collision near t = {t}; path truncated");
            path.status = PathStatus::Collision { time: t };
            break;
        }
        let s = LandmarkState::from_flat(npts, dim, &y)?;
        path.energy_trace.push(s.energy(k));
        path.states.push(s);
        path.times.push(t);
    }
    Ok(path)
}

/// Integrate `q̈ = geodesic_accel(q, q̇)` with RK4 and return `(q, q̇)` at `t_end`.
pub fn shoot_velocity_form(
    k: &KernelSpec,
    q0: &LandmarkConfig,
    qdot0: &DMatrix<f64>,
    t_end: f64,
    dt: f64,
) -> Result<(LandmarkConfig, DMatrix<f64>)> {
    check_shape(q0, qdot0, "qdot")?;
    let (steps, last_dt) = step_plan(t_end, dt)?;
    let (npts, dim) = (q0.num_points(), q0.dim());
    let m = npts * dim;
    let mut y = Vec::with_capacity(2 * m);
    pack_rows(q0.as_matrix(), &mut y);
    pack_rows(qdot0, &mut y);
    let mut failure: Option<Error> = None;
    let mut f = |y: &[f64], dy: &mut [f64]| {
        let q = DMatrix::from_row_slice(npts, dim, &y[..m]);
        let v = DMatrix::from_row_slice(npts, dim, &y[m..]);
        dy[..m].copy_from_slice(&y[m..]);
        let acc = LandmarkConfig::new(q).and_then(|q| geodesic_accel(k, &q, &v));
        match acc {
            Ok(a) => {
                let mut flat = Vec::with_capacity(m);
                pack_rows(&a, &mut flat);
                dy[m..].copy_from_slice(&flat);
            }
            Err(e) => {
                dy[m..].fill(f64::NAN);
                failure.get_or_insert(e);
            }
        }
    };
    let mut work = Rk4Work::new(2 * m);
    for step in 0..steps {
        let h = if step + 1 == steps { last_dt } else { dt };
        rk4_step(&mut f, &mut y, h, &mut work);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((
        LandmarkConfig::new(DMatrix::from_row_slice(npts, dim, &y[..m]))?,
        DMatrix::from_row_slice(npts, dim, &y[m..]),
    ))
}

/// End state at `t_end` from the adaptive Dormand–Prince integrator, used as a
/// reference for the fixed-step shooters.
pub fn shoot_reference(k: &KernelSpec, state0: &LandmarkState, t_end: f64, tol: AdaptiveTolerance) -> Result<LandmarkState> {
    state0.q.check_separation(k.min_separation())?;
    let (npts, dim) = (state0.q.num_points(), state0.q.dim());
    let y = dopri5(|y: &[f64], dy: &mut [f64]| rhs_flat(k, npts, dim, y, dy), &state0.to_flat(), t_end, tol)?;
    LandmarkState::from_flat(npts, dim, &y)
}

//! The `Ḣ¹` metric on diffeomorphisms of the line, `G(X, Y) = ∫ X'Y' dx`.
//!
//! The square-root map `γ = 2(√φ' − 1)` is an isometry onto an open convex
//! subset `{γ > −2}` of flat `L²`, so geodesics are straight segments in `γ`
//! and the distance is an `L²` norm. A direct finite-difference integrator for
//! the Hunter–Saxton equation is provided for comparison.
//!
//! Functions live on a truncated uniform grid. Derivatives `f'` must vanish in
//! both margins; `f` itself vanishes in the left margin (it starts at zero at
//! `−∞`) and is constant in the right margin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{rk4_step, Rk4Work};

/// Values this small are treated as zero when checking supports.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Distance to the boundary `φ' = 0` that triggers a warning.
pub const BOUNDARY_WARN: f64 = 1e-6;

/// Uniform grid on `[x_min, x_max]` with a zero margin of 10% per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct LineGrid {
    x_min: f64,
    x_max: f64,
    points: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    x_min: f64,
    x_max: f64,
    points: usize,
}

impl TryFrom<RawGrid> for LineGrid {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        LineGrid::new(r.x_min, r.x_max, r.points)
    }
}

impl LineGrid {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::invalid(format!("grid needs x_max > x_min, got [{x_min}, {x_max}]")));
        }
        if points < 16 {
            return Err(Error::invalid(format!("grid needs at least 16 points, got {points}")));
        }
        Ok(Self { x_min, x_max, points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    pub fn margin(&self) -> f64 {
        0.1 * (self.x_max - self.x_min)
    }

    pub fn in_left_margin(&self, j: usize) -> bool {
        self.node(j) < self.x_min + self.margin()
    }

    pub fn in_right_margin(&self, j: usize) -> bool {
        self.node(j) > self.x_max - self.margin()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.points).map(|j| f(self.node(j))).collect()
    }

    /// Composite trapezoid integral of samples.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        let h = self.spacing();
        let inner: f64 = v[1..v.len() - 1].iter().sum();
        h * (inner + 0.5 * (v[0] + v[v.len() - 1]))
    }

    /// Running integral from `x_min`: the trapezoid rule with the
    /// Euler–Maclaurin end correction `−h²/12 (v'(x) − v'(x_min))`, so the
    /// error is fourth order for smooth samples.
    pub fn cumulative(&self, v: &[f64]) -> Vec<f64> {
        let h = self.spacing();
        let dv = self.derivative4(v);
        let mut out = Vec::with_capacity(v.len());
        let mut acc = 0.0;
        out.push(0.0);
        for (j, w) in v.windows(2).enumerate() {
            acc += 0.5 * h * (w[0] + w[1]);
            out.push(acc - h * h / 12.0 * (dv[j + 1] - dv[0]));
        }
        out
    }

    /// Second-order finite-difference derivative.
    pub fn derivative(&self, v: &[f64]) -> Vec<f64> {
        let h = self.spacing();
        let n = v.len();
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        for j in 1..n - 1 {
            d[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
        }
        d
    }

    /// Fourth-order centered differences, second order at the two nodes
    /// nearest each end.
    fn derivative4(&self, v: &[f64]) -> Vec<f64> {
        let h = self.spacing();
        let mut d = self.derivative(v);
        for j in 2..v.len() - 2 {
            d[j] = (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / (12.0 * h);
        }
        d
    }

    fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.points {
            return Err(Error::invalid(format!("{what} has {} samples, grid has {}", v.len(), self.points)));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("{what} has non-finite samples")));
        }
        Ok(())
    }

    fn check_zero_margins(&self, v: &[f64], left: bool, right: bool, what: &str) -> Result<()> {
        let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (j, x) in v.iter().enumerate() {
            let in_margin = (left && self.in_left_margin(j)) || (right && self.in_right_margin(j));
            if in_margin && x.abs() > SUPPORT_TOL * scale {
                return Err(Error::invalid(format!(
                    "{what} is not supported inside the grid margins (value {x:e} at x = {})",
                    self.node(j)
                )));
            }
        }
        Ok(())
    }

    fn check_constant_right(&self, v: &[f64], what: &str) -> Result<()> {
        let last = v[v.len() - 1];
        let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (j, x) in v.iter().enumerate() {
            if self.in_right_margin(j) && (x - last).abs() > SUPPORT_TOL * scale {
                return Err(Error::invalid(format!("{what} is not constant in the right margin")));
            }
        }
        Ok(())
    }

    fn same(&self, other: &LineGrid) -> Result<()> {
        if self != other {
            return Err(Error::invalid("operands live on different grids"));
        }
        Ok(())
    }
}

/// A diffeomorphism `φ = Id + f` sampled on a [`LineGrid`], with `f'` stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiffLine")]
pub struct DiffLine {
    grid: LineGrid,
    samples: DiffSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffSamples {
    f: Vec<f64>,
    fp: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiffLine {
    grid: LineGrid,
    samples: DiffSamples,
}

impl TryFrom<RawDiffLine> for DiffLine {
    type Error = Error;
    fn try_from(r: RawDiffLine) -> Result<Self> {
        DiffLine::new(r.grid, r.samples.f, r.samples.fp)
    }
}

impl DiffLine {
    /// Validate samples of `f` and `f'`.
    pub fn new(grid: LineGrid, f: Vec<f64>, fp: Vec<f64>) -> Result<Self> {
        grid.check_len(&f, "f")?;
        grid.check_len(&fp, "f'")?;
        if let Some((j, v)) = fp.iter().enumerate().find(|(_, v)| 1.0 + **v <= 0.0) {
            return Err(Error::NotDiffeo(format!("1 + f' = {} at x = {}", 1.0 + v, grid.node(j))));
        }
        grid.check_zero_margins(&fp, true, true, "f'")?;
        grid.check_zero_margins(&f, true, false, "f")?;
        grid.check_constant_right(&f, "f")?;
        warn_near_boundary(&grid, &fp);
        Ok(Self { grid, samples: DiffSamples { f, fp } })
    }

    /// Build `f` from `f'` by the running trapezoid rule.
    pub fn from_derivative(grid: LineGrid, fp: Vec<f64>) -> Result<Self> {
        grid.check_len(&fp, "f'")?;
        let f = grid.cumulative(&fp);
        Self::new(grid, f, fp)
    }

    pub fn identity(grid: LineGrid) -> Self {
        let z = vec![0.0; grid.len()];
        Self { grid, samples: DiffSamples { f: z.clone(), fp: z } }
    }

    pub fn grid(&self) -> &LineGrid {
        &self.grid
    }

    pub fn f(&self) -> &[f64] {
        &self.samples.f
    }

    pub fn fp(&self) -> &[f64] {
        &self.samples.fp
    }

    /// Sample positions `φ(x_j) = x_j + f_j`.
    pub fn positions(&self) -> Vec<f64> {
        self.grid.nodes().iter().zip(&self.samples.f).map(|(x, f)| x + f).collect()
    }

    /// Largest gap between `f` and the running integral of `f'`.
    pub fn consistency_error(&self) -> f64 {
        let c = self.grid.cumulative(&self.samples.fp);
        c.iter().zip(&self.samples.f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn warn_near_boundary(grid: &LineGrid, fp: &[f64]) {
    if let Some((j, v)) = fp.iter().enumerate().find(|(_, v)| 1.0 + **v < BOUNDARY_WARN) {
        log::warn!(
            "1 + f' = {:e} at x = {}: close to the boundary of the diffeomorphism group",
            1.0 + v,
            grid.node(j)
        );
    }
}

/// A point `γ > −2` of the flat chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFlatPoint")]
pub struct FlatPoint {
    grid: LineGrid,
    samples: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlatPoint {
    grid: LineGrid,
    samples: Vec<f64>,
}

impl TryFrom<RawFlatPoint> for FlatPoint {
    type Error = Error;
    fn try_from(r: RawFlatPoint) -> Result<Self> {
        FlatPoint::new(r.grid, r.samples)
    }
}

impl FlatPoint {
    pub fn new(grid: LineGrid, gamma: Vec<f64>) -> Result<Self> {
        grid.check_len(&gamma, "gamma")?;
        if let Some((j, v)) = gamma.iter().enumerate().find(|(_, v)| **v <= -2.0) {
            return Err(Error::OutOfChart(format!("gamma = {v} at x = {}", grid.node(j))));
        }
        grid.check_zero_margins(&gamma, true, true, "gamma")?;
        Ok(Self { grid, samples: gamma })
    }

    pub fn grid(&self) -> &LineGrid {
        &self.grid
    }

    pub fn gamma(&self) -> &[f64] {
        &self.samples
    }
}

/// `γ = 2(√(1 + f') − 1)`.
pub fn r_map(phi: &DiffLine) -> Result<FlatPoint> {
    let gamma = phi
        .fp()
        .iter()
        .map(|&d| {
            if 1.0 + d <= 0.0 {
                Err(Error::NotDiffeo(format!("1 + f' = {}", 1.0 + d)))
            } else {
                // 2(√(1+d) − 1) written without cancellation.
                Ok(2.0 * d / ((1.0 + d).sqrt() + 1.0))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlatPoint { grid: phi.grid, samples: gamma })
}

/// `f' = ¼(γ² + 4γ)` pointwise and `f` by the running trapezoid rule.
pub fn r_inverse(g: &FlatPoint) -> Result<DiffLine> {
    if let Some(v) = g.gamma().iter().find(|v| **v <= -2.0) {
        return Err(Error::OutOfChart(format!("gamma = {v}")));
    }
    let fp: Vec<f64> = g.gamma().iter().map(|&c| 0.25 * c * (c + 4.0)).collect();
    let f = g.grid.cumulative(&fp);
    warn_near_boundary(&g.grid, &fp);
    Ok(DiffLine { grid: g.grid, samples: DiffSamples { f, fp } })
}

/// Point at time `t` on the geodesic from `phi0` (t = 0) to `phi1` (t = 1).
pub fn hs_geodesic(phi0: &DiffLine, phi1: &DiffLine, t: f64) -> Result<DiffLine> {
    HsGeodesic::between(phi0, phi1)?.at(t)
}

/// Geodesic distance, the `L²` norm of `R(φ1) − R(φ0)`.
pub fn hs_distance(phi0: &DiffLine, phi1: &DiffLine) -> Result<f64> {
    phi0.grid.same(&phi1.grid)?;
    let (g0, g1) = (r_map(phi0)?, r_map(phi1)?);
    let sq: Vec<f64> = g0.gamma().iter().zip(g1.gamma()).map(|(a, b)| (b - a) * (b - a)).collect();
    Ok(phi0.grid.integrate(&sq).max(0.0).sqrt())
}

/// A geodesic `γ(t) = γ0 + t·γ̇` in the flat chart.
#[derive(Debug, Clone, PartialEq)]
pub struct HsGeodesic {
    grid: LineGrid,
    start: Vec<f64>,
    rate: Vec<f64>,
}

impl HsGeodesic {
    pub fn between(phi0: &DiffLine, phi1: &DiffLine) -> Result<Self> {
        phi0.grid.same(&phi1.grid)?;
        let (g0, g1) = (r_map(phi0)?, r_map(phi1)?);
        let rate = g0.gamma().iter().zip(g1.gamma()).map(|(a, b)| b - a).collect();
        Ok(Self { grid: phi0.grid, start: g0.samples, rate })
    }

    /// The geodesic leaving the identity with Eulerian velocity `u0`, given
    /// by its derivative `u0'` (which equals `γ̇` at the identity).
    pub fn from_identity(grid: LineGrid, u0_x: Vec<f64>) -> Result<Self> {
        grid.check_len(&u0_x, "u0'")?;
        grid.check_zero_margins(&u0_x, true, true, "u0'")?;
        Ok(Self { grid, start: vec![0.0; grid.len()], rate: u0_x })
    }

    pub fn grid(&self) -> &LineGrid {
        &self.grid
    }

    pub fn gamma_at(&self, t: f64) -> Vec<f64> {
        self.start.iter().zip(&self.rate).map(|(a, r)| a + t * r).collect()
    }

    pub fn at(&self, t: f64) -> Result<DiffLine> {
        let gamma = self.gamma_at(t);
        if let Some(v) = gamma.iter().find(|v| **v <= -2.0) {
            return Err(Error::OutOfChart(format!("gamma = {v} at t = {t}")));
        }
        r_inverse(&FlatPoint { grid: self.grid, samples: gamma })
    }

    /// Lagrangian velocity `∂_t φ(t, x_j)` and the Eulerian slope `u_x` at
    /// `φ(t, x_j)`, both in closed form.
    pub fn lagrangian_velocity(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let gamma = self.gamma_at(t);
        let integrand: Vec<f64> = gamma.iter().zip(&self.rate).map(|(g, r)| 0.5 * r * (g + 2.0)).collect();
        let w = self.grid.cumulative(&integrand);
        let slope = gamma.iter().zip(&self.rate).map(|(g, r)| r / (0.5 * g + 1.0)).collect();
        (w, slope)
    }

    /// Eulerian velocity `u(t) = φ_t ∘ φ⁻¹` on the grid nodes, by cubic
    /// Hermite interpolation through the moving sample points.
    pub fn eulerian_velocity(&self, t: f64) -> Result<Vec<f64>> {
        let phi = self.at(t)?;
        let (w, slope) = self.lagrangian_velocity(t);
        Ok(hermite_resample(&phi.positions(), &w, &slope, &self.grid.nodes()))
    }
}

/// Evaluate the cubic Hermite interpolant through `(y_j, v_j, v'_j)` at sorted
/// points `x`; values outside the data range are held constant.
fn hermite_resample(y: &[f64], v: &[f64], dv: &[f64], x: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut seg = 0;
    x.iter()
        .map(|&p| {
            if p <= y[0] {
                return v[0];
            }
            if p >= y[n - 1] {
                return v[n - 1];
            }
            while seg + 1 < n - 1 && y[seg + 1] < p {
                seg += 1;
            }
            let (a, b) = (y[seg], y[seg + 1]);
            let h = b - a;
            let s = (p - a) / h;
            let (s2, s3) = (s * s, s * s * s);
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            h00 * v[seg] + h10 * h * dv[seg] + h01 * v[seg + 1] + h11 * h * dv[seg + 1]
        })
        .collect()
}

/// `u_t = −u u_x + ½ ∫_{x_min}^x u_x² dz` with centered differences and the
/// running trapezoid rule.
pub fn hs_pde_rhs(grid: &LineGrid, u: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(u, "u")?;
    Ok(pde_rhs(grid, u))
}

fn pde_rhs(grid: &LineGrid, u: &[f64]) -> Vec<f64> {
    let ux = grid.derivative(u);
    let sq: Vec<f64> = ux.iter().map(|d| d * d).collect();
    let acc = grid.cumulative(&sq);
    u.iter().zip(&ux).zip(&acc).map(|((u, d), a)| -u * d + 0.5 * a).collect()
}

/// Settings for [`hs_evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsEvolveOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Abort once `‖u_x‖_∞` exceeds this value.
    #[serde(default = "default_slope_cap")]
    pub slope_cap: f64,
    /// Keep every this many steps (the final state is always kept).
    #[serde(default = "default_every")]
    pub snapshot_every: usize,
}

fn default_slope_cap() -> f64 {
    1e4
}

fn default_every() -> usize {
    1
}

/// Sampled Eulerian velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsTrajectory {
    pub grid: LineGrid,
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
}

/// RK4 integration of the Hunter–Saxton equation from `u0`.
pub fn hs_evolve(grid: &LineGrid, u0: &[f64], opts: &HsEvolveOptions) -> Result<HsTrajectory> {
    grid.check_len(u0, "u0")?;
    grid.check_zero_margins(u0, true, false, "u0")?;
    grid.check_constant_right(u0, "u0")?;
    let (steps, last_dt) = crate::dynamics::step_plan(opts.t_end, opts.dt)?;
    let every = opts.snapshot_every.max(1);
    let mut u = u0.to_vec();
    let mut work = Rk4Work::new(u.len());
    let mut f = |y: &[f64], dy: &mut [f64]| dy.copy_from_slice(&pde_rhs(grid, y));
    let mut traj = HsTrajectory { grid: *grid, times: vec![0.0], fields: vec![u.clone()] };
    for step in 0..steps {
        let h = if step + 1 == steps { last_dt } else { opts.dt };
        rk4_step(&mut f, &mut u, h, &mut work);
        let t = if step + 1 == steps { opts.t_end } else { (step + 1) as f64 * opts.dt };
        let slope = grid.derivative(&u).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if !(slope <= opts.slope_cap) {
            return Err(Error::BlowUp(format!(
                "|u_x| reached {slope:e} at t = {t}; the geodesic is leaving the group"
            )));
        }
        if (step + 1) % every == 0 || step + 1 == steps {
            traj.times.push(t);
            traj.fields.push(u.clone());
        }
    }
    Ok(traj)
}

/// `Σ_i ∫ u_y² dy · Δt` along a sampled path, computed from positions only.
///
/// On each interval the Lagrangian velocity `w = Δf/Δt` and the midpoint
/// positions `y` are differentiated in the label `x` with fourth-order
/// differences, and `∫ u_y² dy = ∫ w_x² / y_x dx` is summed by the
/// trapezoid rule.
pub fn h1_path_energy(path: &[DiffLine], dt: f64) -> Result<f64> {
    check_path(path, dt)?;
    let grid = path[0].grid;
    let x = grid.nodes();
    let mut total = 0.0;
    for pair in path.windows(2) {
        let (f0, f1) = (pair[0].f(), pair[1].f());
        let w: Vec<f64> = f0.iter().zip(f1).map(|(a, b)| (b - a) / dt).collect();
        let y: Vec<f64> = x.iter().zip(f0.iter().zip(f1)).map(|(x, (a, b))| x + 0.5 * (a + b)).collect();
        let (wx, yx) = (grid.derivative4(&w), grid.derivative4(&y));
        if let Some(d) = yx.iter().find(|d| **d <= 0.0) {
            return Err(Error::NotDiffeo(format!("midpoint configuration has slope {d}")));
        }
        let density: Vec<f64> = wx.iter().zip(&yx).map(|(a, b)| a * a / b).collect();
        total += grid.integrate(&density) * dt;
    }
    Ok(total)
}

/// `Σ_i ‖(γ_{i+1} − γ_i)/Δt‖²_{L²} · Δt` of the mapped path.
pub fn flat_path_energy(path: &[DiffLine], dt: f64) -> Result<f64> {
    check_path(path, dt)?;
    let grid = path[0].grid;
    let gammas = path.iter().map(r_map).collect::<Result<Vec<_>>>()?;
    Ok(gammas
        .windows(2)
        .map(|p| {
            let sq: Vec<f64> =
                p[0].gamma().iter().zip(p[1].gamma()).map(|(a, b)| ((b - a) / dt).powi(2)).collect();
            grid.integrate(&sq) * dt
        })
        .sum())
}

fn check_path(path: &[DiffLine], dt: f64) -> Result<()> {
    if path.len() < 2 {
        return Err(Error::invalid("a path needs at least two samples"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    for p in &path[1..] {
        path[0].grid.same(&p.grid)?;
    }
    Ok(())
}

/// Smooth bump `exp(1 − 1/(1 − s²))` for `|s| < 1`, zero elsewhere, with
/// `s = (x − center)/radius`. Its peak value is one.
pub fn bump(x: f64, center: f64, radius: f64) -> f64 {
    let s = (x - center) / radius;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Derivative of [`bump`] with respect to `x`.
pub fn bump_derivative(x: f64, center: f64, radius: f64) -> f64 {
    let s = (x - center) / radius;
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        -2.0 * s / (d * d) * bump(x, center, radius) / radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> LineGrid {
        LineGrid::new(-1.0, 3.0, 401).unwrap()
    }

    #[test]
    fn identity_maps_to_zero() {
        let g = r_map(&DiffLine::identity(grid())).unwrap();
        assert!(g.gamma().iter().all(|&v| v == 0.0));
        let back = r_inverse(&g).unwrap();
        assert_eq!(back, DiffLine::identity(grid()));
    }

    #[test]
    fn plateau_values() {
        let gr = grid();
        let fp = gr.sample(|x| if (0.0..0.5).contains(&x) { 3.0 } else { 0.0 });
        let phi = DiffLine::from_derivative(gr, fp.clone()).unwrap();
        let g = r_map(&phi).unwrap();
        for (v, d) in g.gamma().iter().zip(&fp) {
            if *d == 3.0 {
                assert_eq!(*v, 2.0);
            }
        }
        let flat = FlatPoint::new(gr, g.gamma().to_vec()).unwrap();
        assert_eq!(r_inverse(&flat).unwrap().fp(), &fp[..]);
    }

    #[test]
    fn rejects_folds_and_out_of_chart() {
        let gr = grid();
        let fp = gr.sample(|x| -1.5 * bump(x, 0.5, 0.5));
        assert!(matches!(DiffLine::from_derivative(gr, fp), Err(Error::NotDiffeo(_))));
        let gamma = gr.sample(|x| -2.5 * bump(x, 0.5, 0.5));
        assert!(matches!(FlatPoint::new(gr, gamma), Err(Error::OutOfChart(_))));
    }

    #[test]
    fn rejects_support_in_margin() {
        let gr = grid();
        let fp = gr.sample(|x| 0.3 * bump(x, -0.9, 0.3));
        assert!(matches!(DiffLine::from_derivative(gr, fp), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn geodesic_endpoints_and_extrapolation() {
        let gr = grid();
        let a = DiffLine::from_derivative(gr, gr.sample(|x| 0.8 * bump(x, 0.5, 0.6))).unwrap();
        let b = DiffLine::from_derivative(gr, gr.sample(|x| -0.7 * bump(x, 1.0, 0.5))).unwrap();
        let p0 = hs_geodesic(&a, &b, 0.0).unwrap();
        let p1 = hs_geodesic(&a, &b, 1.0).unwrap();
        let err = |x: &DiffLine, y: &DiffLine| x.f().iter().zip(y.f()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err(&p0, &a) < 1e-4 && err(&p1, &b) < 1e-4);
        assert!(matches!(hs_geodesic(&a, &b, 3.0), Err(Error::OutOfChart(_))));
    }

    #[test]
    fn distance_to_identity_is_norm_of_image() {
        let gr = grid();
        let a = DiffLine::from_derivative(gr, gr.sample(|x| 0.8 * bump(x, 0.5, 0.6))).unwrap();
        let g = r_map(&a).unwrap();
        let norm = gr.integrate(&g.gamma().iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
        assert_eq!(hs_distance(&DiffLine::identity(gr), &a).unwrap(), norm);
        assert_eq!(hs_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn rhs_vanishes_for_zero_field() {
        let gr = grid();
        assert!(hs_pde_rhs(&gr, &vec![0.0; gr.len()]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn json_shape() {
        let gr = LineGrid::new(0.0, 1.0, 16).unwrap();
        let s = serde_json::to_value(DiffLine::identity(gr)).unwrap();
        assert!(s["samples"]["f"].is_array() && s["samples"]["fp"].is_array());
        assert_eq!(s["grid"]["points"], 16);
        let back: DiffLine = serde_json::from_value(s).unwrap();
        assert_eq!(back, DiffLine::identity(gr));
    }

    #[test]
    fn bump_derivative_matches_differences() {
        for &x in &[-0.3, 0.1, 0.77] {
            let h = 1e-6;
            let fd = (bump(x + h, 0.2, 0.9) - bump(x - h, 0.2, 0.9)) / (2.0 * h);
            assert!((fd - bump_derivative(x, 0.2, 0.9)).abs() < 1e-8);
        }
    }
}

//! Minimized path lengths from the identity to a fixed circle diffeomorphism
//! under the `L²` (`s = 0`) and `H¹` (`s = 1`) metrics, on a sequence of
//! refined discretizations.
//!
//! A path is `φ(t, x_j) = x_j + D_{i,j}` on `T + 1` time slices and `M_x`
//! material nodes. Between slices the Eulerian velocity is piecewise linear
//! on the midpoint cells, which gives the per-interval metric
//! `G_i = (1/2π) Σ_j [w (a² + ab + b²)/3 + s (b − a)²/w]`
//! with `w` the midpoint cell width and `a, b` the node speeds.
//!
//! Two initial paths are polished by gradient descent at every level: the
//! straight path `D_i = (i/T) d` and a path that moves the nodes with `n`
//! travelling compression waves. Under `L²` a wave that squeezes the nodes
//! into a thin layer and sweeps it forward is cheap, and refining the grid
//! while adding waves drives the length down.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::field::PeriodicField;
use super::inertia::InertiaOp;
use crate::error::{Error, Result};

/// Settings for [`vanish_distance_experiment`]. Level `ℓ` uses
/// `ℓ·base_points` nodes, `ℓ·base_slices` time slices and `ℓ·base_waves`
/// waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VanishOptions {
    pub levels: usize,
    pub base_points: usize,
    pub base_slices: usize,
    pub base_waves: usize,
    /// Gradient-descent iterations per initial path.
    pub iterations: usize,
    /// Converged when the gradient norm falls below this fraction of its
    /// initial value.
    pub gradient_tolerance: f64,
}

impl Default for VanishOptions {
    fn default() -> Self {
        Self {
            levels: 4,
            base_points: 512,
            base_slices: 160,
            base_waves: 1,
            iterations: 100,
            gradient_tolerance: 1e-6,
        }
    }
}

/// Which initial path produced the reported length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStart {
    Straight,
    Wave,
}

/// One row of the trend table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishLevel {
    pub level: usize,
    pub points: usize,
    pub slices: usize,
    pub waves: usize,
    pub straight_length: f64,
    /// `None` when the wave construction does not produce a valid path.
    pub wave_length: Option<f64>,
    /// Minimum over both polished starts.
    pub length: f64,
    pub energy: f64,
    pub best_start: PathStart,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishTable {
    pub order: f64,
    pub rows: Vec<VanishLevel>,
}

impl VanishTable {
    /// Last-level length over first-level length.
    pub fn shrink_ratio(&self) -> f64 {
        let first = self.rows.first().map_or(0.0, |r| r.length);
        let last = self.rows.last().map_or(0.0, |r| r.length);
        if first == 0.0 {
            0.0
        } else {
            last / first
        }
    }

    /// `(max − min) / max` over the levels.
    pub fn spread(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.length).fold(0.0, f64::max);
        let min = self.rows.iter().map(|r| r.length).fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            (max - min) / max
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,points,slices,waves,straight_length,wave_length,length,energy,best_start,iterations,converged\n");
        for r in &self.rows {
            let wave = r.wave_length.map_or(String::new(), |v| format!("{v:.12e}"));
            let start = match r.best_start {
                PathStart::Straight => "straight",
                PathStart::Wave => "wave",
            };
            out.push_str(&format!(
                "{},{},{},{},{:.12e},{},{:.12e},{:.12e},{},{},{}\n",
                r.level, r.points, r.slices, r.waves, r.straight_length, wave, r.length, r.energy, start,
                r.iterations, r.converged
            ));
        }
        out
    }
}

/// Trigonometric interpolant of the target displacement.
struct Displacement {
    modes: Vec<Complex64>,
    nyquist: f64,
    max_abs: f64,
}

impl Displacement {
    fn new(d: &PeriodicField) -> Self {
        let c = d.coefficients();
        let m = d.len();
        Self { modes: c[..m / 2].to_vec(), nyquist: c[m / 2].re, max_abs: d.max_abs() }
    }

    fn eval(&self, x: f64) -> f64 {
        let step = Complex64::from_polar(1.0, x);
        let mut e = step;
        let mut v = self.modes[0].re;
        for c in &self.modes[1..] {
            v += 2.0 * (c * e).re;
            e *= step;
        }
        v + self.nyquist * (self.modes.len() as f64 * x).cos()
    }
}

/// Discrete path on a fixed node grid, stored row-major `(T + 1) × M_x`.
struct PathGrid {
    points: usize,
    slices: usize,
    order: f64,
}

impl PathGrid {
    fn h(&self) -> f64 {
        TAU / self.points as f64
    }

    fn dt(&self) -> f64 {
        1.0 / self.slices as f64
    }

    /// Cell widths of every slice; `None` if any is nonpositive.
    fn widths(&self, d: &[f64]) -> Option<Vec<f64>> {
        let (m, h) = (self.points, self.h());
        let mut w = vec![0.0; d.len()];
        for i in 0..=self.slices {
            let row = &d[i * m..(i + 1) * m];
            for j in 0..m {
                let next = row[(j + 1) % m];
                let wj = h + next - row[j];
                if !(wj > 0.0) {
                    return None;
                }
                w[i * m + j] = wj;
            }
        }
        Some(w)
    }

    /// Per-interval metric values `G_i`.
    fn interval_metrics(&self, d: &[f64]) -> Option<Vec<f64>> {
        let widths = self.widths(d)?;
        let (m, dt, s) = (self.points, self.dt(), self.order);
        Some(
            (0..self.slices)
                .map(|i| {
                    let mut g = 0.0;
                    for j in 0..m {
                        let jn = (j + 1) % m;
                        let a = (d[(i + 1) * m + j] - d[i * m + j]) / dt;
                        let b = (d[(i + 1) * m + jn] - d[i * m + jn]) / dt;
                        let w = 0.5 * (widths[i * m + j] + widths[(i + 1) * m + j]);
                        g += w * (a * a + a * b + b * b) / 3.0 + s * (b - a) * (b - a) / w;
                    }
                    g / TAU
                })
                .collect(),
        )
    }

    fn energy(&self, d: &[f64]) -> Option<f64> {
        self.interval_metrics(d).map(|g| 0.5 * self.dt() * g.iter().sum::<f64>())
    }

    fn length(&self, d: &[f64]) -> Option<f64> {
        self.interval_metrics(d).map(|g| self.dt() * g.iter().map(|v| v.sqrt()).sum::<f64>())
    }

    /// Energy and its gradient with respect to every entry of `d`.
    fn energy_gradient(&self, d: &[f64]) -> Option<(f64, Vec<f64>)> {
        let widths = self.widths(d)?;
        let (m, dt, s) = (self.points, self.dt(), self.order);
        let scale = 0.5 * dt / TAU;
        let mut grad = vec![0.0; d.len()];
        let mut gwidth = vec![0.0; d.len()];
        let mut total = 0.0;
        for i in 0..self.slices {
            for j in 0..m {
                let jn = (j + 1) % m;
                let a = (d[(i + 1) * m + j] - d[i * m + j]) / dt;
                let b = (d[(i + 1) * m + jn] - d[i * m + jn]) / dt;
                let w = 0.5 * (widths[i * m + j] + widths[(i + 1) * m + j]);
                let q = (a * a + a * b + b * b) / 3.0;
                let diff = b - a;
                total += w * q + s * diff * diff / w;
                let ga = scale * (w * (2.0 * a + b) / 3.0 - 2.0 * s * diff / w) / dt;
                let gb = scale * (w * (a + 2.0 * b) / 3.0 + 2.0 * s * diff / w) / dt;
                let gw = scale * 0.5 * (q - s * diff * diff / (w * w));
                grad[(i + 1) * m + j] += ga;
                grad[i * m + j] -= ga;
                grad[(i + 1) * m + jn] += gb;
                grad[i * m + jn] -= gb;
                gwidth[i * m + j] += gw;
                gwidth[(i + 1) * m + j] += gw;
            }
        }
        for i in 0..=self.slices {
            for j in 0..m {
                let g = gwidth[i * m + j];
                grad[i * m + (j + 1) % m] += g;
                grad[i * m + j] -= g;
            }
        }
        Some((scale * total, grad))
    }

    fn straight(&self, target: &[f64]) -> Vec<f64> {
        let m = self.points;
        let mut d = vec![0.0; (self.slices + 1) * m];
        for i in 0..=self.slices {
            let t = i as f64 / self.slices as f64;
            for j in 0..m {
                d[i * m + j] = t * target[j];
            }
        }
        d
    }
}

struct Polished {
    path: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Armijo gradient descent on the interior slices; steps that fold a cell
/// are rejected.
fn polish(grid: &PathGrid, mut d: Vec<f64>, iterations: usize, tolerance: f64) -> Polished {
    let m = grid.points;
    let interior = m..grid.slices * m;
    let mut step = 1e-3;
    let mut g0 = None;
    let mut done = 0;
    let mut converged = false;
    while done < iterations {
        let Some((e, mut g)) = grid.energy_gradient(&d) else { break };
        g[..m].iter_mut().for_each(|v| *v = 0.0);
        g[grid.slices * m..].iter_mut().for_each(|v| *v = 0.0);
        let gg: f64 = g[interior.clone()].iter().map(|v| v * v).sum();
        let g_norm = gg.sqrt();
        let reference = *g0.get_or_insert(g_norm);
        if g_norm <= tolerance * reference || gg == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step > 1e-30 {
            let trial: Vec<f64> = d.iter().zip(&g).map(|(v, gv)| v - step * gv).collect();
            if let Some(en) = grid.energy(&trial) {
                if en <= e - 1e-4 * step * gg {
                    d = trial;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 1.5;
        done += 1;
    }
    Polished { path: d, iterations: done, converged }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Growing-wave initial path with `waves` fronts.
///
/// Front `k` starts at `θ_k = 2πk/n` and moves with speed `V = span + ρ`,
/// `ρ = span/4`. Nodes behind it have reached `x + d(x)`, nodes ahead are at
/// rest, and the nodes it is currently carrying sit in a layer of thickness
/// `η(t)` just behind the front. The region `[θ_k, θ_k + ρ)` is a ramp where
/// the final displacement is phased in linearly so that consecutive fronts
/// join continuously.
fn wave_path(grid: &PathGrid, waves: usize, disp: &Displacement) -> Vec<f64> {
    let m = grid.points;
    let h = grid.h();
    let eta0 = 0.3 * h;
    let span = TAU / waves as f64;
    let rho = 0.25 * span;
    let speed = span + rho;
    let theta = |k: usize| k as f64 * span;
    let labels: Vec<f64> = (0..m).map(|j| j as f64 * h).collect();
    let unwrapped: Vec<f64> = labels.iter().map(|x| (x - rho).rem_euclid(TAU) + rho).collect();
    let owner: Vec<usize> =
        unwrapped.iter().map(|y| (((y - rho) / span).floor() as usize).min(waves - 1)).collect();
    let dvals: Vec<f64> = labels.iter().map(|&x| disp.eval(x)).collect();
    let partial = |z: f64, dz: f64, k: usize| z + (z - theta(k)) / rho * dz;
    let post = |z: f64, dz: f64, k: usize| {
        if z < theta(k) {
            z
        } else if z < theta(k) + rho {
            partial(z, dz, k)
        } else {
            z + dz
        }
    };
    let post_at = |z: f64, k: usize| post(z, disp.eval(z), k);
    let layer = |z: f64, a: f64, b: f64, ef: f64, eta: f64| {
        if a > b {
            ef - eta + eta * (z - b) / (a - b)
        } else {
            ef
        }
    };

    let mut d = vec![0.0; (grid.slices + 1) * m];
    for i in 0..=grid.slices {
        let t = i as f64 / grid.slices as f64;
        let eta = if t > 0.0 && t < 1.0 { eta0 * (16.0 * t * (1.0 - t)).min(1.0) } else { 0.0 };
        let reach = 2.0 * (disp.max_abs + eta) + h;
        for k in 0..waves {
            let k1 = k + 1;
            let a = theta(k) + speed * t;
            let pre = |z: f64| {
                if theta(k1) <= z && z < theta(k1) + rho {
                    partial(z, disp.eval(z), k1)
                } else {
                    z
                }
            };
            let ef = pre(a);
            let b = if eta > 0.0 { bisect(|z| post_at(z, k) - (ef - eta), a - reach, a) } else { a };
            let a1 = theta(k1) + speed * t;
            let b1 = if eta > 0.0 { bisect(|z| post_at(z, k1) - (a1 - eta), a1 - reach, a1) } else { a1 };
            for j in (0..m).filter(|&j| owner[j] == k) {
                let z = unwrapped[j];
                let p = if z > a {
                    if z >= theta(k1) && z <= a1 {
                        if z < b1 {
                            post(z, dvals[j], k1)
                        } else {
                            layer(z, a1, b1, a1, eta)
                        }
                    } else {
                        z
                    }
                } else if z < b {
                    post(z, dvals[j], k)
                } else {
                    layer(z, a, b, ef, eta)
                };
                d[i * m + j] = p - z;
            }
        }
    }
    d
}

/// Polished path lengths from the identity to `x ↦ x + d(x)` for levels
/// `1..=levels`, for the `L²` (`s = 0`) or `H¹` (`s = 1`) metric of `op`.
///
/// Levels are independent and run in parallel. A level whose descent stops
/// above its gradient tolerance is reported with `converged = false`.
pub fn vanish_distance_experiment(
    op: &InertiaOp,
    target: &PeriodicField,
    opts: &VanishOptions,
) -> Result<VanishTable> {
    let s = op.order();
    if s != 0.0 && s != 1.0 {
        return Err(Error::invalid(format!(
            "the path-length experiment discretizes only s = 0 and s = 1, got s = {s}"
        )));
    }
    if target.len() != op.size() {
        return Err(Error::invalid(format!(
            "target has {} points but the operator expects {}",
            target.len(),
            op.size()
        )));
    }
    if opts.levels == 0 || opts.base_points < 8 || opts.base_slices < 2 || opts.base_waves == 0 {
        return Err(Error::invalid("vanish options need levels ≥ 1, base_points ≥ 8, base_slices ≥ 2, base_waves ≥ 1"));
    }
    let slope = target.derivative(1);
    if let Some(v) = slope.samples().iter().find(|&&v| !(1.0 + v > 0.0)) {
        return Err(Error::NotDiffeo(format!("target has 1 + d' = {} ≤ 0", 1.0 + v)));
    }
    let disp = Displacement::new(target);
    let rows: Vec<VanishLevel> = (1..=opts.levels)
        .into_par_iter()
        .map(|level| run_level(s, level, &disp, opts))
        .collect::<Result<_>>()?;
    Ok(VanishTable { order: s, rows })
}

fn run_level(s: f64, level: usize, disp: &Displacement, opts: &VanishOptions) -> Result<VanishLevel> {
    let grid = PathGrid { points: level * opts.base_points, slices: level * opts.base_slices, order: s };
    let waves = level * opts.base_waves;
    let m = grid.points;
    let target: Vec<f64> = (0..m).map(|j| disp.eval(j as f64 * grid.h())).collect();

    let straight = polish(&grid, grid.straight(&target), opts.iterations, opts.gradient_tolerance);
    let straight_length = grid
        .length(&straight.path)
        .ok_or_else(|| Error::NotDiffeo(format!("straight path folds at level {level}")))?;

    let mut wave_init = wave_path(&grid, waves, disp);
    let end = &wave_init[grid.slices * m..];
    let end_gap = end.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let wave = if end_gap < 1e-9 && grid.widths(&wave_init).is_some() {
        wave_init[grid.slices * m..].copy_from_slice(&target);
        wave_init[..m].iter_mut().for_each(|v| *v = 0.0);
        let p = polish(&grid, wave_init, opts.iterations, opts.gradient_tolerance);
        grid.length(&p.path).map(|len| (len, p))
    } else {
        log::info!("level {level}: wave construction is not a valid path (end gap {end_gap:e})");
        None
    };

    let wave_length = wave.as_ref().map(|(len, _)| *len);
    let (length, best, start) = match wave {
        Some((len, p)) if len < straight_length => (len, p, PathStart::Wave),
        _ => (straight_length, straight, PathStart::Straight),
    };
    if !best.converged {
        log::warn!("level {level}: descent stopped after {} iterations above tolerance", best.iterations);
    }
    let energy = grid.energy(&best.path).unwrap_or(f64::NAN);
    Ok(VanishLevel {
        level,
        points: m,
        slices: grid.slices,
        waves,
        straight_length,
        wave_length,
        length,
        energy,
        best_start: start,
        iterations: best.iterations,
        converged: best.converged,
    })
}

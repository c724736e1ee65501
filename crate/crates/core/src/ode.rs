//! Time steppers for autonomous systems `y' = f(y)` on flat `f64` state vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-step schemes offered by the geodesic shooters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    ImplicitMidpoint,
}

/// Scratch space for [`rk4_step`].
#[derive(Debug, Clone)]
pub struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Work {
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }
}

/// One classical fourth-order Runge–Kutta step, in place.
pub fn rk4_step<F>(f: &mut F, y: &mut [f64], dt: f64, w: &mut Rk4Work)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y.len();
    f(y, &mut w.k1);
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * dt * w.k1[i];
    }
    f(&w.tmp, &mut w.k2);
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * dt * w.k2[i];
    }
    f(&w.tmp, &mut w.k3);
    for i in 0..n {
        w.tmp[i] = y[i] + dt * w.k3[i];
    }
    f(&w.tmp, &mut w.k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
}

/// One implicit midpoint step solved by fixed-point iteration. Returns the
/// number of iterations used.
pub fn implicit_midpoint_step<F>(f: &mut F, y: &mut [f64], dt: f64) -> Result<usize>
where
    F: FnMut(&[f64], &mut [f64]),
{
    const MAX_ITER: usize = 100;
    let n = y.len();
    let mut slope = vec![0.0; n];
    let mut mid = y.to_vec();
    f(y, &mut slope);
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for it in 1..=MAX_ITER {
        let mut change = 0.0f64;
        for i in 0..n {
            let next = y[i] + 0.5 * dt * slope[i];
            change = change.max((next - mid[i]).abs());
            mid[i] = next;
        }
        f(&mid, &mut slope);
        if change <= 1e-15 * scale {
            for i in 0..n {
                y[i] += dt * slope[i];
            }
            return Ok(it);
        }
    }
    Err(Error::NotConverged {
        reason: format!("implicit midpoint fixed point did not settle in {MAX_ITER} iterations; reduce dt"),
        best: None,
    })
}

/// Tolerances for the adaptive reference integrator.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveTolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveTolerance {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-12, max_steps: 1_000_000 }
    }
}

/// Dormand–Prince 5(4) with standard error control, integrating from `0` to
/// `t_end`. Used as an independent high-accuracy reference.
pub fn dopri5<F>(mut f: F, y0: &[f64], t_end: f64, tol: AdaptiveTolerance) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    let n = y0.len();
    let mut y = y0.to_vec();
    if t_end <= 0.0 {
        return Ok(y);
    }
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut t = 0.0;
    let mut h = (t_end * 1e-3).min(1e-2);
    f(&y, &mut k[0]);
    for _ in 0..tol.max_steps {
        if t >= t_end {
            return Ok(y);
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for s in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            if s == 5 {
                y_new.copy_from_slice(&stage);
            }
            f(&stage, &mut k[s + 1]);
        }
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (h * e / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::BlowUp("non-finite state in adaptive reference".into()));
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&y_new);
            // First-same-as-last: the final stage is the next first stage.
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t_end {
            return Err(Error::NotConverged { reason: "adaptive step size underflow".into(), best: None });
        }
    }
    if t >= t_end {
        return Ok(y);
    }
    Err(Error::NotConverged { reason: "adaptive reference exceeded its step budget".into(), best: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn rk4_fourth_order_on_oscillator() {
        let err = |steps: usize| {
            let mut y = vec![1.0, 0.0];
            let dt = 1.0 / steps as f64;
            let mut w = Rk4Work::new(2);
            for _ in 0..steps {
                rk4_step(&mut oscillator, &mut y, dt, &mut w);
            }
            ((y[0] - 1f64.cos()).powi(2) + (y[1] + 1f64.sin()).powi(2)).sqrt()
        };
        let ratio = err(20) / err(40);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn midpoint_conserves_quadratic_invariant() {
        let mut y = vec![1.0, 0.0];
        let mut f = oscillator;
        for _ in 0..1000 {
            implicit_midpoint_step(&mut f, &mut y, 0.05).unwrap();
        }
        assert!((y[0] * y[0] + y[1] * y[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dopri5_matches_exponential() {
        let y = dopri5(|y, dy| dy[0] = y[0], &[1.0], 2.0, AdaptiveTolerance::default()).unwrap();
        assert!((y[0] - 2f64.exp()).abs() < 1e-10);
        let y = dopri5(oscillator, &[1.0, 0.0], 10.0, AdaptiveTolerance::default()).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
    }
}

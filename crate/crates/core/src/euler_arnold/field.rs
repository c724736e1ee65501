use std::collections::HashMap;
use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FFT plans for one grid size and its 3/2-padded product grid.
struct Spectral {
    size: usize,
    padded: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    forward_padded: Arc<dyn Fft<f64>>,
    inverse_padded: Arc<dyn Fft<f64>>,
}

fn spectral(size: usize) -> Arc<Spectral> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Spectral>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(size)
        .or_insert_with(|| {
            let padded = 3 * size / 2;
            let mut planner = FftPlanner::new();
            Arc::new(Spectral {
                size,
                padded,
                forward: planner.plan_fft_forward(size),
                inverse: planner.plan_fft_inverse(size),
                forward_padded: planner.plan_fft_forward(padded),
                inverse_padded: planner.plan_fft_inverse(padded),
            })
        })
        .clone()
}

/// Signed wavenumber of FFT slot `j` on a grid of `size` points.
pub(crate) fn wavenumber(j: usize, size: usize) -> i64 {
    if j <= size / 2 {
        j as i64
    } else {
        j as i64 - size as i64
    }
}

/// Real periodic function sampled at `x_j = 2πj/M`, `M` a power of two.
///
/// Coefficients are normalized so that `u(x) = Σ_k û_k e^{ikx}`. The Nyquist
/// mode is carried by the samples but dropped by derivatives and products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField")]
pub struct PeriodicField {
    samples: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    samples: Vec<f64>,
}

impl TryFrom<RawField> for PeriodicField {
    type Error = Error;
    fn try_from(r: RawField) -> Result<Self> {
        PeriodicField::new(r.samples)
    }
}

impl PeriodicField {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let m = samples.len();
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::invalid(format!(
                "periodic grids need a power of two with at least 8 points, got {m}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("periodic field has non-finite samples"));
        }
        Ok(Self { samples })
    }

    pub fn from_fn(size: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..size).map(|j| f(node(j, size))).collect())
    }

    pub fn zeros(size: usize) -> Result<Self> {
        Self::new(vec![0.0; size])
    }

    pub fn constant(size: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; size])
    }

    /// Field with the given coefficients in FFT order. Imaginary parts of the
    /// synthesized samples are discarded.
    pub fn from_coefficients(coeffs: &[Complex64]) -> Result<Self> {
        let m = coeffs.len();
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::invalid(format!(
                "periodic grids need a power of two with at least 8 points, got {m}"
            )));
        }
        let sp = spectral(m);
        let mut buf = coeffs.to_vec();
        sp.inverse.process(&mut buf);
        Self::new(buf.into_iter().map(|c| c.re).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn node(&self, j: usize) -> f64 {
        node(j, self.len())
    }

    /// Normalized coefficients `û_k` in FFT order.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let sp = spectral(self.len());
        let mut buf: Vec<Complex64> = self.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        sp.forward.process(&mut buf);
        let scale = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Mean value, the `k = 0` coefficient.
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_same_grid(self, other);
        self.samples.iter().zip(&other.samples).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Spectral derivative of order `order`; the Nyquist mode is zeroed.
    pub fn derivative(&self, order: u32) -> Self {
        let m = self.len();
        let mut c = self.coefficients();
        for (j, cj) in c.iter_mut().enumerate() {
            let k = wavenumber(j, m);
            if 2 * k.unsigned_abs() as usize == m {
                *cj = Complex64::new(0.0, 0.0);
            } else {
                *cj *= Complex64::new(0.0, k as f64).powu(order);
            }
        }
        Self::from_coefficients(&c).expect("same grid")
    }

    /// Pointwise product computed on the 3/2-padded grid and truncated back,
    /// so it equals the exact projection of the product onto `|k| < M/2`.
    pub fn product(&self, other: &Self) -> Self {
        assert_same_grid(self, other);
        let m = self.len();
        let sp = spectral(m);
        let a = pad(&self.coefficients(), &sp);
        let b = pad(&other.coefficients(), &sp);
        let mut prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| Complex64::new(x.re * y.re, 0.0)).collect();
        sp.forward_padded.process(&mut prod);
        let scale = 1.0 / sp.padded as f64;
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for (j, cj) in c.iter_mut().enumerate() {
            let k = wavenumber(j, m);
            if 2 * k.unsigned_abs() as usize == m {
                continue;
            }
            let slot = if k >= 0 { k as usize } else { (sp.padded as i64 + k) as usize };
            *cj = prod[slot] * scale;
        }
        Self::from_coefficients(&c).expect("same grid")
    }

    /// Relative amplitude of the modes `|k| > M/3`:
    /// `sqrt(Σ_{|k|>M/3} |û_k|²) / sqrt(Σ_k |û_k|²)`. Zero for the zero field.
    pub fn spectral_tail(&self) -> f64 {
        let m = self.len();
        let c = self.coefficients();
        let (mut tail, mut total) = (0.0, 0.0);
        for (j, cj) in c.iter().enumerate() {
            let p = cj.norm_sqr();
            total += p;
            if 3 * wavenumber(j, m).unsigned_abs() as usize > m {
                tail += p;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            (tail / total).sqrt()
        }
    }

    /// Trigonometric interpolant at an arbitrary point.
    pub fn eval(&self, x: f64) -> f64 {
        let m = self.len();
        let c = self.coefficients();
        let mut v = c[0].re;
        for (k, ck) in c.iter().enumerate().take(m / 2).skip(1) {
            let e = Complex64::from_polar(1.0, k as f64 * x);
            v += 2.0 * (ck * e).re;
        }
        v + c[m / 2].re * ((m / 2) as f64 * x).cos()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { samples: self.samples.iter().map(|&v| f(v)).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_same_grid(self, other);
        Self { samples: self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect() }
    }
}

fn node(j: usize, size: usize) -> f64 {
    TAU * j as f64 / size as f64
}

fn pad(c: &[Complex64], sp: &Spectral) -> Vec<Complex64> {
    let m = sp.size;
    let mut out = vec![Complex64::new(0.0, 0.0); sp.padded];
    for (j, cj) in c.iter().enumerate() {
        let k = wavenumber(j, m);
        if 2 * k.unsigned_abs() as usize == m {
            continue;
        }
        let slot = if k >= 0 { k as usize } else { (sp.padded as i64 + k) as usize };
        out[slot] = *cj;
    }
    sp.inverse_padded.process(&mut out);
    out
}

/// Panics when two fields live on different grids.
pub(crate) fn assert_same_grid(a: &PeriodicField, b: &PeriodicField) {
    assert_eq!(a.len(), b.len(), "periodic fields on different grids");
}

impl Add for &PeriodicField {
    type Output = PeriodicField;
    fn add(self, rhs: Self) -> PeriodicField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &PeriodicField {
    type Output = PeriodicField;
    fn sub(self, rhs: Self) -> PeriodicField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &PeriodicField {
    type Output = PeriodicField;
    fn mul(self, rhs: f64) -> PeriodicField {
        self.map(|v| v * rhs)
    }
}

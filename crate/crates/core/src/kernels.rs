//! Translation-invariant scalar kernels, their derivatives, and kernel matrices
//! over landmark configurations.
//!
//! Every kernel is radial, `K(r) = k(|r|)`. Derivatives are written through the
//! profile `k'(ρ)/ρ`, which is smooth at the origin for all families here, so
//! `grad K(r) = (k'/ρ) r` and `Hess K(r) = (k'/ρ) I + c(ρ) r rᵀ`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel families with closed-form first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "matern_3_2")]
    Matern32,
    #[serde(rename = "matern_5_2")]
    Matern52,
}

/// A radial kernel with a positive length scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawKernelSpec")]
pub struct KernelSpec {
    family: KernelFamily,
    sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernelSpec {
    family: KernelFamily,
    sigma: f64,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;
    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.sigma)
    }
}

/// Radial data at one distance: the value, `k'(ρ)/ρ`, and the coefficient of
/// `r rᵀ` in the Hessian.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Radial {
    pub value: f64,
    pub slope: f64,
    pub curl: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("kernel sigma must be positive, got {sigma}")));
        }
        Ok(Self { family, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Smallest admissible distance between two landmarks.
    pub fn min_separation(&self) -> f64 {
        1e-8 * self.sigma
    }

    pub(crate) fn radial_sq(&self, rho2: f64) -> Radial {
        let s = self.sigma;
        match self.family {
            KernelFamily::Gaussian => {
                let s2 = s * s;
                let value = (-0.5 * rho2 / s2).exp();
                Radial { value, slope: -value / s2, curl: value / (s2 * s2) }
            }
            KernelFamily::Matern32 => {
                let a = 3f64.sqrt() / s;
                let rho = rho2.sqrt();
                let e = (-a * rho).exp();
                // a^3 e^{-aρ} ρ r̂r̂ᵀ is continuous and vanishes at ρ = 0.
                let curl = if rho > 0.0 { a * a * a * e / rho } else { 0.0 };
                Radial { value: (1.0 + a * rho) * e, slope: -a * a * e, curl }
            }
            KernelFamily::Matern52 => {
                let a = 5f64.sqrt() / s;
                let rho = rho2.sqrt();
                let e = (-a * rho).exp();
                let a2 = a * a;
                Radial {
                    value: (1.0 + a * rho + a2 * rho2 / 3.0) * e,
                    slope: -(a2 / 3.0) * (1.0 + a * rho) * e,
                    curl: a2 * a2 / 3.0 * e,
                }
            }
        }
    }

    /// `K(r)`.
    pub fn eval(&self, r: &[f64]) -> f64 {
        self.radial_sq(norm_sq(r)).value
    }

    /// Gradient of `K` at `r`.
    pub fn grad(&self, r: &[f64]) -> DVector<f64> {
        let rad = self.radial_sq(norm_sq(r));
        DVector::from_iterator(r.len(), r.iter().map(|x| rad.slope * x))
    }

    /// Hessian of `K` at `r`.
    pub fn hess(&self, r: &[f64]) -> DMatrix<f64> {
        let rad = self.radial_sq(norm_sq(r));
        let n = r.len();
        DMatrix::from_fn(n, n, |a, b| {
            let diag = if a == b { rad.slope } else { 0.0 };
            diag + rad.curl * r[a] * r[b]
        })
    }

    /// `d²K(r)(u, v)` without forming the Hessian.
    pub(crate) fn hess_form(&self, r: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let rad = self.radial_sq(norm_sq(r));
        rad.slope * dot(u, v) + rad.curl * dot(r, u) * dot(r, v)
    }
}

pub(crate) fn norm_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `N` labelled points in `Rⁿ`, stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkConfig {
    points: DMatrix<f64>,
}

impl LandmarkConfig {
    /// Wrap an `N × n` matrix of points. Distinctness is checked against a
    /// kernel scale by [`LandmarkConfig::check_separation`].
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::invalid("landmark configuration needs N >= 1 and n >= 1"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("landmark coordinates must be finite"));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("landmark rows have different dimensions"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(rows.len(), n, &flat))
    }

    pub fn num_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.points
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_points()).map(|i| self.point(i)).collect()
    }

    /// Smallest pairwise Euclidean distance (infinite for a single point).
    pub fn min_separation(&self) -> f64 {
        min_pair_distance(&self.points)
    }

    /// Largest pairwise Euclidean distance.
    pub fn diameter(&self) -> f64 {
        let q = &self.points;
        let mut d: f64 = 0.0;
        for i in 0..q.nrows() {
            for j in 0..i {
                d = d.max((q.row(i) - q.row(j)).norm());
            }
        }
        d
    }

    pub fn check_separation(&self, eps: f64) -> Result<()> {
        let d = self.min_separation();
        if d <= eps {
            return Err(Error::DegenerateConfig(format!(
                "landmarks closer than {eps:e} (minimum separation {d:e})"
            )));
        }
        Ok(())
    }

    /// Translate every point by the same vector.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::invalid("shift has the wrong dimension"));
        }
        let mut p = self.points.clone();
        for mut row in p.row_iter_mut() {
            for (x, s) in row.iter_mut().zip(shift) {
                *x += s;
            }
        }
        Ok(Self { points: p })
    }
}

pub(crate) fn min_pair_distance(q: &DMatrix<f64>) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..q.nrows() {
        for j in 0..i {
            let mut s = 0.0;
            for c in 0..q.ncols() {
                let t = q[(i, c)] - q[(j, c)];
                s += t * t;
            }
            d = d.min(s.sqrt());
        }
    }
    d
}

/// Kernel matrix `K(q)_ij = K(q_i − q_j)` without any checks.
pub(crate) fn gram(k: &KernelSpec, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let mut m = DMatrix::zeros(n, n);
    let mut r = vec![0.0; q.ncols()];
    for i in 0..n {
        m[(i, i)] = k.radial_sq(0.0).value;
        for j in 0..i {
            for (c, rc) in r.iter_mut().enumerate() {
                *rc = q[(i, c)] - q[(j, c)];
            }
            let v = k.eval(&r);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// The symmetric positive-definite kernel matrix of a configuration.
pub fn kernel_matrix(k: &KernelSpec, q: &LandmarkConfig) -> Result<DMatrix<f64>> {
    Ok(KernelFactor::new(k, q)?.matrix().clone())
}

/// Solve `K(q) X = rhs` for an `N × m` right-hand side.
pub fn kernel_solve(k: &KernelSpec, q: &LandmarkConfig, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    KernelFactor::new(k, q)?.solve(rhs)
}

/// Cholesky factorization of a kernel matrix, reused across solves.
#[derive(Debug, Clone)]
pub struct KernelFactor {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl KernelFactor {
    pub fn new(k: &KernelSpec, q: &LandmarkConfig) -> Result<Self> {
        Self::with_ridge(k, q, 0.0)
    }

    /// Factor `K(q) + ridge·I`. A zero ridge is the exact kernel matrix.
    pub fn with_ridge(k: &KernelSpec, q: &LandmarkConfig, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::invalid(format!("ridge must be nonnegative, got {ridge}")));
        }
        q.check_separation(k.min_separation())?;
        let mut matrix = gram(k, q.as_matrix());
        for i in 0..matrix.nrows() {
            matrix[(i, i)] += ridge;
        }
        Self::from_matrix(matrix)
    }

    pub(crate) fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(matrix.clone()).ok_or_else(|| {
            Error::DegenerateConfig("kernel matrix is not numerically positive definite".into())
        })?;
        // A factor with a vanishing pivot solves to garbage; treat as degenerate.
        let l = chol.l_dirty();
        let dmax = (0..l.nrows()).map(|i| l[(i, i)]).fold(0.0, f64::max);
        let dmin = (0..l.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(dmin > 1e-12 * dmax) {
            return Err(Error::DegenerateConfig(format!(
                "kernel matrix is numerically singular (pivot ratio {:e})",
                dmin / dmax
            )));
        }
        Ok(Self { matrix, chol })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rhs.nrows() != self.matrix.nrows() {
            return Err(Error::invalid(format!(
                "right-hand side has {} rows, kernel matrix has {}",
                rhs.nrows(),
                self.matrix.nrows()
            )));
        }
        Ok(self.chol.solve(rhs))
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Lower-triangular factor `L` with `K = L Lᵀ`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [KernelFamily; 3] = [KernelFamily::Gaussian, KernelFamily::Matern32, KernelFamily::Matern52];

    #[test]
    fn gaussian_closed_forms() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(k.eval(&[0.0, 0.0]), 1.0);
        let k2 = KernelSpec::gaussian(2.0).unwrap();
        assert!((k2.eval(&[2.0, 0.0]) - (-0.5f64).exp()).abs() < 1e-15);
        let g = k.grad(&[1.0, 0.0]);
        assert!((g[0] + (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
        let h = k.hess(&[0.0, 0.0, 0.0]);
        assert_eq!(h, -DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn gradient_vanishes_at_origin() {
        for fam in ALL {
            let k = KernelSpec::new(fam, 0.7).unwrap();
            assert!(k.grad(&[0.0, 0.0]).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn matern_values_at_origin_and_scale() {
        let k = KernelSpec::new(KernelFamily::Matern32, 1.0).unwrap();
        let a = 3f64.sqrt();
        assert!((k.eval(&[1.0]) - (1.0 + a) * (-a).exp()).abs() < 1e-15);
        let k = KernelSpec::new(KernelFamily::Matern52, 1.0).unwrap();
        let a = 5f64.sqrt();
        assert!((k.eval(&[1.0]) - (1.0 + a + a * a / 3.0) * (-a).exp()).abs() < 1e-15);
        // Curvature at the origin: -1/σ², -3/σ², -5/(3σ²).
        for (fam, c) in [(KernelFamily::Gaussian, 1.0), (KernelFamily::Matern32, 3.0), (KernelFamily::Matern52, 5.0 / 3.0)] {
            let k = KernelSpec::new(fam, 0.5).unwrap();
            assert!((k.hess(&[0.0])[(0, 0)] + 4.0 * c).abs() < 1e-13, "{fam:?}");
        }
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
    }

    #[test]
    fn two_point_matrix() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let q = LandmarkConfig::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let m = kernel_matrix(&k, &q).unwrap();
        let e = (-0.5f64).exp();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, e, e, 1.0]));
    }

    #[test]
    fn single_point_solve() {
        let k = KernelSpec::new(KernelFamily::Matern52, 0.3).unwrap();
        let q = LandmarkConfig::from_rows(&[vec![0.2, -1.0]]).unwrap();
        let rhs = DMatrix::from_row_slice(1, 2, &[3.0, -4.0]);
        assert_eq!(kernel_solve(&k, &q, &rhs).unwrap(), rhs);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let q = LandmarkConfig::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(kernel_matrix(&k, &q), Err(Error::DegenerateConfig(_))));
    }

    #[test]
    fn kernel_spec_json_round_trip() {
        let k = KernelSpec::new(KernelFamily::Matern32, 0.5).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"family":"matern_3_2","sigma":0.5}"#);
        let back: KernelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"gaussian","sigma":-1}"#).is_err());
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"gaussian","sigma":1,"x":0}"#).is_err());
    }
}

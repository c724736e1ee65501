//! Stress, force and the sectional-curvature numerator on landmark space, with
//! a finite-difference Riemann tensor as an independent reference.
//!
//! Curvature is organized around constant covector fields `α`, `β` whose sharps
//! `α♯ = K(q)α`, `β♯ = K(q)β` span the plane. The reported numerator follows the
//! convention `g(R(X,Y)Y, X)` with `R(X,Y) = [∇_X, ∇_Y] − ∇_[X,Y]`, so that
//! `sectional = numerator / denominator` is positive on round spheres.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_shape, pairing};
use crate::error::{Error, Result};
use crate::kernels::{gram, KernelFactor, KernelSpec, LandmarkConfig};

fn diff_rows(m: &DMatrix<f64>, i: usize, j: usize) -> Vec<f64> {
    (0..m.ncols()).map(|c| m[(i, c)] - m[(j, c)]).collect()
}

fn check_pair(q: &LandmarkConfig, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    check_shape(q, a, "alpha")?;
    check_shape(q, b, "beta")
}

/// `D(α,β)_i = Σ_j ⟨grad K(q_i − q_j), α♯_i − α♯_j⟩ β_j`, a tangent vector.
pub fn stress(k: &KernelSpec, q: &LandmarkConfig, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_pair(q, a, b)?;
    let a_sharp = gram(k, q.as_matrix()) * a;
    Ok(stress_with(k, q.as_matrix(), &a_sharp, b))
}

fn stress_with(k: &KernelSpec, q: &DMatrix<f64>, a_sharp: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (npts, dim) = q.shape();
    let mut out = DMatrix::zeros(npts, dim);
    for i in 0..npts {
        for j in 0..npts {
            if i == j {
                continue;
            }
            let g = k.grad(&diff_rows(q, i, j));
            let s: f64 = (0..dim).map(|c| g[c] * (a_sharp[(i, c)] - a_sharp[(j, c)])).sum();
            for c in 0..dim {
                out[(i, c)] += s * b[(j, c)];
            }
        }
    }
    out
}

/// `F_i(α,β) = ½ Σ_k grad K(q_i − q_k)(⟨α_i, β_k⟩ + ⟨β_i, α_k⟩)`, a covector.
pub fn force(k: &KernelSpec, q: &LandmarkConfig, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_pair(q, a, b)?;
    Ok(force_with(k, q.as_matrix(), a, b))
}

fn force_with(k: &KernelSpec, q: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (npts, dim) = q.shape();
    let mut out = DMatrix::zeros(npts, dim);
    for i in 0..npts {
        for m in 0..npts {
            if i == m {
                continue;
            }
            let g = k.grad(&diff_rows(q, i, m));
            let w = 0.5 * (a.row(i).dot(&b.row(m)) + b.row(i).dot(&a.row(m)));
            for c in 0..dim {
                out[(i, c)] += w * g[c];
            }
        }
    }
    out
}

/// Jacobian of `q ↦ K(q) β` for fixed `β`, as an `Nn × Nn` matrix in
/// row-major landmark ordering.
pub fn sharp_jacobian(k: &KernelSpec, q: &LandmarkConfig, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shape(q, b, "beta")?;
    let qm = q.as_matrix();
    let (npts, dim) = qm.shape();
    let mut jac = DMatrix::zeros(npts * dim, npts * dim);
    for i in 0..npts {
        for m in 0..npts {
            if i == m {
                continue;
            }
            let g = k.grad(&diff_rows(qm, i, m));
            for c in 0..dim {
                for d in 0..dim {
                    // K(q_i − q_m) β_m depends on q_i and, with opposite sign, on q_m.
                    let v = b[(m, c)] * g[d];
                    jac[(i * dim + c, i * dim + d)] += v;
                    jac[(i * dim + c, m * dim + d)] -= v;
                }
            }
        }
    }
    Ok(jac)
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.len(), (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |c| m[(i, c)])))
}

fn unflatten(v: &DVector<f64>, npts: usize, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(npts, dim, |i, c| v[i * dim + c])
}

/// Lie bracket `[α♯, β♯] = D_{α♯} β♯ − D_{β♯} α♯` of the two sharp vector
/// fields, assembled from their Jacobians.
pub fn lie_bracket(k: &KernelSpec, q: &LandmarkConfig, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_pair(q, a, b)?;
    let km = gram(k, q.as_matrix());
    let (xa, xb) = (flatten(&(&km * a)), flatten(&(&km * b)));
    let v = sharp_jacobian(k, q, b)? * xa - sharp_jacobian(k, q, a)? * xb;
    Ok(unflatten(&v, q.num_points(), q.dim()))
}

/// Per-term breakdown of the cotangent curvature expression. The four
/// entries sum to `g(R(α♯,β♯)α♯, β♯)`, which is `−numerator`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTerms {
    pub stress_force_terms: f64,
    #[serde(rename = "d2K_terms")]
    pub d2k_terms: f64,
    pub force_norm_terms: f64,
    pub oneill_term: f64,
}

impl CurvatureTerms {
    pub fn total(&self) -> f64 {
        self.stress_force_terms + self.d2k_terms + self.force_norm_terms + self.oneill_term
    }
}

/// Sectional-curvature data for the plane spanned by `α♯` and `β♯`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    /// `g(R(α♯,β♯)β♯, α♯)`.
    pub numerator: f64,
    /// `‖α♯‖²‖β♯‖² − g(α♯,β♯)²`.
    pub denominator: f64,
    /// `None` when the plane is degenerate.
    pub sectional: Option<f64>,
    pub terms: CurvatureTerms,
}

/// Planes with squared area below this are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Curvature numerator through stress and force.
pub fn sectional_numerator(
    k: &KernelSpec,
    q: &LandmarkConfig,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<CurvatureReport> {
    check_pair(q, a, b)?;
    let factor = KernelFactor::new(k, q)?;
    let qm = q.as_matrix();
    let km = factor.matrix();
    let (xa, xb) = (km * a, km * b);

    let d_ab = stress_with(k, qm, &xa, b);
    let d_ba = stress_with(k, qm, &xb, a);
    let d_aa = stress_with(k, qm, &xa, a);
    let d_bb = stress_with(k, qm, &xb, b);
    let f_ab = force_with(k, qm, a, b);
    let f_aa = force_with(k, qm, a, a);
    let f_bb = force_with(k, qm, b, b);

    let stress_force_terms =
        pairing(&(&d_ab + &d_ba), &f_ab) - pairing(&d_aa, &f_bb) - pairing(&d_bb, &f_aa);

    let npts = q.num_points();
    let mut triple = 0.0;
    for i in 0..npts {
        for j in 0..npts {
            if i == j {
                continue;
            }
            let r = diff_rows(qm, i, j);
            let da = diff_rows(&xa, i, j);
            let db = diff_rows(&xb, i, j);
            triple += k.hess_form(&r, &db, &db) * a.row(i).dot(&a.row(j))
                - 2.0 * k.hess_form(&r, &db, &da) * b.row(i).dot(&a.row(j))
                + k.hess_form(&r, &da, &da) * b.row(i).dot(&b.row(j));
        }
    }
    let d2k_terms = -0.5 * triple;

    let force_norm_terms = -pairing(&f_ab, &(km * &f_ab)) + pairing(&f_aa, &(km * &f_bb));

    let bracket = &d_ab - &d_ba;
    let oneill_term = 0.75 * pairing(&bracket, &factor.solve(&bracket)?);

    let terms = CurvatureTerms { stress_force_terms, d2k_terms, force_norm_terms, oneill_term };
    let (gaa, gbb, gab) = (pairing(a, &xa), pairing(b, &xb), pairing(a, &xb));
    let denominator = gaa * gbb - gab * gab;
    let numerator = -terms.total();
    let sectional = (denominator > DEGENERATE_AREA).then(|| numerator / denominator);
    Ok(CurvatureReport { numerator, denominator, sectional, terms })
}

/// Metric `K(q)⁻¹ ⊗ I_n` in flat coordinates, and its inverse.
fn metric_matrices(k: &KernelSpec, x: &DVector<f64>, npts: usize, dim: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let q = LandmarkConfig::new(unflatten(x, npts, dim))?;
    let f = KernelFactor::new(k, &q)?;
    let kinv = f.inverse();
    let km = f.matrix();
    let big = |m: &DMatrix<f64>| {
        DMatrix::from_fn(npts * dim, npts * dim, |r, c| if r % dim == c % dim { m[(r / dim, c / dim)] } else { 0.0 })
    };
    Ok((big(&kinv), big(km)))
}

struct ChartMetric<'a> {
    kernel: &'a KernelSpec,
    npts: usize,
    dim: usize,
    h: f64,
}

impl ChartMetric<'_> {
    fn g(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(metric_matrices(self.kernel, x, self.npts, self.dim)?.0)
    }

    fn dir_deriv(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let h = self.h;
        Ok((self.g(&(x + u * h))? - self.g(&(x - u * h))?) / (2.0 * h))
    }

    /// `Γ_x(u, v)` from central differences of the metric.
    fn christoffel(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let dim = x.len();
        let h = self.h;
        let (_, ginv) = metric_matrices(self.kernel, x, self.npts, self.dim)?;
        let du = self.dir_deriv(x, u)?;
        let dv = self.dir_deriv(x, v)?;
        let mut grad = DVector::zeros(dim);
        for e in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[e] += h;
            xm[e] -= h;
            grad[e] = (u.dot(&(self.g(&xp)? * v)) - u.dot(&(self.g(&xm)? * v))) / (2.0 * h);
        }
        Ok(ginv * (du * v + dv * u - grad) * 0.5)
    }

    fn numerator(&self, x: &DVector<f64>, xv: &DVector<f64>, yv: &DVector<f64>) -> Result<f64> {
        let h = self.h;
        let gyy = |p: &DVector<f64>| self.christoffel(p, yv, yv);
        let gxy = |p: &DVector<f64>| self.christoffel(p, xv, yv);
        let d_x = (gyy(&(x + xv * h))? - gyy(&(x - xv * h))?) / (2.0 * h);
        let d_y = (gxy(&(x + yv * h))? - gxy(&(x - yv * h))?) / (2.0 * h);
        let r = d_x - d_y + self.christoffel(x, xv, &gyy(x)?)? - self.christoffel(x, yv, &gxy(x)?)?;
        Ok(xv.dot(&(self.g(x)? * r)))
    }
}

/// Largest tolerated relative disagreement between the two FD step sizes.
pub const RICHARDSON_TOLERANCE: f64 = 1e-2;

/// `g(R(P1,P2)P2, P1)` from Christoffel symbols of the flat-chart metric
/// `K(q)⁻¹ ⊗ I_n`, obtained by central finite differences. The step is
/// `1e−3 · diameter`; one halving gives a Richardson-extrapolated value.
pub fn riemann_fd_oracle(k: &KernelSpec, q: &LandmarkConfig, p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> Result<f64> {
    check_shape(q, p1, "P1")?;
    check_shape(q, p2, "P2")?;
    KernelFactor::new(k, q)?;
    let (npts, dim) = (q.num_points(), q.dim());
    if npts == 1 {
        return Ok(0.0);
    }
    let diam = q.diameter();
    let base = 1e-3 * if diam > 0.0 { diam } else { k.sigma() };
    let x = flatten(q.as_matrix());
    let (xv, yv) = (flatten(p1), flatten(p2));
    let coarse = ChartMetric { kernel: k, npts, dim, h: base }.numerator(&x, &xv, &yv)?;
    let fine = ChartMetric { kernel: k, npts, dim, h: 0.5 * base }.numerator(&x, &xv, &yv)?;
    let g = metric_matrices(k, &x, npts, dim)?.0;
    let (gxx, gyy, gxy) = (xv.dot(&(&g * &xv)), yv.dot(&(&g * &yv)), xv.dot(&(&g * &yv)));
    // Disagreement is judged against the natural size of the numerator.
    let scale = fine.abs().max(1e-8 * (gxx * gyy).max(gxy * gxy));
    let gap = (coarse - fine).abs() / scale;
    if !(gap <= RICHARDSON_TOLERANCE) {
        return Err(Error::IllConditioned(format!(
            "step halving changed the curvature numerator by {gap:e} relative"
        )));
    }
    Ok((4.0 * fine - coarse) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss() -> KernelSpec {
        KernelSpec::gaussian(1.0).unwrap()
    }

    fn two_points() -> LandmarkConfig {
        LandmarkConfig::from_rows(&[vec![0.0], vec![1.5]]).unwrap()
    }

    #[test]
    fn single_landmark_is_flat() {
        let q = LandmarkConfig::from_rows(&[vec![0.3, 0.1]]).unwrap();
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.5]);
        let b = DMatrix::from_row_slice(1, 2, &[-0.2, 2.0]);
        assert!(stress(&gauss(), &q, &a, &b).unwrap().iter().all(|&x| x == 0.0));
        assert!(force(&gauss(), &q, &a, &a).unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(sectional_numerator(&gauss(), &q, &a, &b).unwrap().numerator, 0.0);
        assert_eq!(riemann_fd_oracle(&gauss(), &q, &a, &b).unwrap(), 0.0);
    }

    #[test]
    fn parallel_plane_has_zero_numerator() {
        let a = DMatrix::from_row_slice(2, 1, &[0.7, -0.4]);
        let r = sectional_numerator(&gauss(), &two_points(), &a, &a).unwrap();
        assert!(r.numerator.abs() < 1e-14);
        assert_eq!(r.sectional, None);
    }

    #[test]
    fn two_landmark_benchmark_matches_oracle() {
        let q = two_points();
        let a = DMatrix::from_row_slice(2, 1, &[0.8, -0.3]);
        let b = DMatrix::from_row_slice(2, 1, &[0.1, 1.1]);
        let r = sectional_numerator(&gauss(), &q, &a, &b).unwrap();
        let km = kernel_matrix_for(&q);
        let o = riemann_fd_oracle(&gauss(), &q, &(&km * &a), &(&km * &b)).unwrap();
        assert!((r.numerator - o).abs() < 1e-3 * o.abs(), "{} vs {o}", r.numerator);
        assert!(r.terms.oneill_term >= 0.0);
    }

    fn kernel_matrix_for(q: &LandmarkConfig) -> DMatrix<f64> {
        crate::kernels::kernel_matrix(&gauss(), q).unwrap()
    }
}

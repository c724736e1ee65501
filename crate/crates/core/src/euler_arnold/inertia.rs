use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{assert_same_grid, wavenumber, PeriodicField};
use crate::error::{Error, Result};

/// Inertia operator `L = (1 + Δ)^s` with `Δ = −∂_x²`, multiplier `(1 + k²)^s`.
///
/// The metric at the identity is `γ(X, Y) = (1/2π) ∮ (LX) Y dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInertia")]
pub struct InertiaOp {
    order: f64,
    size: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInertia {
    order: f64,
    size: usize,
}

impl TryFrom<RawInertia> for InertiaOp {
    type Error = Error;
    fn try_from(r: RawInertia) -> Result<Self> {
        InertiaOp::new(r.order, r.size)
    }
}

impl InertiaOp {
    pub fn new(order: f64, size: usize) -> Result<Self> {
        if !(order.is_finite() && order >= 0.0) {
            return Err(Error::invalid(format!("Sobolev order must be a nonnegative number, got {order}")));
        }
        if size < 8 || !size.is_power_of_two() {
            return Err(Error::invalid(format!(
                "periodic grids need a power of two with at least 8 points, got {size}"
            )));
        }
        Ok(Self { order, size })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn multiplier(&self, k: i64) -> f64 {
        (1.0 + (k * k) as f64).powf(self.order)
    }

    fn check(&self, u: &PeriodicField) {
        assert_eq!(u.len(), self.size, "field grid does not match the inertia operator");
    }

    fn scale_modes(&self, u: &PeriodicField, invert: bool) -> PeriodicField {
        self.check(u);
        let mut c = u.coefficients();
        for (j, cj) in c.iter_mut().enumerate() {
            let m = self.multiplier(wavenumber(j, self.size));
            *cj *= if invert { 1.0 / m } else { m };
        }
        PeriodicField::from_coefficients(&c).expect("same grid")
    }

    /// `m = L u`.
    pub fn apply(&self, u: &PeriodicField) -> PeriodicField {
        self.scale_modes(u, false)
    }

    /// `u = K m` with `K = L⁻¹`.
    pub fn invert(&self, m: &PeriodicField) -> PeriodicField {
        self.scale_modes(m, true)
    }

    /// `γ(X, Y)`, evaluated exactly as `Σ_k (1 + k²)^s Re(X̂_k conj Ŷ_k)`.
    pub fn metric(&self, x: &PeriodicField, y: &PeriodicField) -> f64 {
        self.check(x);
        self.check(y);
        let (cx, cy) = (x.coefficients(), y.coefficients());
        cx.iter()
            .zip(&cy)
            .enumerate()
            .map(|(j, (a, b))| self.multiplier(wavenumber(j, self.size)) * (a * b.conj()).re)
            .sum()
    }

    pub fn norm_sq(&self, x: &PeriodicField) -> f64 {
        self.metric(x, x)
    }

    /// Right-hand side of the Euler–Arnold equation `u_t = −K ad*_u(L u)`.
    pub fn rhs(&self, u: &PeriodicField) -> PeriodicField {
        &self.invert(&ad_star(u, &self.apply(u))) * -1.0
    }

    /// `ρ(ξ)η = ½ K(ad*_ξ(Lη) + ad*_η(Lξ))`, the symmetric part of the
    /// covariant derivative `∇_ξ η`. Meaningful for `s ≥ 1`.
    pub fn rho(&self, xi: &PeriodicField, eta: &PeriodicField) -> PeriodicField {
        let sum = &ad_star(xi, &self.apply(eta)) + &ad_star(eta, &self.apply(xi));
        &self.invert(&sum) * 0.5
    }

    /// `ad(X)ᵀ Y = K ad*_X(L Y)`, the `γ`-transpose of `ad(X)`.
    pub fn ad_transpose(&self, x: &PeriodicField, y: &PeriodicField) -> PeriodicField {
        self.invert(&ad_star(x, &self.apply(y)))
    }

    /// Numerator `γ(R(X,Y)X, Y)` of the sectional curvature at the identity
    /// from the `ρ` operator:
    /// `γ(ρ_X X, ρ_Y Y) − ‖ρ_X Y‖² + ¾‖[X,Y]‖² − γ(ρ_X Y, [X,Y]) + γ(Y, [X,[X,Y]])`.
    ///
    /// Assumes `s ≥ 1`; see [`InertiaOp::arnold_numerator`] for the guarded
    /// variant.
    pub fn sectional_numerator(&self, x: &PeriodicField, y: &PeriodicField) -> f64 {
        let xy = bracket(x, y);
        let rxy = self.rho(x, y);
        self.metric(&self.rho(x, x), &self.rho(y, y)) - self.norm_sq(&rxy) + 0.75 * self.norm_sq(&xy)
            - self.metric(&rxy, &xy)
            + self.metric(y, &bracket(x, &xy))
    }

    /// The same numerator by Arnold's four-term formula in `ad(·)ᵀ`:
    /// `−¼‖ad(X)ᵀY + ad(Y)ᵀX‖² + γ(ad(X)ᵀX, ad(Y)ᵀY)
    ///  + ½γ(ad(X)ᵀY − ad(Y)ᵀX, ad(X)Y) + ¾‖[X,Y]‖²`.
    pub fn arnold_numerator(&self, x: &PeriodicField, y: &PeriodicField) -> Result<f64> {
        if self.order < 1.0 {
            return Err(Error::OrderTooLow { order: self.order, min: 1.0 });
        }
        let xy = bracket(x, y);
        let txy = self.ad_transpose(x, y);
        let tyx = self.ad_transpose(y, x);
        Ok(-0.25 * self.norm_sq(&(&txy + &tyx))
            + self.metric(&self.ad_transpose(x, x), &self.ad_transpose(y, y))
            + 0.5 * self.metric(&(&txy - &tyx), &xy)
            + 0.75 * self.norm_sq(&xy))
    }

    /// `½ Σ_i γ(u_i, u_i) Δt` over a sampled velocity path.
    pub fn path_energy(&self, path: &[PeriodicField], dt: f64) -> f64 {
        0.5 * dt * path.iter().map(|u| self.norm_sq(u)).sum::<f64>()
    }
}

/// `ad*_u(m) = u m_x + 2 u_x m`, the Lie derivative of the momentum density
/// `m dx²` along `u`.
pub fn ad_star(u: &PeriodicField, m: &PeriodicField) -> PeriodicField {
    assert_same_grid(u, m);
    let a = u.product(&m.derivative(1));
    let b = u.derivative(1).product(m);
    &a + &(&b * 2.0)
}

/// Bracket `[X, Y] = ad(X)Y = X_x Y − X Y_x`, the negative of the usual
/// vector-field bracket (right-invariant convention).
pub fn bracket(x: &PeriodicField, y: &PeriodicField) -> PeriodicField {
    assert_same_grid(x, y);
    &x.derivative(1).product(y) - &x.product(&y.derivative(1))
}

/// Random real field with modes `1 ≤ |k| ≤ max_mode` and `O(1)` amplitude
/// decaying like `1/k`. Used by tests and the self-check.
pub fn low_mode_field(size: usize, max_mode: usize, coeffs: &[(f64, f64)]) -> Result<PeriodicField> {
    if max_mode == 0 || 2 * max_mode >= size || coeffs.len() < max_mode {
        return Err(Error::invalid("low-mode field needs 0 < max_mode < size/2 and one coefficient pair per mode"));
    }
    let mut c = vec![Complex64::new(0.0, 0.0); size];
    for k in 1..=max_mode {
        let (re, im) = coeffs[k - 1];
        let z = Complex64::new(re, im) / k as f64;
        c[k] = z;
        c[size - k] = z.conj();
    }
    PeriodicField::from_coefficients(&c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(m: usize, g: impl Fn(f64) -> f64) -> PeriodicField {
        PeriodicField::from_fn(m, g).unwrap()
    }

    #[test]
    fn cosine_through_h1() {
        let op = InertiaOp::new(1.0, 32).unwrap();
        let u = f(32, f64::cos);
        assert!(op.apply(&u).max_abs_diff(&(&u * 2.0)) < 1e-13);
        assert!(op.invert(&op.apply(&u)).max_abs_diff(&u) < 1e-13);
    }

    #[test]
    fn l2_metric_of_cosine() {
        let op = InertiaOp::new(0.0, 32).unwrap();
        let c = f(32, f64::cos);
        assert!((op.metric(&c, &c) - 0.5).abs() < 1e-15);
        let s = f(32, f64::sin);
        assert!(op.metric(&c, &s).abs() < 1e-15);
    }

    #[test]
    fn ad_star_of_cosines() {
        let c = f(32, f64::cos);
        let want = f(32, |x| -1.5 * (2.0 * x).sin());
        assert!(ad_star(&c, &c).max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn burgers_rhs() {
        let op = InertiaOp::new(0.0, 32).unwrap();
        let want = f(32, |x| 1.5 * (2.0 * x).sin());
        assert!(op.rhs(&f(32, f64::cos)).max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn bracket_sign() {
        // [cos, sin] = cos_x sin − cos sin_x = −sin² − cos² = −1
        let b = bracket(&f(32, f64::cos), &f(32, f64::sin));
        assert!(b.max_abs_diff(&PeriodicField::constant(32, -1.0).unwrap()) < 1e-13);
    }

    #[test]
    fn arnold_refuses_low_order() {
        let op = InertiaOp::new(0.25, 32).unwrap();
        let c = f(32, f64::cos);
        assert!(matches!(op.arnold_numerator(&c, &c), Err(Error::OrderTooLow { .. })));
    }

    #[test]
    fn numerators_agree_on_cos_sin() {
        let op = InertiaOp::new(1.0, 64).unwrap();
        let (x, y) = (f(64, f64::cos), f(64, f64::sin));
        let a = op.sectional_numerator(&x, &y);
        let b = op.arnold_numerator(&x, &y).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn rejects_negative_order() {
        assert!(InertiaOp::new(-1.0, 32).is_err());
        assert!(InertiaOp::new(1.0, 30).is_err());
    }
}

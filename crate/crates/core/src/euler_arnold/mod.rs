//! Right-invariant Sobolev metrics `Hˢ` on the diffeomorphism group of the
//! circle.
//!
//! Fields are sampled on `M` equispaced points and handled spectrally. The
//! inertia operator is `L = (1 + Δ)^s` with `Δ = −∂_x²`, and the metric at the
//! identity is `γ(X, Y) = (1/2π) ∮ (LX) Y dx`. For `s = 0` the geodesic
//! equation is the inviscid Burgers equation `u_t = −3 u u_x`, for `s = 1` it
//! is Camassa–Holm.
//!
//! Brackets follow the right-invariant convention `[X, Y] = X_x Y − X Y_x`.

mod evolve;
mod field;
mod inertia;
mod vanish;

pub use evolve::{ea_evolve, EaDiagnostics, EaEvolveOptions, EaTrajectory, BLOWUP_TAIL, RESOLVED_TAIL};
pub use field::PeriodicField;
pub use inertia::{ad_star, bracket, low_mode_field, InertiaOp};
pub use vanish::{vanish_distance_experiment, PathStart, VanishLevel, VanishOptions, VanishTable};

//! Numerical geometry of right-invariant metrics on diffeomorphism groups.
//!
//! * [`kernels`]: radial kernels and kernel matrices over landmark configurations.
//! * [`dynamics`]: metric, cometric and geodesic shooting on landmark space.
//! * [`curvature`]: stress, force and sectional curvature on landmark space.
//! * [`matching`]: exact and inexact geodesic matching of landmark sets.
//! * [`hunter_saxton`]: the homogeneous `Ḣ¹` geometry of line diffeomorphisms,
//!   flattened by the square-root map.
//! * [`euler_arnold`]: Sobolev `Hˢ` metrics on circle diffeomorphisms.
//! * [`ode`]: fixed-step and adaptive time steppers.

pub mod curvature;
pub mod dynamics;
pub mod error;
pub mod euler_arnold;
pub mod hunter_saxton;
pub mod kernels;
pub mod matching;
pub mod ode;

pub use error::{Error, Result};

//! Numerical laboratory for the scale-critical curve diffusion flow
//!
//! ```text
//! ∂t γ = −(k_ss + c k³) N
//! ```
//!
//! and its length-normalised variant, for closed immersed planar curves.
//!
//! The crate is organised bottom-up:
//!
//! - [`special_functions`]: elliptic integrals, Jacobi elliptic functions and
//!   the closure integral that decides which super-lemniscates close up.
//! - [`geometry`]: sampled closed curves and their scale/shape diagnostics.
//! - [`stationary`]: circles and super-lemniscates, the homothetic identities.
//! - [`spectral_stability`]: the quartic symbol `p_c`, spectral gaps,
//!   stability thresholds and stable-ω sets (exact rational arithmetic).
//! - [`flow`]: RK4 integration of both flows with diagnostics.
//! - [`perturbation`]: support-function perturbations, the quadratic form `Q`,
//!   its remainder `R`, and the instability experiment.
//!
//! Conventions used everywhere: the normal is the tangent rotated by +π/2, so
//! a counterclockwise unit circle has curvature `+1`; curves are sampled on a
//! uniform grid of the periodic parameter `x ∈ [0, 2π)`.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod perturbation;
pub mod spectral_stability;
pub mod special_functions;
pub mod stationary;

mod quadrature;
mod spectral;

pub use error::{Error, Result};
pub use geometry::{ClosedCurve, CurveMetrics, FourierModes};

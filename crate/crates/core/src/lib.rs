//! Critical graphs of the quadratic differential `-q(z)/z dz^2` for a monic
//! cubic `q`, the classification curve of the normalized family
//! `q_a(z) = (z-1)(z-a)(z-conj(a))`, and the spectral and potential-theoretic
//! objects attached to it: the quasi-exactly solvable sextic oscillator, the
//! root-counting measures of its eigenpolynomials, and the signed measure
//! whose Cauchy transform solves `zC^2 - (z^2 + gamma z/2)C + (z + delta/4) = 0`.
//!
//! Module map:
//!
//! * [`algebra`]: complex polynomials, simultaneous root finding and small
//!   non-symmetric eigenproblems.
//! * [`quadrature`]: Gauss-Legendre rules and the adaptive integrator used for
//!   period integrals.
//! * [`qdiff`]: the differential itself, its critical points, ray fans and
//!   branch-consistent evaluation of `sqrt(q(z)/z)`.
//! * [`tracer`]: trajectory integration and critical-graph assembly.
//! * [`periods`]: period integrals, the curve Sigma and the apex classifier.
//! * [`spectral`]: the polynomial eigenproblem and its root asymptotics.
//! * [`measure`]: support, density, mass and Cauchy transform of the limit
//!   measure.

pub mod algebra;
pub mod error;
pub mod measure;
pub mod periods;
pub mod qdiff;
pub mod quadrature;
pub mod spectral;
pub mod tracer;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Shorthand constructor for a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

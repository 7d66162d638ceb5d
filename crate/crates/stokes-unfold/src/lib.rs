//! Stokes matrices of a reducible second-order ODE and the monodromy of its
//! unfolding at double resonance.
//!
//! The object of study is the scalar equation obtained by composing the two
//! first-order operators
//!
//! ```text
//! L1 = d/dx - (beta1/x^2 + gamma1),
//! L2 = d/dx - (-2/x + beta2/x^2 + gamma2),
//! ```
//!
//! so that `L2(L1 y) = 0`.  The equation has irregular singular points of
//! Poincare rank 1 at the origin and at infinity, and its Stokes phenomenon
//! at both points is governed by a single Bessel-type entire function
//!
//! ```text
//! phi1(w) = sum_{k>=0} w^k / (k! (k+1)!),
//! S = -phi1(-(gamma2-gamma1)(beta2-beta1)).
//! ```
//!
//! Replacing the two coefficients by partial fractions with simple poles at
//! `x = +-sqrt(eps)` and `x = +-1/sqrt(eps)` unfolds both irregular points
//! into pairs of Fuchsian points.  For `eps` real positive with
//! `(beta2-beta1)/(2 sqrt(eps))` and `(gamma2-gamma1)/(2 sqrt(eps))`
//! integers ("double resonance") the local monodromy around each Fuchsian
//! point factors as a diagonal exponential part times the exponential of a
//! nilpotent upper-triangular part `T = [[0, d], [0, 0]]`, and the scalar
//! `d` has a closed form.  The limit `2 pi i d -> mu` as `sqrt(eps) -> 0`
//! recovers the off-diagonal entries `mu` of the Stokes matrices of the
//! confluent equation.
//!
//! Module layout:
//!
//! * [`specfun`] - log-gamma, gamma ratios, rising factorials and the
//!   Bessel-kernel series `phi1`.
//! * [`model`] - parameter and unfolding types, characteristic exponents,
//!   resonance classification, the five-point singularity census of the
//!   unfolded (Heun-class) equation, and the symmetry transports.
//! * [`stokes`] - the Bessel sum `S`, the divergent series coefficients it
//!   generates, and the Stokes matrices at the origin and at infinity.
//! * [`borel`] - Borel-Laplace 1-summation of those series along rays, the
//!   actually-summed fundamental-matrix entries, and the two-ray jump that
//!   measures the Stokes matrix directly.
//! * [`unfold`] - closed-form nilpotent coefficients `d` at the four
//!   unfolded singular points, the monodromy decomposition, and the
//!   convergence experiment `2 pi i d -> mu`.
//! * [`oracle`] - independent numerical cross-checks: contour-integral
//!   residues, path quadrature for the second fundamental solution, and
//!   monodromy by direct ODE continuation around loops.

pub mod borel;
pub mod mat2;
pub mod model;
pub mod oracle;
pub mod specfun;
pub mod stokes;
pub mod unfold;

pub(crate) mod quad;

pub use mat2::Mat2;

//! Formal data and exact Stokes matrices of the unperturbed equation.
//!
//! Everything here is driven by one absolutely convergent number series
//!
//! ```text
//! S = sum_{n>=0} (-1)^(n+1) (gamma2-gamma1)^n (beta2-beta1)^n / (n! (n+1)!)
//!   = -phi1(-(gamma2-gamma1)(beta2-beta1)),
//! ```
//!
//! where `phi1` is the Bessel-type kernel from [`crate::specfun`].  The
//! Stokes multipliers at the origin and at infinity are `-2 pi i
//! (gamma2-gamma1) S` and `+2 pi i (gamma2-gamma1) S`; the associated
//! divergent series carry the partial sums `S_k` in their coefficients.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::mat2::Mat2;
use crate::model::Params;
use crate::specfun::{bessel_kernel_phi1, principal_arg, SpecFunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StokesError {
    #[error("gamma1 = gamma2: the singular direction at infinity is undefined")]
    DegenerateDirection,
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// A Stokes matrix `[[1, mu], [0, 1]]` attached to the singular direction
/// `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesMatrix {
    /// Singular direction in radians, in `(-pi, pi]`.
    pub theta: f64,
    /// Off-diagonal multiplier.
    pub mu: Complex64,
}

impl StokesMatrix {
    pub fn matrix(&self) -> Mat2 {
        Mat2::upper_unipotent(self.mu)
    }

    /// The direction reduced to `[0, 2 pi)`.
    pub fn theta_mod_2pi(&self) -> f64 {
        let t = self.theta.rem_euclid(2.0 * PI);
        if t == 2.0 * PI { 0.0 } else { t }
    }

    /// True when the matrix is the identity within `tol`.
    pub fn is_trivial(&self, tol: f64) -> bool {
        self.mu.norm() <= tol
    }
}

/// Which coefficient family a [`SeriesCoefficients`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// Coefficients `b_k` of the series in powers of `x` attached to the
    /// origin; `values[k]` multiplies `x^k` (so `values[0] = 0`).
    PsiHat,
    /// Coefficients of the series in powers of `1/x` attached to infinity;
    /// `values[k]` multiplies `x^(-k)` (so `values[0] = 0`).
    PhiHat,
    /// The `a_k` of the three-term recursion; `values[k] = a_k` from `k = 0`.
    RecursionA,
    /// The derived `c_k`; `values[k] = c_k` from `k = 1` (`values[0] = 0`).
    RecursionC,
}

/// A finite slice of one of the formal series, together with the parameters
/// it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients {
    pub kind: SeriesKind,
    pub values: Vec<Complex64>,
    pub params: Params,
}

impl SeriesCoefficients {
    /// Ratio-test radius estimates `|values[k]| / |values[k+1]|` over the
    /// stored range, skipping pairs with a zero denominator.  For a
    /// factorially divergent series the estimates shrink to 0; for a series
    /// with entire sum they grow without bound.
    pub fn ratio_radius_estimates(&self) -> Vec<f64> {
        self.values
            .windows(2)
            .filter(|w| w[1].norm() > 0.0 && w[0].norm() > 0.0)
            .map(|w| w[0].norm() / w[1].norm())
            .collect()
    }
}

fn series_argument(p: &Params) -> Complex64 {
    p.gamma_diff() * p.beta_diff()
}

/// The number `S`, summed through the kernel `phi1`: `S = -phi1(-w)` with
/// `w = (gamma2-gamma1)(beta2-beta1)`.  Truncation error below `tol`.
#[allow(non_snake_case)]
pub fn bessel_sum_S(p: &Params, tol: f64) -> Result<Complex64, SpecFunError> {
    Ok(-bessel_kernel_phi1(-series_argument(p), tol)?.value)
}

/// Partial sums `S_0, ..., S_K` of the series for `S`.  `S_0 = -1` always.
pub fn partial_sums(p: &Params, k_max: usize) -> Vec<Complex64> {
    let w = series_argument(p);
    let mut sums = Vec::with_capacity(k_max + 1);
    // term_n = (-1)^(n+1) w^n / (n! (n+1)!); term_0 = -1
    let mut term = Complex64::new(-1.0, 0.0);
    let mut acc = term;
    sums.push(acc);
    for n in 1..=k_max {
        term *= -w / ((n * (n + 1)) as f64);
        acc += term;
        sums.push(acc);
    }
    sums
}

/// Coefficients `b_k = (-1)^k k! S_{k-1} / (beta2-beta1)^k` of the divergent
/// series attached to the origin, for `k = 1..=k_max`; `values[k]` is the
/// coefficient of `x^k`.
pub fn psi_coefficients(p: &Params, k_max: usize) -> SeriesCoefficients {
    let sums = partial_sums(p, k_max.saturating_sub(1));
    let bd = p.beta_diff();
    let mut values = vec![Complex64::new(0.0, 0.0); k_max + 1];
    // (-1)^k k! / bd^k, built incrementally
    let mut factor = Complex64::new(1.0, 0.0);
    for k in 1..=k_max {
        factor *= -(k as f64) / bd;
        values[k] = factor * sums[k - 1];
    }
    SeriesCoefficients { kind: SeriesKind::PsiHat, values, params: *p }
}

/// Coefficients `k! S_{k-1} / (gamma2-gamma1)^k` of the divergent series in
/// `1/x` attached to infinity, for `k = 1..=k_max`; `values[k]` is the
/// coefficient of `x^(-k)`.  Errors when `gamma1 = gamma2` (the series and
/// its direction degenerate; the closed form takes over elsewhere).
pub fn phi_coefficients(p: &Params, k_max: usize) -> Result<SeriesCoefficients, StokesError> {
    let gd = p.gamma_diff();
    if gd.norm() == 0.0 {
        return Err(StokesError::DegenerateDirection);
    }
    let sums = partial_sums(p, k_max.saturating_sub(1));
    let mut values = vec![Complex64::new(0.0, 0.0); k_max + 1];
    let mut factor = Complex64::new(1.0, 0.0);
    for k in 1..=k_max {
        factor *= (k as f64) / gd;
        values[k] = factor * sums[k - 1];
    }
    Ok(SeriesCoefficients { kind: SeriesKind::PhiHat, values, params: *p })
}

/// The three-term recursion
///
/// ```text
/// a_0 = 1/(beta2-beta1),  a_1 = 0,
/// (k-1) a_{k-1} + (beta2-beta1) a_k + (gamma2-gamma1) a_{k-2} = 0,
/// ```
///
/// together with the derived sums
/// `c_k = sum_{s=0}^{k-1} (gamma2-gamma1)^s / s! * a_{k+1-s}`.
/// Returns `(a, c)`; `c.values[k] = c_k` for `k >= 1`.
pub fn a_k_recursion(p: &Params, k_max: usize) -> (SeriesCoefficients, SeriesCoefficients) {
    let bd = p.beta_diff();
    let gd = p.gamma_diff();
    let mut a = vec![Complex64::new(0.0, 0.0); (k_max + 2).max(2)];
    a[0] = 1.0 / bd;
    // a[1] stays 0
    for k in 2..a.len() {
        a[k] = -(((k - 1) as f64) * a[k - 1] + gd * a[k - 2]) / bd;
    }
    let mut c = vec![Complex64::new(0.0, 0.0); k_max + 1];
    for k in 1..=k_max {
        // gd^s / s!, built incrementally
        let mut weight = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for s in 0..k {
            if s > 0 {
                weight *= gd / (s as f64);
            }
            acc += weight * a[k + 1 - s];
        }
        c[k] = acc;
    }
    a.truncate(k_max + 1);
    (
        SeriesCoefficients { kind: SeriesKind::RecursionA, values: a, params: *p },
        SeriesCoefficients { kind: SeriesKind::RecursionC, values: c, params: *p },
    )
}

/// The Stokes matrix at the origin: direction `theta = arg(beta1-beta2)`,
/// multiplier `mu = -2 pi i (gamma2-gamma1) S`.  The identity when
/// `gamma1 = gamma2`.
pub fn stokes_origin(p: &Params, tol: f64) -> Result<StokesMatrix, SpecFunError> {
    let s = bessel_sum_S(p, tol)?;
    let mu = -Complex64::new(0.0, 2.0 * PI) * p.gamma_diff() * s;
    Ok(StokesMatrix { theta: principal_arg(-p.beta_diff()), mu })
}

/// The Stokes matrix at infinity: direction `theta = arg(gamma2-gamma1)`,
/// multiplier `mu = +2 pi i (gamma2-gamma1) S`.  Errors when
/// `gamma1 = gamma2`: the direction is undefined there (while the origin
/// matrix still reports the identity).
pub fn stokes_infinity(p: &Params, tol: f64) -> Result<StokesMatrix, StokesError> {
    let gd = p.gamma_diff();
    if gd.norm() == 0.0 {
        return Err(StokesError::DegenerateDirection);
    }
    let s = bessel_sum_S(p, tol)?;
    let mu = Complex64::new(0.0, 2.0 * PI) * gd * s;
    Ok(StokesMatrix { theta: principal_arg(gd), mu })
}

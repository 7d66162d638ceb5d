//! Borel-Laplace 1-summation along rays.
//!
//! The divergent series produced in [`crate::stokes`] are Gevrey of order 1;
//! their Borel transforms are the entire kernels
//!
//! ```text
//! u(zeta) = phi1((gamma2-gamma1) zeta),    v(p) = phi1(-(beta2-beta1) p),
//! ```
//!
//! up to rational factors with a single simple pole.  Laplace integration of
//! those kernels along a ray `theta` produces the 1-sums
//!
//! ```text
//! psi_theta(x) = -((beta2-beta1)/x) int_0^{inf e^{i theta}}
//!                    u(zeta) e^{-zeta/x} / (zeta + beta2 - beta1) d zeta
//!                + (e^{(gamma2-gamma1) x} - 1) / ((gamma2-gamma1) x),
//!
//! phi_theta(x) = -x int_0^{inf e^{i theta}}
//!                    v(p) e^{-x p} / (1 - p/(gamma2-gamma1)) d p
//!                - x (e^{-(beta2-beta1)/x} - 1) / (beta2 - beta1),
//! ```
//!
//! valid for `theta` away from `arg(beta1-beta2)` (origin side) and
//! `arg(gamma2-gamma1)` (infinity side).  Crossing the excluded direction
//! picks up the residue of the pole, and that jump is exactly the Stokes
//! multiplier; [`stokes_jump_origin`] measures it two independent ways.
//!
//! The off-diagonal entry of the summed fundamental matrix at the origin is
//! assembled from `psi_theta` through the same combination that defines the
//! formal entry,
//!
//! ```text
//! H12_theta(x) = x^2 e^{(gamma2-gamma1) x} / (beta2-beta1)
//!                - (gamma2-gamma1) x^3 psi_theta(x) / (beta2-beta1),
//! ```
//!
//! which collapses algebraically to
//! `x^2/(beta2-beta1) + (gamma2-gamma1) x^2 * I_theta(x)` with `I_theta` the
//! raw ray integral of `u(zeta)/(zeta+beta2-beta1)`.  Only with the
//! `(gamma2-gamma1)` factor on the integral does the entry solve the
//! equation and does its jump reproduce the Stokes multiplier; the relation
//! is exercised by a test rather than assumed.  On the infinity side the
//! entry is `(e^{-(beta2-beta1)/x}-1)/(beta2-beta1) + omega_theta(x)` with
//! `omega_theta = -phi_theta(x)/x - (closed part)`, and no such subtlety
//! arises.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::Params;
use crate::quad::{self, QuadError};
use crate::specfun::{bessel_kernel_phi1, ln_gamma_real, principal_arg, SpecFunError};
use crate::stokes::{bessel_sum_S, psi_coefficients};

/// Series tolerance for the entire kernels; far below every quadrature
/// tolerance layered on top.
const KERNEL_TOL: f64 = 1e-15;

/// |S| at or below this takes the convergent-series branch of the 1-sums.
const S_CONVERGENT_TOL: f64 = 1e-12;

/// Angular tolerance for rejecting a ray as the singular direction itself.
const SINGULAR_ANGLE_TOL: f64 = 1e-9;

/// Term cap for the direct convergent-series branches.
const SERIES_CAP: usize = 600;

#[derive(Debug, Error)]
pub enum BorelError {
    #[error("direction {theta:.8} rad coincides with the singular direction {singular:.8} rad")]
    SingularDirection { theta: f64, singular: f64 },
    #[error(
        "x = {x} outside the convergence domain: decay margin {margin:.3e} for growth rate {growth:.3e}"
    )]
    OutsideDomain { x: Complex64, growth: f64, margin: f64 },
    #[error("gamma1 = gamma2: the series at infinity and its direction degenerate")]
    DegenerateGammas,
    #[error("convergent-series summation still moving after {terms} terms")]
    SeriesStalled { terms: usize },
    #[error("quadrature stalled at error {achieved:.3e} (requested {requested:.3e})")]
    QuadratureStalled { achieved: f64, requested: f64 },
    #[error("integrand returned a non-finite value at ray parameter {at:.6e}")]
    NonFiniteIntegrand { at: f64 },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

impl From<QuadError> for BorelError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::Stalled { achieved, requested } => {
                BorelError::QuadratureStalled { achieved, requested }
            }
            QuadError::NonFinite { at } => BorelError::NonFiniteIntegrand { at },
        }
    }
}

/// Which Laplace transform normalization applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplaceForm {
    /// `(1/x) int_0^{inf e^{i theta}} f(zeta) e^{-zeta/x} d zeta`
    /// (equivalently `int f e^{-zeta/x} d(zeta/x)`); maps `f == 1` to 1.
    /// Convergence disc: `Re(e^{i theta}/x) > growth rate`.
    Origin,
    /// `int_0^{inf e^{i theta}} f(p) e^{-x p} d p`; maps `f == 1` to `1/x`.
    /// Convergence half-plane: `Re(x e^{i theta}) > growth rate`.
    Infinity,
}

/// An integration ray from 0 towards `inf * e^{i theta}`, cut off at the
/// finite parameter `truncation` past which the dropped tail is below the
/// tolerance the ray was built for.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub theta: f64,
    pub truncation: f64,
}

impl Ray {
    /// A ray with an explicitly chosen cutoff.
    pub fn new(theta: f64, truncation: f64) -> Self {
        Ray { theta, truncation }
    }

    /// The ray for an integrand bounded by `A e^{growth_rate * t}` at the
    /// evaluation point `x`: checks the convergence condition for `form`
    /// and picks the cutoff so the dropped tail is far below `tol`.
    pub fn for_integrand(
        theta: f64,
        growth_rate: f64,
        form: LaplaceForm,
        x: Complex64,
        tol: f64,
    ) -> Result<Self, BorelError> {
        let margin = decay_margin(theta, growth_rate, form, x);
        if !(margin > 0.0) {
            return Err(BorelError::OutsideDomain { x, growth: growth_rate, margin });
        }
        // e^{-margin * T} <= tol/10 * e^{-8}: three orders of slack against
        // the polynomial prefactors the bound ignores.
        let truncation = ((10.0 / tol).ln() + 8.0) / margin;
        Ok(Ray { theta, truncation })
    }
}

/// Exponential decay rate of `|e^{-zeta/x}|` (origin) or `|e^{-x p}|`
/// (infinity) along the ray, minus the integrand growth rate.
fn decay_margin(theta: f64, growth_rate: f64, form: LaplaceForm, x: Complex64) -> f64 {
    if x == Complex64::new(0.0, 0.0) || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    let e = Complex64::from_polar(1.0, theta);
    let rate = match form {
        LaplaceForm::Origin => (e / x).re,
        LaplaceForm::Infinity => (x * e).re,
    };
    rate - growth_rate
}

/// One 1-sum evaluation.
#[derive(Debug, Clone, Copy)]
pub struct OneSum {
    pub at: Complex64,
    pub value: Complex64,
    pub theta: f64,
    pub quadrature_error_estimate: f64,
}

/// The entire Borel kernel on the origin side:
/// `u(zeta) = phi1((gamma2-gamma1) zeta) = sum (gamma2-gamma1)^k zeta^k / (k!(k+1)!)`.
///
/// Satisfies `zeta u'' + 2 u' - (gamma2-gamma1) u = 0` and
/// `u(beta1-beta2) = -S`.
pub fn kernel_u(p: &Params, zeta: Complex64) -> Result<Complex64, SpecFunError> {
    Ok(bessel_kernel_phi1(p.gamma_diff() * zeta, KERNEL_TOL)?.value)
}

/// The entire Borel kernel on the infinity side:
/// `v(p) = phi1(-(beta2-beta1) p) = sum (-1)^k (beta2-beta1)^k p^k / (k!(k+1)!)`.
///
/// Satisfies `p v'' + 2 v' + (beta2-beta1) v = 0` and `v(gamma2-gamma1) = -S`.
pub fn kernel_v(p: &Params, pp: Complex64) -> Result<Complex64, SpecFunError> {
    Ok(bessel_kernel_phi1(-p.beta_diff() * pp, KERNEL_TOL)?.value)
}

/// Laplace transform of `f` along `ray` in the chosen normalization,
/// evaluated at `x` by adaptive quadrature to absolute tolerance `tol`.
///
/// Returns the value and the quadrature error estimate.  The convergence
/// condition is re-checked with growth rate 0 (the ray's own construction
/// carries the integrand growth); a non-positive kernel decay rate is a
/// domain error even for bounded `f`.
pub fn laplace_ray<F>(
    f: F,
    ray: &Ray,
    form: LaplaceForm,
    x: Complex64,
    tol: f64,
) -> Result<(Complex64, f64), BorelError>
where
    F: Fn(Complex64) -> Complex64,
{
    laplace_ray_with_breaks(f, ray, form, x, tol, &[])
}

/// As [`laplace_ray`], with interior breakpoints (ray parameter values in
/// `(0, truncation)`) that seed the panel subdivision; used to straddle a
/// near-pole of the integrand.
fn laplace_ray_with_breaks<F>(
    f: F,
    ray: &Ray,
    form: LaplaceForm,
    x: Complex64,
    tol: f64,
    interior: &[f64],
) -> Result<(Complex64, f64), BorelError>
where
    F: Fn(Complex64) -> Complex64,
{
    let margin = decay_margin(ray.theta, 0.0, form, x);
    if !(margin > 0.0) {
        return Err(BorelError::OutsideDomain { x, growth: 0.0, margin });
    }
    let e = Complex64::from_polar(1.0, ray.theta);
    let kernel = move |t: f64| -> Complex64 {
        let zeta = t * e;
        let damp = match form {
            LaplaceForm::Origin => (-zeta / x).exp(),
            LaplaceForm::Infinity => (-x * zeta).exp(),
        };
        f(zeta) * damp
    };
    let mut ts = Vec::with_capacity(interior.len() + 2);
    ts.push(0.0);
    for &t in interior {
        if t > 0.0 && t < ray.truncation {
            ts.push(t);
        }
    }
    ts.push(ray.truncation);
    ts.sort_by(f64::total_cmp);
    // Scale the requested tolerance into the t-integral before the outer
    // prefactor is applied.
    let prefactor = match form {
        LaplaceForm::Origin => e / x,
        LaplaceForm::Infinity => e,
    };
    let inner_tol = (tol / prefactor.norm()).max(f64::MIN_POSITIVE);
    let (value, err) = quad::adaptive_polyline(&kernel, &ts, inner_tol)?;
    Ok((prefactor * value, prefactor.norm() * err))
}

/// `(e^z - 1)/z`, stable near `z = 0`; equals 1 there.
pub(crate) fn expm1_over(z: Complex64) -> Complex64 {
    if z.norm() < 0.25 {
        // 1 + z/2! + z^2/3! + ...
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = term;
        for n in 2..=24 {
            term *= z / (n as f64);
            acc += term;
            if term.norm() < 1e-18 * acc.norm() {
                break;
            }
        }
        acc
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Angular difference wrapped into `(-pi, pi]`.
fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

fn reject_singular(theta: f64, singular: f64) -> Result<(), BorelError> {
    if wrap_angle(theta - singular).abs() < SINGULAR_ANGLE_TOL {
        return Err(BorelError::SingularDirection { theta, singular });
    }
    Ok(())
}

/// Ray-parameter breakpoints straddling the projection of `pole` onto the
/// ray, padded by five widths of `max(closest approach, min_delta)`.
fn pole_breakpoints(theta: f64, truncation: f64, pole: Complex64, min_delta: f64) -> Vec<f64> {
    let e = Complex64::from_polar(1.0, theta);
    let in_ray_frame = pole * e.conj();
    let t_p = in_ray_frame.re;
    if t_p <= 0.0 || t_p >= truncation {
        return Vec::new();
    }
    let delta = in_ray_frame.im.abs().max(min_delta);
    let mut breaks = Vec::new();
    for t in [t_p - 5.0 * delta, t_p, t_p + 5.0 * delta] {
        if t > 0.0 && t < truncation {
            breaks.push(t);
        }
    }
    breaks
}

/// The ray route for `psi_theta`, quadrature regardless of |S|.
/// Requires `gamma1 != gamma2` in the kernel only through its growth rate;
/// `u == 1` (the equal-gammas Euler case) is the `growth_rate = 0` instance.
fn psi_via_ray(p: &Params, theta: f64, x: Complex64, tol: f64) -> Result<OneSum, BorelError> {
    let bd = p.beta_diff();
    let gd = p.gamma_diff();
    reject_singular(theta, principal_arg(-bd))?;
    let growth = gd.norm();
    let ray = Ray::for_integrand(theta, growth, LaplaceForm::Origin, x, tol)?;
    let breaks = pole_breakpoints(theta, ray.truncation, -bd, 1e-3 * bd.norm());
    let gd_for_kernel = gd;
    let integrand = move |zeta: Complex64| -> Complex64 {
        let u = match bessel_kernel_phi1(gd_for_kernel * zeta, KERNEL_TOL) {
            Ok(v) => v.value,
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        };
        u / (zeta + bd)
    };
    let (integral, err) =
        laplace_ray_with_breaks(integrand, &ray, LaplaceForm::Origin, x, tol, &breaks)?;
    let second = if gd.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        expm1_over(gd * x)
    };
    Ok(OneSum {
        at: x,
        value: -bd * integral + second,
        theta,
        quadrature_error_estimate: bd.norm() * err + tol / 10.0,
    })
}

/// Direct summation of `sum_k coeff_k(S_{k-1}) z^k` for the convergent
/// branches.  `step(k)` returns the factor multiplying the running product
/// at order `k`; the running product times `S_{k-1}` is the k-th term.
fn sum_with_partial_sums<F>(
    w: Complex64,
    step: F,
    tol: f64,
) -> Result<(Complex64, usize), BorelError>
where
    F: Fn(usize) -> Complex64,
{
    let mut s_term = Complex64::new(-1.0, 0.0);
    let mut s_acc = s_term; // S_0
    let mut factor = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut quiet = 0usize;
    for k in 1..=SERIES_CAP {
        factor *= step(k);
        let term = factor * s_acc;
        sum += term;
        // advance S_{k-1} -> S_k
        s_term *= -w / ((k * (k + 1)) as f64);
        s_acc += s_term;
        if term.norm() <= tol * sum.norm().max(1.0) {
            quiet += 1;
            if quiet >= 2 && k >= 4 {
                return Ok((sum, k));
            }
        } else {
            quiet = 0;
        }
    }
    Err(BorelError::SeriesStalled { terms: SERIES_CAP })
}

/// The 1-sum `psi_theta(x)` of the origin-side series.
///
/// Three branches:
/// * `gamma1 = gamma2`: the coefficients reduce to the Euler factorial
///   series (all partial sums `S_k = -1`); its 1-sum is the ray integral
///   with kernel `u == 1` and second term 1.  The series is divergent, so
///   there is nothing to sum "directly".
/// * `|S| <= 1e-12`: the series converges in all of C (the partial sums
///   decay factorially); classical summation, independent of `theta`.
/// * otherwise: the ray quadrature of the kernel integral plus the
///   convergent closed term.
pub fn psi_sum(p: &Params, theta: f64, x: Complex64, tol: f64) -> Result<OneSum, BorelError> {
    let bd = p.beta_diff();
    let gd = p.gamma_diff();
    if gd.norm() == 0.0 {
        return psi_via_ray(p, theta, x, tol);
    }
    let s = bessel_sum_S(p, KERNEL_TOL)?;
    if s.norm() <= S_CONVERGENT_TOL {
        let (value, _) = sum_with_partial_sums(gd * bd, |k| -(k as f64) * x / bd, tol)?;
        return Ok(OneSum { at: x, value, theta, quadrature_error_estimate: tol });
    }
    psi_via_ray(p, theta, x, tol)
}

/// The 1-sum `phi_theta(x)` of the infinity-side series.
///
/// Errors when `gamma1 = gamma2` (the series itself is undefined: its
/// coefficients divide by `gamma2-gamma1`).  For `|S| <= 1e-12` the series
/// converges for every `x != 0` and is summed classically; otherwise the
/// ray quadrature applies.
pub fn phi_sum(p: &Params, theta: f64, x: Complex64, tol: f64) -> Result<OneSum, BorelError> {
    let bd = p.beta_diff();
    let gd = p.gamma_diff();
    if gd.norm() == 0.0 {
        return Err(BorelError::DegenerateGammas);
    }
    let s = bessel_sum_S(p, KERNEL_TOL)?;
    if s.norm() <= S_CONVERGENT_TOL {
        let (value, _) = sum_with_partial_sums(gd * bd, |k| (k as f64) / (gd * x), tol)?;
        return Ok(OneSum { at: x, value, theta, quadrature_error_estimate: tol });
    }
    reject_singular(theta, principal_arg(gd))?;
    let growth = bd.norm();
    let ray = Ray::for_integrand(theta, growth, LaplaceForm::Infinity, x, tol)?;
    let breaks = pole_breakpoints(theta, ray.truncation, gd, 1e-3 * gd.norm());
    let bd_for_kernel = bd;
    let integrand = move |pp: Complex64| -> Complex64 {
        let v = match bessel_kernel_phi1(-bd_for_kernel * pp, KERNEL_TOL) {
            Ok(v) => v.value,
            Err(_) => Complex64::new(f64::NAN, f64::NAN),
        };
        v / (1.0 - pp / gd)
    };
    let (integral, err) =
        laplace_ray_with_breaks(integrand, &ray, LaplaceForm::Infinity, x, tol, &breaks)?;
    Ok(OneSum {
        at: x,
        value: -x * integral + expm1_over(-bd / x),
        theta,
        quadrature_error_estimate: x.norm() * err + tol / 10.0,
    })
}

/// Which summed fundamental-matrix entry to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntrySide {
    /// The 1,2-entry of the unipotent factor at the origin.
    OriginH,
    /// The 1,2-entry of the unipotent factor at infinity.
    InfinityP,
}

/// The scalar 1,2-entry of the summed unipotent factor `H_theta` (origin)
/// or `P_theta` (infinity).
///
/// * Origin, `gamma1 = gamma2`: closed form `x^2/(beta2-beta1)`.
/// * Origin, otherwise:
///   `x^2 e^{(gamma2-gamma1)x}/(beta2-beta1) - (gamma2-gamma1) x^3 psi_theta(x)/(beta2-beta1)`.
/// * Infinity, `gamma1 = gamma2`: closed form `(e^{-(beta2-beta1)/x}-1)/(beta2-beta1)`.
/// * Infinity, otherwise: `-phi_theta(x)/x`.
pub fn actual_fundamental_entry(
    p: &Params,
    side: EntrySide,
    theta: f64,
    x: Complex64,
    tol: f64,
) -> Result<OneSum, BorelError> {
    let bd = p.beta_diff();
    let gd = p.gamma_diff();
    match side {
        EntrySide::OriginH => {
            if gd.norm() == 0.0 {
                return Ok(OneSum {
                    at: x,
                    value: x * x / bd,
                    theta,
                    quadrature_error_estimate: 0.0,
                });
            }
            let psi = psi_sum(p, theta, x, tol)?;
            let value = x * x * (gd * x).exp() / bd - gd * x * x * x * psi.value / bd;
            Ok(OneSum {
                at: x,
                value,
                theta,
                quadrature_error_estimate: (gd * x * x * x / bd).norm()
                    * psi.quadrature_error_estimate,
            })
        }
        EntrySide::InfinityP => {
            if gd.norm() == 0.0 {
                // (e^{-bd/x} - 1)/bd, written through expm1 for small |bd/x|
                let value = -expm1_over(-bd / x) / x;
                return Ok(OneSum { at: x, value, theta, quadrature_error_estimate: 0.0 });
            }
            let phi = phi_sum(p, theta, x, tol)?;
            Ok(OneSum {
                at: x,
                value: -phi.value / x,
                theta,
                quadrature_error_estimate: phi.quadrature_error_estimate / x.norm(),
            })
        }
    }
}

/// First solution of the left factor of the unperturbed equation,
/// `e^{gamma1 x - beta1/x}`; the carrier of the Stokes jump.
fn phi1_closed(p: &Params, x: Complex64) -> Complex64 {
    (p.gamma1 * x - p.beta1 / x).exp()
}

/// Both routes to the Stokes jump at the origin.
#[derive(Debug, Clone, Copy)]
pub struct JumpReport {
    /// The singular direction `arg(beta1-beta2)`.
    pub theta: f64,
    /// Angular offset of the two comparison rays.
    pub eps_angle: f64,
    /// Route (a): difference of the full 1,2-entries of the summed
    /// fundamental matrix along `theta - eps` and `theta + eps`.
    pub quadrature: Complex64,
    /// Route (b): the residue closed form
    /// `2 pi i (gamma2-gamma1) u(beta1-beta2) Phi1(x)`.
    pub closed_form: Complex64,
    /// `|a-b|/|b|`, or `|a-b|` when the closed form vanishes.
    pub rel_err: f64,
}

/// Measures the jump of the actual fundamental matrix across the singular
/// direction at the origin two independent ways: (a) two ray quadratures
/// straddling the direction, subtracted; (b) the residue of the kernel
/// integrand at its pole.  The quadrature route always integrates (even for
/// tiny `|S|`, where the jump itself is tiny), so the comparison stays
/// honest; only `gamma1 = gamma2` short-circuits to exact zeros (the entry
/// is single-valued there).
pub fn stokes_jump_origin(
    p: &Params,
    x: Complex64,
    eps_angle: f64,
    tol: f64,
) -> Result<JumpReport, BorelError> {
    let bd = p.beta_diff();
    let gd = p.gamma_diff();
    let theta = principal_arg(-bd);
    if gd.norm() == 0.0 {
        return Ok(JumpReport {
            theta,
            eps_angle,
            quadrature: Complex64::new(0.0, 0.0),
            closed_form: Complex64::new(0.0, 0.0),
            rel_err: 0.0,
        });
    }
    let frame = |h12: Complex64| (p.gamma1 * x).exp() * h12 / (x * x) * (-p.beta2 / x).exp();
    let entry = |th: f64| -> Result<Complex64, BorelError> {
        let psi = psi_via_ray(p, th, x, tol)?;
        Ok(frame(x * x * (gd * x).exp() / bd - gd * x * x * x * psi.value / bd))
    };
    let minus = entry(theta - eps_angle)?;
    let plus = entry(theta + eps_angle)?;
    let quadrature = minus - plus;
    let u_at_pole = kernel_u(p, -bd)?;
    let closed_form =
        Complex64::new(0.0, 2.0 * std::f64::consts::PI) * gd * u_at_pole * phi1_closed(p, x);
    let diff = (quadrature - closed_form).norm();
    let rel_err = if closed_form.norm() > 0.0 { diff / closed_form.norm() } else { diff };
    Ok(JumpReport { theta, eps_angle, quadrature, closed_form, rel_err })
}

/// Least-squares Gevrey-1 fit `R_N ~= C A^N N! |x|^N` over sampled
/// truncation residuals `(N, R_N)`.
#[derive(Debug, Clone, Copy)]
pub struct GevreyFit {
    pub c: f64,
    pub a: f64,
}

pub fn gevrey_fit(residuals: &[(u32, f64)], x_abs: f64) -> GevreyFit {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|&(n, r)| {
            let nf = n as f64;
            (nf, r.ln() - ln_gamma_real(nf + 1.0) - nf * x_abs.ln())
        })
        .collect();
    assert!(pts.len() >= 2, "need at least two positive residuals to fit");
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    GevreyFit { c: intercept.exp(), a: slope.exp() }
}

/// Truncation residuals `R_N = |psi_theta(x) - sum_{k<N} b_k x^k|` for
/// `N = 1..=n_max`, the raw material of the Gevrey-1 asymptotic bound.
pub fn psi_tail_residuals(
    p: &Params,
    theta: f64,
    x: Complex64,
    n_max: usize,
    tol: f64,
) -> Result<Vec<(u32, f64)>, BorelError> {
    let one = psi_sum(p, theta, x, tol)?;
    let coeffs = psi_coefficients(p, n_max);
    let mut out = Vec::with_capacity(n_max);
    let mut partial = Complex64::new(0.0, 0.0);
    let mut xk = Complex64::new(1.0, 0.0);
    // R_N compares against sum_{k=0}^{N-1}; b_0 = 0.
    for n in 1..=n_max {
        out.push((n as u32, (one.value - partial).norm()));
        xk *= x;
        partial += coeffs.values[n] * xk;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Params;
    use crate::stokes::{phi_coefficients, stokes_origin};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params(b1: f64, b2: f64, g1: f64, g2: f64) -> Params {
        Params::new(c(b1, 0.0), c(b2, 0.0), c(g1, 0.0), c(g2, 0.0)).unwrap()
    }

    /// First positive root of J1, frozen from the bisection oracle on the
    /// phi1 series.
    const J1_ROOT: f64 = 3.831705970207512;

    #[test]
    fn laplace_of_one_is_one_origin_form() {
        let x = c(0.3, 0.1);
        for theta in [0.0, 0.4, -0.3] {
            let ray = Ray::for_integrand(theta, 0.0, LaplaceForm::Origin, x, 1e-12).unwrap();
            let (v, e) = laplace_ray(|_| c(1.0, 0.0), &ray, LaplaceForm::Origin, x, 1e-12).unwrap();
            assert!((v - c(1.0, 0.0)).norm() < 1e-10, "theta={theta}: {v}");
            assert!(e < 1e-10);
        }
    }

    #[test]
    fn laplace_of_zeta_is_x_origin_form() {
        let x = c(0.25, -0.05);
        let ray = Ray::for_integrand(0.0, 0.0, LaplaceForm::Origin, x, 1e-12).unwrap();
        let (v, _) = laplace_ray(|z| z, &ray, LaplaceForm::Origin, x, 1e-12).unwrap();
        assert!((v - x).norm() < 1e-10);
    }

    #[test]
    fn laplace_of_one_is_inverse_x_infinity_form() {
        let x = c(3.0, 0.5);
        let ray = Ray::for_integrand(0.0, 0.0, LaplaceForm::Infinity, x, 1e-12).unwrap();
        let (v, _) = laplace_ray(|_| c(1.0, 0.0), &ray, LaplaceForm::Infinity, x, 1e-12).unwrap();
        assert!((v - 1.0 / x).norm() < 1e-10);
    }

    #[test]
    fn ray_rejects_points_outside_domain() {
        // Origin form needs Re(e^{i theta}/x) > growth.
        let x = c(-0.3, 0.0);
        match Ray::for_integrand(0.0, 0.0, LaplaceForm::Origin, x, 1e-10) {
            Err(BorelError::OutsideDomain { .. }) => {}
            other => panic!("expected OutsideDomain, got {other:?}"),
        }
        // Growth rate can consume the whole margin.
        let x = c(0.5, 0.0);
        assert!(Ray::for_integrand(0.0, 1.9, LaplaceForm::Origin, x, 1e-10).is_ok());
        match Ray::for_integrand(0.0, 2.1, LaplaceForm::Origin, x, 1e-10) {
            Err(BorelError::OutsideDomain { .. }) => {}
            other => panic!("expected OutsideDomain, got {other:?}"),
        }
    }

    #[test]
    fn kernels_at_zero_and_at_the_pole_arguments() {
        let p = params(0.0, 2.0, 0.0, 1.0);
        assert_eq!(kernel_u(&p, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(kernel_v(&p, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        let s = bessel_sum_S(&p, 1e-15).unwrap();
        let u_pole = kernel_u(&p, -p.beta_diff()).unwrap();
        let v_pole = kernel_v(&p, p.gamma_diff()).unwrap();
        assert!((u_pole + s).norm() < 1e-14, "u(beta1-beta2) = -S");
        assert!((v_pole + s).norm() < 1e-14, "v(gamma2-gamma1) = -S");
        assert!((u_pole - v_pole).norm() < 1e-15, "both kernels hit phi1(-(gd)(bd))");
    }

    #[test]
    fn kernel_v_satisfies_its_differential_equation() {
        // p v'' + 2 v' + (beta2-beta1) v = 0, derivatives by central
        // differences on the series evaluation.
        let p = params(0.1, 1.4, 0.0, 0.7);
        let bd = p.beta_diff();
        let h = 1e-5;
        for t in [0.3, 1.0, 2.5] {
            let at = |s: f64| kernel_v(&p, c(s, 0.0)).unwrap();
            let v0 = at(t);
            let vp = (at(t + h) - at(t - h)) / (2.0 * h);
            let vpp = (at(t + h) - 2.0 * v0 + at(t - h)) / (h * h);
            let residual = t * vpp + 2.0 * vp + bd * v0;
            assert!(residual.norm() < 1e-5, "t={t}: residual {}", residual.norm());
        }
    }

    #[test]
    fn kernel_u_growth_bound_sampled_on_ray() {
        let p = params(0.0, 1.0, 0.0, 1.5);
        let rate = p.gamma_diff().norm();
        let theta = 0.7;
        let e = Complex64::from_polar(1.0, theta);
        // Constant fitted on the small-t samples, then checked out to t=25.
        let fit_a = (1..=5)
            .map(|k| {
                let t = k as f64;
                kernel_u(&p, t * e).unwrap().norm() * (-rate * t).exp()
            })
            .fold(0.0_f64, f64::max);
        assert!(fit_a.is_finite() && fit_a > 0.0);
        for t in [8.0, 15.0, 25.0] {
            let u = kernel_u(&p, t * e).unwrap().norm();
            assert!(
                u <= 1.01 * fit_a * (rate * t).exp(),
                "t={t}: |u|={u:.3e} exceeds A e^{{rate t}} with A={fit_a:.3e}"
            );
        }
    }

    #[test]
    fn laplace_shift_identity_on_phi1_kernel() {
        // L(e^{-c p} f)(x) = (L f)(x + c), infinity form.
        let w = c(0.4, 0.2);
        let f = move |p: Complex64| bessel_kernel_phi1(w * p, 1e-15).unwrap().value;
        let x = c(2.0, 0.3);
        let shift = c(0.7, -0.1);
        let ray = Ray::for_integrand(0.0, 1.0, LaplaceForm::Infinity, x, 1e-12).unwrap();
        let (lhs, _) = laplace_ray(
            move |p| (-shift * p).exp() * f(p),
            &ray,
            LaplaceForm::Infinity,
            x,
            1e-12,
        )
        .unwrap();
        let ray2 = Ray::for_integrand(0.0, 1.0, LaplaceForm::Infinity, x + shift, 1e-12).unwrap();
        let (rhs, _) = laplace_ray(f, &ray2, LaplaceForm::Infinity, x + shift, 1e-12).unwrap();
        assert!((lhs - rhs).norm() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn expm1_over_is_one_in_the_limit() {
        assert_eq!(expm1_over(c(0.0, 0.0)), c(1.0, 0.0));
        let tiny = expm1_over(c(1e-9, -2e-9));
        assert!((tiny - c(1.0, 0.0)).norm() < 1e-8);
        // Matches the naive form where that form is stable.
        let z = c(0.8, 0.3);
        assert!((expm1_over(z) - (z.exp() - 1.0) / z).norm() < 1e-15);
    }

    #[test]
    fn psi_sum_agrees_on_two_rays_same_side() {
        let p = params(0.0, 2.0, 0.0, 1.0);
        // Singular direction is arg(-2) = pi; rays at 0 and 0.35 are on the
        // same side.
        let x = c(0.25, 0.05);
        let a = psi_sum(&p, 0.0, x, 1e-11).unwrap();
        let b = psi_sum(&p, 0.35, x, 1e-11).unwrap();
        assert!((a.value - b.value).norm() < 1e-9, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn psi_sum_rejects_the_singular_direction_and_the_outside() {
        let p = params(0.0, 2.0, 0.0, 1.0);
        match psi_sum(&p, PI, c(0.2, 0.0), 1e-10) {
            Err(BorelError::SingularDirection { .. }) => {}
            other => panic!("expected SingularDirection, got {other:?}"),
        }
        match psi_sum(&p, 0.0, c(-0.2, 0.0), 1e-10) {
            Err(BorelError::OutsideDomain { .. }) => {}
            other => panic!("expected OutsideDomain, got {other:?}"),
        }
    }

    #[test]
    fn psi_sum_tracks_the_series_within_gevrey_envelope() {
        // gd*bd = 1.2 keeps every S_k away from zero (w = 2 would kill S_1
        // and put a spurious kink in the residual curve)
        let p = params(0.0, 2.0, 0.0, 0.6);
        let x = c(0.12, 0.0);
        let residuals = psi_tail_residuals(&p, 0.0, x, 8, 1e-12).unwrap();
        let fit = gevrey_fit(&residuals, x.norm());
        let target = 1.0 / p.beta_diff().norm();
        assert!(
            fit.a > target / 3.0 && fit.a < target * 3.0,
            "fitted A = {} vs 1/|bd| = {}",
            fit.a,
            target
        );
        // optimal truncation sits near 1/(A|x|) ~ 16, so the residuals are
        // still falling across N = 1..8
        for pair in residuals.windows(2) {
            assert!(pair[1].1 < pair[0].1, "residuals not decreasing: {residuals:?}");
        }
    }

    #[test]
    fn psi_sum_convergent_branch_at_bessel_zero() {
        // gd*bd at the first J1 root makes S = 0: the series converges and
        // the classical sum must match the ray quadrature.
        let gd = (J1_ROOT / 2.0) * (J1_ROOT / 2.0);
        let p = params(0.0, 1.0, 0.0, gd);
        assert!(bessel_sum_S(&p, 1e-15).unwrap().norm() < 1e-12);
        let x = c(0.2, 0.0);
        let series = psi_sum(&p, 0.3, x, 1e-12).unwrap();
        let ray = psi_via_ray(&p, 0.3, x, 1e-12).unwrap();
        assert!(
            (series.value - ray.value).norm() < 1e-9,
            "classical {} vs ray {}",
            series.value,
            ray.value
        );
    }

    #[test]
    fn psi_sum_equal_gammas_is_the_euler_sum() {
        // u == 1: psi_theta = 1 - (bd/x) * int e^{-zeta/x}/(zeta+bd) dzeta.
        let p = params(0.0, 2.0, 0.5, 0.5);
        let x = c(0.3, 0.0);
        let one = psi_sum(&p, 0.2, x, 1e-12).unwrap();
        let ray = Ray::for_integrand(0.2, 0.0, LaplaceForm::Origin, x, 1e-12).unwrap();
        let bd = p.beta_diff();
        let (euler, _) =
            laplace_ray(move |z| 1.0 / (1.0 + z / bd), &ray, LaplaceForm::Origin, x, 1e-12)
                .unwrap();
        assert!((one.value - (1.0 - euler)).norm() < 1e-10);
    }

    #[test]
    fn phi_sum_agrees_on_two_rays_and_rejects_degenerate() {
        let p = params(0.0, 1.0, 0.0, 2.0);
        // Singular direction arg(gd) = 0; stay off it while keeping
        // Re(x e^{i theta}) above the growth rate |bd| = 1 on both rays.
        let x = c(4.0, 0.3);
        let a = phi_sum(&p, 0.5, x, 1e-11).unwrap();
        let b = phi_sum(&p, 0.8, x, 1e-11).unwrap();
        assert!((a.value - b.value).norm() < 1e-8, "{} vs {}", a.value, b.value);
        let pg = params(0.0, 1.0, 0.7, 0.7);
        match phi_sum(&pg, 0.9, x, 1e-10) {
            Err(BorelError::DegenerateGammas) => {}
            other => panic!("expected DegenerateGammas, got {other:?}"),
        }
    }

    #[test]
    fn phi_sum_leading_coefficient_matches_series() {
        // gd = 3 so that S_1 = 1/2 != 0 and the second coefficient gives a
        // usable error scale (gd = 2 would make it vanish)
        let p = params(0.0, 1.0, 0.0, 3.0);
        let coeffs = phi_coefficients(&p, 3).unwrap();
        // c1 = -1/gd; at large |x| the 1-sum is c1/x + O(x^-2).
        let x = c(60.0, 8.0);
        let one = phi_sum(&p, 0.9, x, 1e-12).unwrap();
        let leading = coeffs.values[1] / x;
        let next = coeffs.values[2] / (x * x);
        assert!(
            (one.value - leading).norm() < 3.0 * next.norm(),
            "phi {} vs leading {}",
            one.value,
            leading
        );
    }

    #[test]
    fn entry_closed_forms_when_gammas_coincide() {
        let p = params(0.0, 1.5, 0.4, 0.4);
        let x = c(0.3, 0.1);
        let h = actual_fundamental_entry(&p, EntrySide::OriginH, 0.0, x, 1e-12).unwrap();
        assert!((h.value - x * x / p.beta_diff()).norm() < 1e-15);
        let xx = c(5.0, 1.0);
        let pval = actual_fundamental_entry(&p, EntrySide::InfinityP, 0.9, xx, 1e-12).unwrap();
        let expected = ((-p.beta_diff() / xx).exp() - 1.0) / p.beta_diff();
        assert!((pval.value - expected).norm() < 1e-14);
    }

    #[test]
    fn origin_entry_equals_closed_plus_scaled_ray_integral() {
        // The relation that fixes the bookkeeping: the assembled entry is
        // x^2/bd + gd * x^2 * I_theta with I_theta the raw kernel integral.
        // (Without the gd factor the entry neither solves the equation nor
        // jumps by the Stokes multiplier.)
        let p = params(0.0, 2.0, 0.0, 1.6);
        let gd = p.gamma_diff();
        let bd = p.beta_diff();
        let x = c(0.22, 0.03);
        let theta = 0.25;
        let entry = actual_fundamental_entry(&p, EntrySide::OriginH, theta, x, 1e-12).unwrap();
        let ray = Ray::for_integrand(theta, gd.norm(), LaplaceForm::Origin, x, 1e-12).unwrap();
        let (lap, _) = laplace_ray(
            move |z| bessel_kernel_phi1(gd * z, 1e-15).unwrap().value / (z + bd),
            &ray,
            LaplaceForm::Origin,
            x,
            1e-12,
        )
        .unwrap();
        // laplace_ray carries 1/x d zeta; the raw integral is x * lap.
        let raw_integral = x * lap;
        let rebuilt = x * x / bd + gd * x * x * raw_integral;
        assert!(
            (entry.value - rebuilt).norm() < 1e-9,
            "assembled {} vs closed+integral {}",
            entry.value,
            rebuilt
        );
    }

    #[test]
    fn origin_entry_solves_the_scalar_equation() {
        // The full 1,2-entry e^{g1 x} H12 x^{-2} e^{-b2/x} must satisfy
        // y'' + b1 y' + b0 y = 0; five-point stencils on top of quadrature.
        let p = params(0.3, 1.7, 0.2, 1.1);
        let eq = crate::model::initial_coefficients(&p);
        // |x| small enough that Re(e^{i theta}/x) = 1.93 clears the growth
        // rate |gd| = 0.9; theta = 2.4 stays off the singular direction pi
        let x0 = c(-0.45, 0.18);
        let theta = 2.4;
        let entry_at = |x: Complex64| -> Complex64 {
            let h = actual_fundamental_entry(&p, EntrySide::OriginH, theta, x, 1e-13)
                .unwrap()
                .value;
            (p.gamma1 * x).exp() * h / (x * x) * (-p.beta2 / x).exp()
        };
        let h = 0.002;
        let mut y = [c(0.0, 0.0); 5];
        for (i, k) in (-2..=2).enumerate() {
            y[i] = entry_at(x0 + c(h * k as f64, 0.0));
        }
        let d1 = (-y[4] + 8.0 * y[3] - 8.0 * y[1] + y[0]) / (12.0 * h);
        let d2 = (-y[4] + 16.0 * y[3] - 30.0 * y[2] + 16.0 * y[1] - y[0]) / (12.0 * h * h);
        let (b1, b0) = eq.b(x0).unwrap();
        let residual = d2 + b1 * d1 + b0 * y[2];
        let scale = d2.norm().max((b1 * d1).norm()).max((b0 * y[2]).norm());
        assert!(
            residual.norm() < 1e-7 * scale,
            "relative residual {:.3e}",
            residual.norm() / scale
        );
    }

    #[test]
    fn jump_matches_residue_closed_form() {
        // beta2-beta1 = 1, gamma2-gamma1 = 1, x = -0.05: inside both tilted
        // discs, both routes agree.
        let p = params(0.0, 1.0, 0.0, 1.0);
        let x = c(-0.05, 0.0);
        let report = stokes_jump_origin(&p, x, 0.05, 1e-9).unwrap();
        assert!(report.rel_err < 1e-6, "rel err {:.3e}", report.rel_err);
        // And the closed form itself is mu * Phi1 with mu from the exact
        // Stokes matrix.
        let mu = stokes_origin(&p, 1e-15).unwrap().mu;
        let phi1 = (p.gamma1 * x - p.beta1 / x).exp();
        assert!((report.closed_form - mu * phi1).norm() < 1e-12 * (mu * phi1).norm());
    }

    #[test]
    fn jump_vanishes_when_gammas_coincide() {
        let p = params(0.0, 1.0, 0.6, 0.6);
        let report = stokes_jump_origin(&p, c(-0.05, 0.0), 0.05, 1e-9).unwrap();
        assert_eq!(report.quadrature, c(0.0, 0.0));
        assert_eq!(report.closed_form, c(0.0, 0.0));
    }

    #[test]
    fn jump_is_tiny_at_bessel_zero_parameters() {
        let gd = (J1_ROOT / 2.0) * (J1_ROOT / 2.0);
        let p = params(0.0, 1.0, 0.0, gd);
        let x = c(-0.05, 0.0);
        let report = stokes_jump_origin(&p, x, 0.05, 1e-10).unwrap();
        let phi1 = (p.gamma1 * x - p.beta1 / x).exp();
        assert!(
            report.quadrature.norm() < 1e-8 * phi1.norm(),
            "jump {:.3e} vs 1e-8 |Phi1| = {:.3e}",
            report.quadrature.norm(),
            1e-8 * phi1.norm()
        );
    }

    #[test]
    fn gevrey_fit_recovers_planted_constants() {
        let (c0, a0, x_abs): (f64, f64, f64) = (0.7, 0.45, 0.2);
        let residuals: Vec<(u32, f64)> = (1..=8)
            .map(|n| {
                let nf = n as f64;
                let r = c0 * a0.powi(n) * (ln_gamma_real(nf + 1.0)).exp() * x_abs.powi(n);
                (n as u32, r)
            })
            .collect();
        let fit = gevrey_fit(&residuals, x_abs);
        assert!((fit.a - a0).abs() < 1e-10 * a0);
        assert!((fit.c - c0).abs() < 1e-9 * c0);
    }
}

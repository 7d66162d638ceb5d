//! The two equations as data.
//!
//! The library studies a second-order scalar equation built by composing two
//! first-order operators (d/dx - a2)(d/dx - a1) y = 0.  In the unperturbed
//! form the coefficients are
//!
//! ```text
//! a1(x) = beta1/x^2 + gamma1,          a2(x) = -2/x + beta2/x^2 + gamma2,
//! ```
//!
//! with irregular singular points at 0 and infinity.  The perturbed family
//! replaces each irregular point by a pair of regular (Fuchsian) points
//! `x = +-sqrt(eps)` and `x = +-1/sqrt(eps)` that merge back as `eps -> 0`.
//!
//! This module holds the parameter types, the coefficient evaluators for both
//! equations, the characteristic exponents at the four regular points, the
//! double-resonance classifier, the four-regular-point family checker (which
//! of the five candidate points `{0, +-sqrt(eps), +-1/sqrt(eps), infinity}`
//! of the generic six-parameter equation is ordinary), and the parameter
//! symmetries that exchange the origin and infinity data.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::specfun::near_integer;

/// Default relative tolerance for "is this floating-point ratio an integer".
pub const INT_TOL: f64 = 1e-9;

/// Relative tolerance below which an evaluated coefficient triple counts as
/// vanishing in [`heun_case_check`].
pub const TRIPLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("beta1 and beta2 must differ")]
    EqualBetas,
    #[error("parameters must be finite")]
    NonFiniteParameter,
    #[error("sqrt_eps must be finite and nonzero")]
    InvalidSqrtEps,
    #[error("eps^2 = 1 is excluded (the four-point coefficient formulas divide by 1 - eps^2)")]
    UnitEpsSquared,
    #[error("coefficient evaluation at x = 0")]
    EvalAtZero,
    #[error("coefficient evaluation at the singular point x = {0}")]
    EvalAtSingularPoint(Complex64),
}

/// Parameters of the equation actually studied: `alpha1 = 0`, `alpha2 = -2`
/// are fixed and only the four residue/exponential parameters vary.
///
/// Invariant: `beta1 != beta2` (the irregular pair at the origin stays
/// non-resonant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub beta1: Complex64,
    pub beta2: Complex64,
    pub gamma1: Complex64,
    pub gamma2: Complex64,
}

/// `alpha1` value pinned by [`Params`].
pub const ALPHA1: f64 = 0.0;
/// `alpha2` value pinned by [`Params`].
pub const ALPHA2: f64 = -2.0;

impl Params {
    pub fn new(
        beta1: Complex64,
        beta2: Complex64,
        gamma1: Complex64,
        gamma2: Complex64,
    ) -> Result<Self, ModelError> {
        for z in [beta1, beta2, gamma1, gamma2] {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(ModelError::NonFiniteParameter);
            }
        }
        if beta1 == beta2 {
            return Err(ModelError::EqualBetas);
        }
        Ok(Params { beta1, beta2, gamma1, gamma2 })
    }

    /// `beta2 - beta1`, the irregular separation at the origin.
    pub fn beta_diff(&self) -> Complex64 {
        self.beta2 - self.beta1
    }

    /// `gamma2 - gamma1`, the irregular separation at infinity.
    pub fn gamma_diff(&self) -> Complex64 {
        self.gamma2 - self.gamma1
    }

    /// The same parameters as a free six-tuple with the pinned alphas filled in.
    pub fn general(&self) -> GeneralParams {
        GeneralParams {
            alpha1: Complex64::new(ALPHA1, 0.0),
            alpha2: Complex64::new(ALPHA2, 0.0),
            beta1: self.beta1,
            beta2: self.beta2,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
        }
    }
}

/// All six coefficient parameters left free.  Used by the four-regular-point
/// family checker and by the symmetry maps, both of which move the alphas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralParams {
    pub alpha1: Complex64,
    pub alpha2: Complex64,
    pub beta1: Complex64,
    pub beta2: Complex64,
    pub gamma1: Complex64,
    pub gamma2: Complex64,
}

impl GeneralParams {
    /// First-order coefficient of the left factor at `eps = 0`:
    /// `a1 = alpha1/x + beta1/x^2 + gamma1`.
    pub fn a1(&self, x: Complex64) -> Result<Complex64, ModelError> {
        guard_nonzero(x)?;
        Ok(self.alpha1 / x + self.beta1 / (x * x) + self.gamma1)
    }

    /// First-order coefficient of the right factor at `eps = 0`:
    /// `a2 = alpha2/x + beta2/x^2 + gamma2`.
    pub fn a2(&self, x: Complex64) -> Result<Complex64, ModelError> {
        guard_nonzero(x)?;
        Ok(self.alpha2 / x + self.beta2 / (x * x) + self.gamma2)
    }

    fn a1_prime(&self, x: Complex64) -> Complex64 {
        -self.alpha1 / (x * x) - 2.0 * self.beta1 / (x * x * x)
    }
}

fn guard_nonzero(x: Complex64) -> Result<(), ModelError> {
    if x.norm() == 0.0 {
        Err(ModelError::EvalAtZero)
    } else {
        Ok(())
    }
}

/// The perturbation parameter, stored as its square root.
///
/// The equation is invariant under `sqrt_eps -> -sqrt_eps` (it only permutes
/// the four points), so the constructor normalizes `arg(sqrt_eps)` into
/// `(-pi/2, pi/2]` and every downstream formula sees a canonical
/// representative.  `eps^2 = 1` is rejected: the four-point coefficient
/// formulas divide by `1 - eps^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon {
    sqrt_eps: Complex64,
}

impl Epsilon {
    pub fn new(sqrt_eps: Complex64) -> Result<Self, ModelError> {
        if !sqrt_eps.re.is_finite() || !sqrt_eps.im.is_finite() || sqrt_eps.norm() == 0.0 {
            return Err(ModelError::InvalidSqrtEps);
        }
        let arg = sqrt_eps.arg();
        let s = if arg > PI / 2.0 || arg <= -PI / 2.0 { -sqrt_eps } else { sqrt_eps };
        let eps = s * s;
        if eps * eps == Complex64::new(1.0, 0.0) {
            return Err(ModelError::UnitEpsSquared);
        }
        Ok(Epsilon { sqrt_eps: s })
    }

    /// Convenience constructor for real positive `sqrt_eps`.
    pub fn from_real(sqrt_eps: f64) -> Result<Self, ModelError> {
        Epsilon::new(Complex64::new(sqrt_eps, 0.0))
    }

    pub fn sqrt_eps(&self) -> Complex64 {
        self.sqrt_eps
    }

    pub fn eps(&self) -> Complex64 {
        self.sqrt_eps * self.sqrt_eps
    }

    /// True when `eps` is real positive within `tol` (relative), i.e. when
    /// the canonical `sqrt_eps` is real positive.  Double resonance can only
    /// happen there.
    pub fn is_real_positive(&self, tol: f64) -> bool {
        self.sqrt_eps.im.abs() <= tol * self.sqrt_eps.norm() && self.sqrt_eps.re > 0.0
    }

    pub fn points(&self) -> SingularPoints {
        let s = self.sqrt_eps;
        SingularPoints { x_l: -s, x_r: s, x_ll: -1.0 / s, x_rr: 1.0 / s }
    }
}

/// Labels for the four regular singular points of the perturbed equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointId {
    L,
    R,
    LL,
    RR,
}

impl PointId {
    pub const ALL: [PointId; 4] = [PointId::L, PointId::R, PointId::LL, PointId::RR];

    /// The points `+-sqrt(eps)` merge into the origin as `eps -> 0`; the
    /// points `+-1/sqrt(eps)` escape to infinity.
    pub fn merges_into_origin(self) -> bool {
        matches!(self, PointId::L | PointId::R)
    }

    pub fn label(self) -> &'static str {
        match self {
            PointId::L => "L",
            PointId::R => "R",
            PointId::LL => "LL",
            PointId::RR => "RR",
        }
    }

    fn index(self) -> usize {
        match self {
            PointId::L => 0,
            PointId::R => 1,
            PointId::LL => 2,
            PointId::RR => 3,
        }
    }
}

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// The four regular singular points `x_L = -sqrt(eps)`, `x_R = sqrt(eps)`,
/// `x_LL = -1/sqrt(eps)`, `x_RR = 1/sqrt(eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPoints {
    pub x_l: Complex64,
    pub x_r: Complex64,
    pub x_ll: Complex64,
    pub x_rr: Complex64,
}

impl SingularPoints {
    pub fn at(&self, pt: PointId) -> Complex64 {
        match pt {
            PointId::L => self.x_l,
            PointId::R => self.x_r,
            PointId::LL => self.x_ll,
            PointId::RR => self.x_rr,
        }
    }

    /// Smallest pairwise distance between the four points; used to size
    /// contours and loop clearances.
    pub fn min_gap(&self) -> f64 {
        let pts = [self.x_l, self.x_r, self.x_ll, self.x_rr];
        let mut gap = f64::INFINITY;
        for i in 0..4 {
            for j in (i + 1)..4 {
                gap = gap.min((pts[i] - pts[j]).norm());
            }
        }
        gap
    }

    /// Distance from `x` to the nearest of the four points.
    pub fn clearance(&self, x: Complex64) -> f64 {
        PointId::ALL
            .iter()
            .map(|&pt| (x - self.at(pt)).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// The characteristic exponents `(rho_1, rho_2)` at each of the four regular
/// points.  `rho_1` belongs to the solution of the left first-order factor,
/// `rho_2` to the second basis solution of the full equation; the scalar
/// coefficient residues are `rho_1` and `rho_2 - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharExponents {
    rho: [(Complex64, Complex64); 4],
}

impl CharExponents {
    /// `(rho_1, rho_2)` at the given point.
    pub fn at(&self, pt: PointId) -> (Complex64, Complex64) {
        self.rho[pt.index()]
    }

    /// Exponent difference `rho_1 - rho_2` at the given point.
    pub fn delta(&self, pt: PointId) -> Complex64 {
        let (r1, r2) = self.at(pt);
        r1 - r2
    }

    /// Sum of all eight exponents.  Always 2 (Fuchs relation for four finite
    /// regular points and an ordinary point at infinity).
    pub fn sum_all(&self) -> Complex64 {
        self.rho.iter().map(|&(a, b)| a + b).sum()
    }
}

/// Characteristic exponents of the perturbed equation at the four points:
///
/// ```text
/// rho^R  = ( beta1/(2s),      beta2/(2s)     )      s = sqrt(eps)
/// rho^L  = (-beta1/(2s),     -beta2/(2s)     )
/// rho^RR = (-gamma1/(2s),  1 - gamma2/(2s)   )
/// rho^LL = ( gamma1/(2s),  1 + gamma2/(2s)   )
/// ```
pub fn char_exponents(p: &Params, e: &Epsilon) -> CharExponents {
    let two_s = 2.0 * e.sqrt_eps();
    let one = Complex64::new(1.0, 0.0);
    let r = (p.beta1 / two_s, p.beta2 / two_s);
    let l = (-p.beta1 / two_s, -p.beta2 / two_s);
    let rr = (-p.gamma1 / two_s, one - p.gamma2 / two_s);
    let ll = (p.gamma1 / two_s, one + p.gamma2 / two_s);
    CharExponents { rho: [l, r, ll, rr] }
}

/// The four double-resonance configurations.  Each makes the exponent
/// difference an integer at all four points simultaneously and produces
/// logarithms at exactly one origin-side point and one infinity-side point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResonanceKind {
    A1,
    A2,
    A3,
    A4,
}

impl ResonanceKind {
    pub const ALL: [ResonanceKind; 4] =
        [ResonanceKind::A1, ResonanceKind::A2, ResonanceKind::A3, ResonanceKind::A4];

    /// The two points whose local solutions carry a logarithm.
    pub fn logarithmic_points(self) -> [PointId; 2] {
        [self.origin_log_point(), self.infinity_log_point()]
    }

    /// The logarithmic point among `{L, R}`.
    pub fn origin_log_point(self) -> PointId {
        match self {
            ResonanceKind::A1 | ResonanceKind::A2 => PointId::L,
            ResonanceKind::A3 | ResonanceKind::A4 => PointId::R,
        }
    }

    /// The logarithmic point among `{LL, RR}`.
    pub fn infinity_log_point(self) -> PointId {
        match self {
            ResonanceKind::A1 | ResonanceKind::A3 => PointId::LL,
            ResonanceKind::A2 | ResonanceKind::A4 => PointId::RR,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ResonanceKind::A1 => "A1",
            ResonanceKind::A2 => "A2",
            ResonanceKind::A3 => "A3",
            ResonanceKind::A4 => "A4",
        }
    }
}

impl std::fmt::Display for ResonanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A detected double resonance: the type together with the two integers
///
/// ```text
/// n_beta  = |beta2 - beta1| / (2 sqrt(eps))   (>= 1)
/// n_gamma = |gamma2 - gamma1| / (2 sqrt(eps)) (>= 0)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoubleResonance {
    pub kind: ResonanceKind,
    pub n_beta: u32,
    pub n_gamma: u32,
}

/// Detects a double resonance.
///
/// Requires `eps` real positive (otherwise no double resonance exists) and
/// then tests, with relative tolerance `int_tol`, which sign pattern of
///
/// ```text
/// A1: (beta2-beta1)/(2s) in N,  (gamma1-gamma2)/(2s) in N0
/// A2: (beta2-beta1)/(2s) in N,  (gamma2-gamma1)/(2s) in N0
/// A3: (beta1-beta2)/(2s) in N,  (gamma1-gamma2)/(2s) in N0
/// A4: (beta1-beta2)/(2s) in N,  (gamma2-gamma1)/(2s) in N0
/// ```
///
/// holds.  When `gamma1 = gamma2` both members of a pair match; the
/// lower-numbered type is reported.
pub fn classify_resonance(p: &Params, e: &Epsilon, int_tol: f64) -> Option<DoubleResonance> {
    if !e.is_real_positive(int_tol) {
        return None;
    }
    let two_s = 2.0 * e.sqrt_eps();
    let mb = near_integer(p.beta_diff() / two_s, int_tol)?;
    let mg = near_integer(p.gamma_diff() / two_s, int_tol)?;
    let kind = if mb >= 1 {
        if mg <= 0 { ResonanceKind::A1 } else { ResonanceKind::A2 }
    } else if mb <= -1 {
        if mg <= 0 { ResonanceKind::A3 } else { ResonanceKind::A4 }
    } else {
        return None;
    };
    Some(DoubleResonance { kind, n_beta: mb.unsigned_abs() as u32, n_gamma: mg.unsigned_abs() as u32 })
}

/// Coefficient evaluator for the unperturbed scalar equation
/// `y'' + b1 y' + b0 y = 0` obtained by composing the two first-order
/// factors.
#[derive(Debug, Clone, Copy)]
pub struct InitialEquation {
    pub params: GeneralParams,
}

/// Evaluator for the unperturbed equation of the pinned family
/// (`alpha1 = 0`, `alpha2 = -2`).
pub fn initial_coefficients(p: &Params) -> InitialEquation {
    InitialEquation { params: p.general() }
}

impl InitialEquation {
    /// Evaluator for an arbitrary six-parameter member (used by the symmetry
    /// maps, which leave the pinned family).
    pub fn from_general(g: GeneralParams) -> Self {
        InitialEquation { params: g }
    }

    pub fn a1(&self, x: Complex64) -> Result<Complex64, ModelError> {
        self.params.a1(x)
    }

    pub fn a2(&self, x: Complex64) -> Result<Complex64, ModelError> {
        self.params.a2(x)
    }

    /// `(b1, b0)` with
    ///
    /// ```text
    /// b1 = -(alpha1+alpha2)/x - (beta1+beta2)/x^2 - (gamma1+gamma2)
    /// b0 = (alpha1 gamma2 + alpha2 gamma1)/x
    ///    + (alpha1 + alpha1 alpha2 + beta1 gamma2 + beta2 gamma1)/x^2
    ///    + (2 beta1 + alpha1 beta2 + alpha2 beta1)/x^3
    ///    + beta1 beta2 / x^4 + gamma1 gamma2
    /// ```
    ///
    /// which is exactly `b1 = -(a1 + a2)`, `b0 = a1 a2 - a1'`.
    pub fn b(&self, x: Complex64) -> Result<(Complex64, Complex64), ModelError> {
        guard_nonzero(x)?;
        let g = &self.params;
        let x2 = x * x;
        let x3 = x2 * x;
        let x4 = x2 * x2;
        let b1 = -(g.alpha1 + g.alpha2) / x - (g.beta1 + g.beta2) / x2 - (g.gamma1 + g.gamma2);
        let b0 = (g.alpha1 * g.gamma2 + g.alpha2 * g.gamma1) / x
            + (g.alpha1 + g.alpha1 * g.alpha2 + g.beta1 * g.gamma2 + g.beta2 * g.gamma1) / x2
            + (2.0 * g.beta1 + g.alpha1 * g.beta2 + g.alpha2 * g.beta1) / x3
            + g.beta1 * g.beta2 / x4
            + g.gamma1 * g.gamma2;
        Ok((b1, b0))
    }

    /// Same pair computed from the factor coefficients,
    /// `(-(a1+a2), a1 a2 - a1')`.  Agrees with [`InitialEquation::b`]
    /// identically; kept as an independent route for tests.
    pub fn b_from_factors(&self, x: Complex64) -> Result<(Complex64, Complex64), ModelError> {
        let a1 = self.a1(x)?;
        let a2 = self.a2(x)?;
        Ok((-(a1 + a2), a1 * a2 - self.params.a1_prime(x)))
    }
}

/// Coefficient evaluator for the perturbed scalar equation whose factor
/// coefficients have simple poles at the four points `+-sqrt(eps)`,
/// `+-1/sqrt(eps)`.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedEquation {
    pub params: Params,
    pub epsilon: Epsilon,
    points: SingularPoints,
}

/// Evaluator for the perturbed family member at the given `eps`.
pub fn perturbed_coefficients(p: &Params, e: &Epsilon) -> PerturbedEquation {
    PerturbedEquation { params: *p, epsilon: *e, points: e.points() }
}

impl PerturbedEquation {
    pub fn points(&self) -> SingularPoints {
        self.points
    }

    fn guard(&self, x: Complex64) -> Result<(), ModelError> {
        for pt in PointId::ALL {
            let xs = self.points.at(pt);
            if (x - xs).norm() <= 1e-14 * (1.0 + x.norm() + xs.norm()) {
                return Err(ModelError::EvalAtSingularPoint(xs));
            }
        }
        Ok(())
    }

    /// `a1(x) = beta1/(x^2 - eps) + gamma1/(1 - eps x^2)`.
    ///
    /// Partial fractions:
    /// `beta1/(2s) [1/(x-s) - 1/(x+s)] + gamma1/(2s) [-1/(x-1/s) + 1/(x+1/s)]`.
    pub fn a1(&self, x: Complex64) -> Result<Complex64, ModelError> {
        self.guard(x)?;
        let p = &self.params;
        let eps = self.epsilon.eps();
        let x2 = x * x;
        Ok(p.beta1 / (x2 - eps) + p.gamma1 / (Complex64::new(1.0, 0.0) - eps * x2))
    }

    /// `a2(x) = (beta2 - 2x)/(x^2 - eps) + gamma2/(1 - eps x^2)`.
    pub fn a2(&self, x: Complex64) -> Result<Complex64, ModelError> {
        self.guard(x)?;
        let p = &self.params;
        let eps = self.epsilon.eps();
        let x2 = x * x;
        Ok((p.beta2 - 2.0 * x) / (x2 - eps) + p.gamma2 / (Complex64::new(1.0, 0.0) - eps * x2))
    }

    fn a1_prime(&self, x: Complex64) -> Complex64 {
        let p = &self.params;
        let eps = self.epsilon.eps();
        let x2 = x * x;
        let d1 = x2 - eps;
        let d2 = Complex64::new(1.0, 0.0) - eps * x2;
        -2.0 * x * p.beta1 / (d1 * d1) + 2.0 * eps * x * p.gamma1 / (d2 * d2)
    }

    /// `(b1, b0) = (-(a1 + a2), a1 a2 - a1')` of the scalar form.
    pub fn b(&self, x: Complex64) -> Result<(Complex64, Complex64), ModelError> {
        let a1 = self.a1(x)?;
        let a2 = self.a2(x)?;
        Ok((-(a1 + a2), a1 * a2 - self.a1_prime(x)))
    }
}

/// The five candidate singular points of the generic six-parameter equation.
/// `XInf` is the point at infinity; the others are the four finite points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidatePoint {
    XInf,
    XRR,
    XLL,
    XR,
    XL,
}

impl CandidatePoint {
    pub const ALL: [CandidatePoint; 5] = [
        CandidatePoint::XInf,
        CandidatePoint::XRR,
        CandidatePoint::XLL,
        CandidatePoint::XR,
        CandidatePoint::XL,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CandidatePoint::XInf => "infinity",
            CandidatePoint::XRR => "RR",
            CandidatePoint::XLL => "LL",
            CandidatePoint::XR => "R",
            CandidatePoint::XL => "L",
        }
    }
}

impl std::fmt::Display for CandidatePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// The eight parameter families for which exactly one candidate point is
/// ordinary, leaving four regular singular points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourPointCase {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
}

impl FourPointCase {
    pub const ALL: [FourPointCase; 8] = [
        FourPointCase::I,
        FourPointCase::II,
        FourPointCase::III,
        FourPointCase::IV,
        FourPointCase::V,
        FourPointCase::VI,
        FourPointCase::VII,
        FourPointCase::VIII,
    ];

    /// The candidate point that becomes ordinary in this family.
    pub fn ordinary_point(self) -> CandidatePoint {
        match self {
            FourPointCase::I | FourPointCase::II => CandidatePoint::XInf,
            FourPointCase::III => CandidatePoint::XRR,
            FourPointCase::IV => CandidatePoint::XLL,
            FourPointCase::V | FourPointCase::VI => CandidatePoint::XR,
            FourPointCase::VII | FourPointCase::VIII => CandidatePoint::XL,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FourPointCase::I => "I",
            FourPointCase::II => "II",
            FourPointCase::III => "III",
            FourPointCase::IV => "IV",
            FourPointCase::V => "V",
            FourPointCase::VI => "VI",
            FourPointCase::VII => "VII",
            FourPointCase::VIII => "VIII",
        }
    }
}

impl std::fmt::Display for FourPointCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// The local data deciding ordinariness of one candidate point: the
/// first-order coefficient residue `p` and the two leading coefficients
/// `q0`, `q1` of the zero-order part.  The point is ordinary iff all three
/// vanish.  `scale` records the sum of the magnitudes of the additive terms
/// of each expression, so vanishing can be judged relative to cancellation.
#[derive(Debug, Clone, Copy)]
pub struct TripleEval {
    pub point: CandidatePoint,
    pub p: Complex64,
    pub q0: Complex64,
    pub q1: Complex64,
    pub scale: [f64; 3],
    pub ordinary: bool,
}

/// Two readings of one product in the `q1` coefficient at `x = +-sqrt(eps)`,
/// which the closed-form family conditions disambiguate.  `Alpha1Alpha2`
/// (the default elsewhere in the crate) is the reading consistent with all
/// eight families; `Alpha1Squared` breaks families V through VIII whenever
/// `alpha1 != 0` and `alpha1 != alpha2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Q41Reading {
    #[default]
    Alpha1Alpha2,
    Alpha1Squared,
}

/// Report of [`heun_case_check`].
#[derive(Debug, Clone)]
pub struct FourPointReport {
    pub triples: [TripleEval; 5],
    /// Which of the eight closed-form family conditions hold.
    pub case_conditions: [bool; 8],
    /// First family (in order I..VIII) whose condition holds and whose
    /// designated point is ordinary, if any.
    pub matched_case: Option<FourPointCase>,
    pub q41_reading: Q41Reading,
}

impl FourPointReport {
    pub fn ordinary_points(&self) -> Vec<CandidatePoint> {
        self.triples.iter().filter(|t| t.ordinary).map(|t| t.point).collect()
    }

    pub fn singular_points(&self) -> Vec<CandidatePoint> {
        self.triples.iter().filter(|t| !t.ordinary).map(|t| t.point).collect()
    }

    pub fn singular_count(&self) -> usize {
        self.triples.iter().filter(|t| !t.ordinary).count()
    }
}

/// Running sum that tracks the total magnitude of its addends, so a result
/// can be tested for vanishing relative to the cancellation that produced it.
#[derive(Clone, Copy)]
struct TermSum {
    value: Complex64,
    scale: f64,
}

impl TermSum {
    fn new() -> Self {
        TermSum { value: Complex64::new(0.0, 0.0), scale: 0.0 }
    }

    fn add(mut self, t: Complex64) -> Self {
        self.value += t;
        self.scale += t.norm();
        self
    }

    fn vanishes(&self, tol: f64) -> bool {
        self.value.norm() <= tol * self.scale.max(1.0)
    }
}

/// Classifies which of the five candidate singular points of the generic
/// six-parameter equation are ordinary, and which of the eight four-point
/// families the parameters belong to.
///
/// At each candidate point the local expansion of the equation yields a
/// triple `(p, q0, q1)`; the point is ordinary iff all three vanish (below
/// [`TRIPLE_TOL`] relative to the additive scale of each expression).  The
/// closed-form family conditions are evaluated independently and
/// cross-checked: `matched_case` requires both the condition and the
/// vanishing triple at the family's designated point.
pub fn heun_case_check(
    g: &GeneralParams,
    e: &Epsilon,
    reading: Q41Reading,
) -> Result<FourPointReport, ModelError> {
    let s = e.sqrt_eps();
    let eps = e.eps();
    let one = Complex64::new(1.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let omee = one - eps * eps; // nonzero: eps^2 = 1 rejected by Epsilon
    let (a1, a2, b1, b2, g1, g2) = (g.alpha1, g.alpha2, g.beta1, g.beta2, g.gamma1, g.gamma2);
    // q1 at x = +-sqrt(eps) contains the product x_alpha; see Q41Reading.
    let x_alpha = match reading {
        Q41Reading::Alpha1Alpha2 => a1 * a2,
        Q41Reading::Alpha1Squared => a1 * a1,
    };

    // Point at infinity.
    let p1 = TermSum::new().add(a1).add(a2).add(two);
    let q10 = TermSum::new().add(a1 * a2).add(a1);
    let q11 = TermSum::new()
        .add(2.0 * b1)
        .add(a1 * b2)
        .add(a2 * b1)
        .add(-2.0 * g1 / eps)
        .add(-a1 * g2 / eps)
        .add(-a2 * g1 / eps);

    // x_RR = 1/sqrt(eps).
    let p2 = TermSum::new().add(g1 / (2.0 * s)).add(g2 / (2.0 * s));
    let q20 = TermSum::new().add(-g1 * s / 2.0).add(g1 * g2 / 4.0);
    let q21 = TermSum::new()
        .add(g1 / eps)
        .add(-g1 * g2 / (2.0 * eps * s))
        .add(g1 * g2 / (4.0 * eps))
        .add(b1 * g2 * s / (2.0 * eps * omee))
        .add(b2 * g1 * s / (2.0 * eps * omee))
        .add(a1 * g2 / (2.0 * eps * omee))
        .add(a2 * g1 / (2.0 * eps * omee));

    // x_LL = -1/sqrt(eps).
    let p3 = TermSum::new().add(-g1 / (2.0 * s)).add(-g2 / (2.0 * s));
    let q30 = TermSum::new().add(g1 * s / 2.0).add(g1 * g2 / 4.0);
    let q31 = TermSum::new()
        .add(g1 / eps)
        .add(g1 * g2 / (2.0 * eps * s))
        .add(-g1 * g2 / (4.0 * eps))
        .add(-b1 * g2 * s / (2.0 * eps * omee))
        .add(-b2 * g1 * s / (2.0 * eps * omee))
        .add(a1 * g2 / (2.0 * eps * omee))
        .add(a2 * g1 / (2.0 * eps * omee));

    // x_R = sqrt(eps).
    let p4 = TermSum::new()
        .add(-a1 / 2.0)
        .add(-a2 / 2.0)
        .add(-b1 / (2.0 * s))
        .add(-b2 / (2.0 * s));
    let q40 = TermSum::new()
        .add(a1 / 2.0)
        .add(a1 * a2 / 4.0)
        .add(a1 * b2 / (4.0 * s))
        .add(b1 / (2.0 * s))
        .add(a2 * b1 / (4.0 * s))
        .add(b1 * b2 / (4.0 * eps));
    let q41 = TermSum::new()
        .add(-s * a1)
        .add(-s * a1 * a2 / 2.0)
        .add(-a1 * b2 / 2.0)
        .add(-b1)
        .add(-a2 * b1 / 2.0)
        .add(-b1 * b2 / (2.0 * s))
        .add(b1 * b2 / (4.0 * s))
        .add(-eps * x_alpha / (4.0 * s))
        .add(-eps * a1 * g2 / (2.0 * omee))
        .add(-eps * a2 * g1 / (2.0 * omee))
        .add(-s * b1 * g2 / (2.0 * omee))
        .add(-s * b2 * g1 / (2.0 * omee));

    // x_L = -sqrt(eps).
    let p5 = TermSum::new()
        .add(-a1 / 2.0)
        .add(-a2 / 2.0)
        .add(b1 / (2.0 * s))
        .add(b2 / (2.0 * s));
    let q50 = TermSum::new()
        .add(a1 / 2.0)
        .add(a1 * a2 / 4.0)
        .add(-a1 * b2 / (4.0 * s))
        .add(-b1 / (2.0 * s))
        .add(-a2 * b1 / (4.0 * s))
        .add(b1 * b2 / (4.0 * eps));
    let q51 = TermSum::new()
        .add(-s * a1)
        .add(-s * a1 * a2 / 2.0)
        .add(a1 * b2 / 2.0)
        .add(b1)
        .add(a2 * b1 / 2.0)
        .add(-b1 * b2 / (2.0 * s))
        .add(-b1 * b2 / (4.0 * s))
        .add(eps * x_alpha / (4.0 * s))
        .add(-eps * a1 * g2 / (2.0 * omee))
        .add(-eps * a2 * g1 / (2.0 * omee))
        .add(s * b1 * g2 / (2.0 * omee))
        .add(s * b2 * g1 / (2.0 * omee));

    let build = |point: CandidatePoint, p: TermSum, q0: TermSum, q1: TermSum| TripleEval {
        point,
        p: p.value,
        q0: q0.value,
        q1: q1.value,
        scale: [p.scale, q0.scale, q1.scale],
        ordinary: p.vanishes(TRIPLE_TOL) && q0.vanishes(TRIPLE_TOL) && q1.vanishes(TRIPLE_TOL),
    };
    let triples = [
        build(CandidatePoint::XInf, p1, q10, q11),
        build(CandidatePoint::XRR, p2, q20, q21),
        build(CandidatePoint::XLL, p3, q30, q31),
        build(CandidatePoint::XR, p4, q40, q41),
        build(CandidatePoint::XL, p5, q50, q51),
    ];

    // Closed-form family conditions, same relative-tolerance style.
    let near = |sum: TermSum| sum.vanishes(TRIPLE_TOL);
    let cond = [
        // I: alpha1 = 0, alpha2 = -2
        near(TermSum::new().add(a1)) && near(TermSum::new().add(a2).add(two)),
        // II: alpha1 = alpha2 = -1 and beta1 - beta2 + (gamma2 - gamma1)/eps = 0
        near(TermSum::new().add(a1).add(one))
            && near(TermSum::new().add(a2).add(one))
            && near(TermSum::new().add(b1).add(-b2).add(g2 / eps).add(-g1 / eps)),
        // III: gamma1 = -2 sqrt(eps), gamma2 = 2 sqrt(eps),
        //      [eps(beta1-beta2) + sqrt(eps)(alpha1-alpha2)] / (eps(1-eps^2)) = 1
        near(TermSum::new().add(g1).add(2.0 * s))
            && near(TermSum::new().add(g2).add(-2.0 * s))
            && near(
                TermSum::new()
                    .add((b1 - b2) / omee)
                    .add((a1 - a2) / (s * omee))
                    .add(-one),
            ),
        // IV: gamma1 = 2 sqrt(eps), gamma2 = -2 sqrt(eps),
        //     [eps(beta1-beta2) - sqrt(eps)(alpha1-alpha2)] / (eps(1-eps^2)) = -1
        near(TermSum::new().add(g1).add(-2.0 * s))
            && near(TermSum::new().add(g2).add(2.0 * s))
            && near(
                TermSum::new()
                    .add((b1 - b2) / omee)
                    .add(-(a1 - a2) / (s * omee))
                    .add(one),
            ),
        // V: beta_j = -alpha_j sqrt(eps)
        near(TermSum::new().add(b1).add(a1 * s)) && near(TermSum::new().add(b2).add(a2 * s)),
        // VI: beta1 = -(alpha1-2) sqrt(eps), beta2 = -(alpha2+2) sqrt(eps),
        //     (alpha2-alpha1)/2 + sqrt(eps)(gamma2-gamma1)/(1-eps^2) = -1
        near(TermSum::new().add(b1).add((a1 - two) * s))
            && near(TermSum::new().add(b2).add((a2 + two) * s))
            && near(
                TermSum::new()
                    .add((a2 - a1) / 2.0)
                    .add(s * (g2 - g1) / omee)
                    .add(one),
            ),
        // VII: beta_j = alpha_j sqrt(eps)
        near(TermSum::new().add(b1).add(-a1 * s)) && near(TermSum::new().add(b2).add(-a2 * s)),
        // VIII: beta1 = (alpha1-2) sqrt(eps), beta2 = (alpha2+2) sqrt(eps),
        //       (alpha2-alpha1)/2 - sqrt(eps)(gamma2-gamma1)/(1-eps^2) = -1
        near(TermSum::new().add(b1).add(-(a1 - two) * s))
            && near(TermSum::new().add(b2).add(-(a2 + two) * s))
            && near(
                TermSum::new()
                    .add((a2 - a1) / 2.0)
                    .add(-s * (g2 - g1) / omee)
                    .add(one),
            ),
    ];

    let matched_case = FourPointCase::ALL.iter().copied().find(|&case| {
        cond[case as usize]
            && triples
                .iter()
                .find(|t| t.point == case.ordinary_point())
                .is_some_and(|t| t.ordinary)
    });

    Ok(FourPointReport { triples, case_conditions: cond, matched_case, q41_reading: reading })
}

/// Builds a member of the given four-point family from the free parameters
/// the family leaves open.  `free` supplies up to four complex degrees of
/// freedom; families with fewer ignore the surplus entries.
///
/// Free-slot meaning per family:
/// - I: `(beta1, beta2, gamma1, gamma2)`
/// - II: `(beta2, gamma1, gamma2, _)`
/// - III, IV: `(alpha1, alpha2, beta2, _)`
/// - V, VII: `(alpha1, alpha2, gamma1, gamma2)`
/// - VI, VIII: `(alpha1, gamma1, gamma2, _)`
pub fn sample_case_params(case: FourPointCase, e: &Epsilon, free: [Complex64; 4]) -> GeneralParams {
    let s = e.sqrt_eps();
    let eps = e.eps();
    let one = Complex64::new(1.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let omee = one - eps * eps;
    let [w1, w2, w3, w4] = free;
    match case {
        FourPointCase::I => GeneralParams {
            alpha1: Complex64::new(0.0, 0.0),
            alpha2: Complex64::new(-2.0, 0.0),
            beta1: w1,
            beta2: w2,
            gamma1: w3,
            gamma2: w4,
        },
        FourPointCase::II => GeneralParams {
            alpha1: -one,
            alpha2: -one,
            beta1: w1 - (w3 - w2) / eps,
            beta2: w1,
            gamma1: w2,
            gamma2: w3,
        },
        FourPointCase::III => GeneralParams {
            alpha1: w1,
            alpha2: w2,
            beta1: w3 + (eps * omee - s * (w1 - w2)) / eps,
            beta2: w3,
            gamma1: -2.0 * s,
            gamma2: 2.0 * s,
        },
        FourPointCase::IV => GeneralParams {
            alpha1: w1,
            alpha2: w2,
            beta1: w3 + (-eps * omee + s * (w1 - w2)) / eps,
            beta2: w3,
            gamma1: 2.0 * s,
            gamma2: -2.0 * s,
        },
        FourPointCase::V => GeneralParams {
            alpha1: w1,
            alpha2: w2,
            beta1: -w1 * s,
            beta2: -w2 * s,
            gamma1: w3,
            gamma2: w4,
        },
        FourPointCase::VI => {
            let alpha2 = w1 - two - 2.0 * s * (w3 - w2) / omee;
            GeneralParams {
                alpha1: w1,
                alpha2,
                beta1: -(w1 - two) * s,
                beta2: -(alpha2 + two) * s,
                gamma1: w2,
                gamma2: w3,
            }
        }
        FourPointCase::VII => GeneralParams {
            alpha1: w1,
            alpha2: w2,
            beta1: w1 * s,
            beta2: w2 * s,
            gamma1: w3,
            gamma2: w4,
        },
        FourPointCase::VIII => {
            let alpha2 = w1 - two + 2.0 * s * (w3 - w2) / omee;
            GeneralParams {
                alpha1: w1,
                alpha2,
                beta1: (w1 - two) * s,
                beta2: (alpha2 + two) * s,
                gamma1: w2,
                gamma2: w3,
            }
        }
    }
}

/// The three parameter symmetries of the unperturbed equation.  Each maps a
/// solution `y(x)` of the source equation to a solution of the equation with
/// transported parameters evaluated at [`SymmetryMap::map_x`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryMap {
    /// `x -> 1/x`: swaps the origin and infinity data with sign flips.
    InvertX,
    /// `x -> -1/x`: swaps the origin and infinity data without sign flips.
    ReflectInvertX,
    /// `x -> -x`: flips the signs of all betas and gammas.
    NegateX,
}

impl SymmetryMap {
    /// Transported parameters:
    ///
    /// ```text
    /// InvertX:        alpha1 -> -alpha1, alpha2 -> -alpha2 - 2, beta_j -> -gamma_j, gamma_j -> -beta_j
    /// ReflectInvertX: alpha1 -> -alpha1, alpha2 -> -alpha2 - 2, beta_j ->  gamma_j, gamma_j ->  beta_j
    /// NegateX:        alphas fixed, beta_j -> -beta_j, gamma_j -> -gamma_j
    /// ```
    pub fn apply(self, g: &GeneralParams) -> GeneralParams {
        let two = Complex64::new(2.0, 0.0);
        match self {
            SymmetryMap::InvertX => GeneralParams {
                alpha1: -g.alpha1,
                alpha2: -g.alpha2 - two,
                beta1: -g.gamma1,
                beta2: -g.gamma2,
                gamma1: -g.beta1,
                gamma2: -g.beta2,
            },
            SymmetryMap::ReflectInvertX => GeneralParams {
                alpha1: -g.alpha1,
                alpha2: -g.alpha2 - two,
                beta1: g.gamma1,
                beta2: g.gamma2,
                gamma1: g.beta1,
                gamma2: g.beta2,
            },
            SymmetryMap::NegateX => GeneralParams {
                alpha1: g.alpha1,
                alpha2: g.alpha2,
                beta1: -g.beta1,
                beta2: -g.beta2,
                gamma1: -g.gamma1,
                gamma2: -g.gamma2,
            },
        }
    }

    /// The variable change the map performs.
    pub fn map_x(self, x: Complex64) -> Complex64 {
        match self {
            SymmetryMap::InvertX => 1.0 / x,
            SymmetryMap::ReflectInvertX => -1.0 / x,
            SymmetryMap::NegateX => -x,
        }
    }
}

/// Applies one of the three parameter symmetries.
pub fn symmetry_transport(g: &GeneralParams, which: SymmetryMap) -> GeneralParams {
    which.apply(g)
}

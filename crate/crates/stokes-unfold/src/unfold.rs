//! Monodromy of the four-point family at double resonance.
//!
//! At a double resonance the monodromy matrix around each singular point
//! factors as a diagonal exponential part times a unipotent part
//! `exp(2 pi i T)` with `T = [[0, d], [0, 0]]`.  The off-diagonal number `d`
//! is nonzero only at the two logarithmic points of the resonance type and
//! has a closed form: a finite double sum of Gamma-function ratios in
//! `sqrt(eps)`.  This module evaluates those closed forms
//! ([`d_coefficient`]), assembles the decompositions
//! ([`monodromy_decomp`]) and the unipotent factors ([`unfolded_stokes`]),
//! and runs the convergence experiment ([`limit_experiment`]) showing that
//! as `eps -> 0` along the resonant sequence the unipotent factors tend to
//! the Stokes matrices of the merged equation:
//!
//! ```text
//! lim 2 pi i d_(origin log point)   = mu_0   = -2 pi i (gamma2-gamma1) S
//! lim 2 pi i d_(infinity log point) = mu_inf = +2 pi i (gamma2-gamma1) S
//! ```
//!
//! The origin-side sum runs over `k = 1..n_beta`, the infinity-side sum
//! over `k = 0..n_gamma-1`, each with an inner binomial-Gamma sum; the
//! Gamma ratios whose denominator argument is a non-positive integer are
//! exact zeros (the reciprocal sits at a pole), which is what truncates the
//! inner sums.  Everything is computed in log space with the zero cases
//! short-circuited, and the `k`-sums use compensated summation because the
//! `sigma = -1` families alternate.
//!
//! The infinity-side closed form is evaluated exactly as displayed,
//! including the `2 sqrt(eps)/(beta2-beta1)` prefactor alongside the
//! `(2 sqrt(eps))^{k+1}` factor inside the sum; the limit rewriting that
//! drops the prefactor absorbs it into the inner sum's growth, so the two
//! presentations agree.  The contour-residue oracle cross-checks the
//! displayed form directly.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::mat2::Mat2;
use crate::model::{
    char_exponents, classify_resonance, DoubleResonance, Epsilon, ModelError, Params, PointId,
    ResonanceKind,
};
use crate::specfun::{ln_binomial, ln_gamma_real, SpecFunError};
use crate::stokes::{bessel_sum_S, stokes_infinity, stokes_origin, StokesError};

/// Largest supported resonance order `max(n_beta, n_gamma)`.
pub const MAX_RESONANCE_ORDER: u32 = 512;

/// Integer-detection tolerance used by the resonance gate.
const GATE_INT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum UnfoldError {
    /// The parameters do not realize the resonance the caller stated.
    #[error("parameters realize {detected:?}, not the stated resonance {stated:?}")]
    WrongResonance { stated: DoubleResonance, detected: Option<DoubleResonance> },
    /// `n_beta` or `n_gamma` beyond [`MAX_RESONANCE_ORDER`].
    #[error("resonance order {n} exceeds the cap {MAX_RESONANCE_ORDER}")]
    ResonanceTooDeep { n: u32 },
    /// The limit experiment needs real parameter differences with the sign
    /// pattern of the chosen case and a rational gamma/beta ratio.
    #[error("incompatible limit-experiment parameters: {0}")]
    IncompatibleParameters(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// The four parameter-sign cases of the limit `2 pi i d -> mu`, each selecting
/// the resonance type realized by `sqrt(eps) = |beta2-beta1|/(2n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MainCase {
    /// `beta2-beta1 > 0`, `gamma2-gamma1 > 0`.
    One,
    /// `beta2-beta1 < 0`, `gamma2-gamma1 < 0`.
    Two,
    /// `beta2-beta1 > 0`, `gamma2-gamma1 < 0`.
    Three,
    /// `beta2-beta1 < 0`, `gamma2-gamma1 > 0`.
    Four,
}

impl MainCase {
    pub const ALL: [MainCase; 4] = [MainCase::One, MainCase::Two, MainCase::Three, MainCase::Four];

    /// The resonance type the case's sign pattern produces.
    pub fn resonance_kind(self) -> ResonanceKind {
        match self {
            MainCase::One => ResonanceKind::A2,
            MainCase::Two => ResonanceKind::A3,
            MainCase::Three => ResonanceKind::A1,
            MainCase::Four => ResonanceKind::A4,
        }
    }

    /// Required signs of `(beta2-beta1, gamma2-gamma1)`.
    pub fn signs(self) -> (f64, f64) {
        match self {
            MainCase::One => (1.0, 1.0),
            MainCase::Two => (-1.0, -1.0),
            MainCase::Three => (1.0, -1.0),
            MainCase::Four => (-1.0, 1.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MainCase::One => "1",
            MainCase::Two => "2",
            MainCase::Three => "3",
            MainCase::Four => "4",
        }
    }
}

impl std::fmt::Display for MainCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Monodromy decomposition at one of the four points: diagonal exponential
/// part times the unipotent factor `exp(2 pi i T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyDecomp {
    pub point: PointId,
    /// Characteristic exponents `(rho_1, rho_2)` at the point.
    pub rho: (Complex64, Complex64),
    /// `diag(e^{2 pi i rho_1}, e^{2 pi i (rho_2 - 1)})`.
    pub exponent_part: Mat2,
    /// Off-diagonal entry of the nilpotent `T`; zero off the logarithmic
    /// points.
    pub d: Complex64,
}

impl MonodromyDecomp {
    /// The nilpotent `T = [[0, d], [0, 0]]`.
    pub fn t_matrix(&self) -> Mat2 {
        let zero = Complex64::new(0.0, 0.0);
        Mat2::new(zero, self.d, zero, zero)
    }

    /// `exp(2 pi i T) = [[1, 2 pi i d], [0, 1]]` (T is nilpotent, the
    /// exponential series stops after the linear term).
    pub fn unipotent(&self) -> Mat2 {
        Mat2::upper_unipotent(Complex64::new(0.0, 2.0 * PI) * self.d)
    }

    /// The monodromy matrix `exponent_part * exp(2 pi i T)`.
    pub fn monodromy(&self) -> Mat2 {
        self.exponent_part * self.unipotent()
    }
}

/// One row of the convergence experiment: the resonant `sqrt(eps)` for `n`,
/// the coefficient at one logarithmic point, and the distance of
/// `2 pi i d` from the Stokes multiplier it converges to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: u32,
    pub sqrt_eps: f64,
    pub point: PointId,
    pub d: Complex64,
    pub abs_err: f64,
}

/// Convergence experiment output: two rows per `n` (origin-side and
/// infinity-side logarithmic points), in the order of the input `n` list.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: MainCase,
    /// Stokes multiplier at the origin, the target of the origin-side rows.
    pub mu_origin: Complex64,
    /// Stokes multiplier at infinity, the target of the infinity-side rows.
    pub mu_infinity: Complex64,
    pub rows: Vec<ConvergenceRow>,
}

/// `sigma`, `eta`, `W` of the resonance type, for `eps = sqrt_eps^2`:
///
/// ```text
/// A1, A4:  sigma = +1,  eta = sqrt_eps/(1+eps),  W = (1+eps)/(1-eps)
/// A2, A3:  sigma = -1,  eta = sqrt_eps/(1-eps),  W = (1-eps)/(1+eps)
/// ```
struct Skeleton {
    sigma: f64,
    eta: f64,
    w: f64,
}

fn skeleton(kind: ResonanceKind, e: &Epsilon) -> Skeleton {
    // the resonance gate guarantees eps real positive
    let s = e.sqrt_eps().re;
    let eps = s * s;
    match kind {
        ResonanceKind::A1 | ResonanceKind::A4 => {
            Skeleton { sigma: 1.0, eta: s / (1.0 + eps), w: (1.0 + eps) / (1.0 - eps) }
        }
        ResonanceKind::A2 | ResonanceKind::A3 => {
            Skeleton { sigma: -1.0, eta: s / (1.0 - eps), w: (1.0 - eps) / (1.0 + eps) }
        }
    }
}

/// `ln Gamma(m)/Gamma(mm)` for integer `m >= 1`; `None` encodes an exact
/// zero ratio (`mm <= 0` puts the reciprocal at a pole of Gamma).
fn ln_gamma_ratio_int(m: i64, mm: i64) -> Option<f64> {
    debug_assert!(m >= 1);
    if mm <= 0 {
        return None;
    }
    Some(ln_gamma_real(m as f64) - ln_gamma_real(mm as f64))
}

/// Log-sum-exp of the inner binomial-Gamma sum
/// `A_k = sum_s C(k,s) * ratio(s) * W^s` (all terms nonnegative);
/// `None` when every term vanishes.
fn ln_inner_sum(k: u32, ln_w: f64, ratio: impl Fn(u32) -> Option<f64>) -> Option<f64> {
    let mut lns: Vec<f64> = Vec::with_capacity(k as usize + 1);
    for s in 0..=k {
        if let Some(lr) = ratio(s) {
            lns.push(ln_binomial(k as u64, s as u64) + lr + f64::from(s) * ln_w);
        }
    }
    let m = lns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    Some(m + lns.iter().map(|l| (l - m).exp()).sum::<f64>().ln())
}

struct Kahan {
    acc: f64,
    comp: f64,
}

impl Kahan {
    fn new() -> Self {
        Kahan { acc: 0.0, comp: 0.0 }
    }

    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.acc + y;
        self.comp = (t - self.acc) - y;
        self.acc = t;
    }
}

fn gate(p: &Params, e: &Epsilon, r: DoubleResonance) -> Result<(), UnfoldError> {
    let detected = classify_resonance(p, e, GATE_INT_TOL);
    if detected != Some(r) {
        return Err(UnfoldError::WrongResonance { stated: r, detected });
    }
    let n = r.n_beta.max(r.n_gamma);
    if n > MAX_RESONANCE_ORDER {
        return Err(UnfoldError::ResonanceTooDeep { n });
    }
    Ok(())
}

/// Origin-side sum (points `L`, `R`):
///
/// ```text
/// sum_{k=1}^{n_beta} sigma^{k-1} (2 sqrt_eps)^{k-1} / ((k-1)! k!) * eta^k
///        * Gamma(n_beta)/Gamma(n_beta-k+1) * A_k,
/// A_k = sum_{s=0}^{k} C(k,s) Gamma(n_gamma+s)/Gamma(n_gamma+1-k+s) W^s.
/// ```
fn origin_sum(r: DoubleResonance, sk: &Skeleton, two_s: f64) -> f64 {
    let nb = i64::from(r.n_beta);
    let ng = i64::from(r.n_gamma);
    let ln_two_s = two_s.ln();
    let ln_eta = sk.eta.ln();
    let ln_w = sk.w.ln();
    let mut sum = Kahan::new();
    for k in 1..=r.n_beta {
        let ki = i64::from(k);
        let Some(ln_outer_ratio) = ln_gamma_ratio_int(nb, nb - ki + 1) else { continue };
        let Some(ln_a) =
            ln_inner_sum(k, ln_w, |s| ln_gamma_ratio_int(ng + i64::from(s), ng + 1 - ki + i64::from(s)))
        else {
            continue;
        };
        let ln_mag = f64::from(k - 1) * ln_two_s + f64::from(k) * ln_eta + ln_outer_ratio
            - ln_gamma_real(f64::from(k))
            - ln_gamma_real(f64::from(k) + 1.0)
            + ln_a;
        let sign = if sk.sigma < 0.0 && (k - 1) % 2 == 1 { -1.0 } else { 1.0 };
        sum.add(sign * ln_mag.exp());
    }
    sum.acc
}

/// Infinity-side sum (points `LL`, `RR`):
///
/// ```text
/// sum_{k=0}^{n_gamma-1} sigma^k (2 sqrt_eps)^{k+1} / (k! (k+1)!) * eta^k
///        * Gamma(n_gamma+1)/Gamma(n_gamma-k) * A_k,
/// A_k = sum_{s=0}^{k} C(k,s) Gamma(n_beta+1+s)/Gamma(n_beta-k+s) W^s.
/// ```
fn infinity_sum(r: DoubleResonance, sk: &Skeleton, two_s: f64) -> f64 {
    let nb = i64::from(r.n_beta);
    let ng = i64::from(r.n_gamma);
    let ln_two_s = two_s.ln();
    let ln_eta = sk.eta.ln();
    let ln_w = sk.w.ln();
    let mut sum = Kahan::new();
    for k in 0..r.n_gamma {
        let ki = i64::from(k);
        let Some(ln_outer_ratio) = ln_gamma_ratio_int(ng + 1, ng - ki) else { continue };
        let Some(ln_a) =
            ln_inner_sum(k, ln_w, |s| ln_gamma_ratio_int(nb + 1 + i64::from(s), nb - ki + i64::from(s)))
        else {
            continue;
        };
        let ln_mag = f64::from(k + 1) * ln_two_s + f64::from(k) * ln_eta + ln_outer_ratio
            - ln_gamma_real(f64::from(k) + 1.0)
            - ln_gamma_real(f64::from(k) + 2.0)
            + ln_a;
        let sign = if sk.sigma < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        sum.add(sign * ln_mag.exp());
    }
    sum.acc
}

/// The logarithmic coefficient `d` at one of the four points.
///
/// Requires that `(p, e)` actually realize the stated resonance `r`
/// (checked through [`classify_resonance`]).  At the two non-logarithmic
/// points of the type the result is exactly zero, as is the whole
/// coefficient when `gamma1 = gamma2`.
pub fn d_coefficient(
    p: &Params,
    e: &Epsilon,
    r: DoubleResonance,
    point: PointId,
) -> Result<Complex64, UnfoldError> {
    gate(p, e, r)?;
    let zero = Complex64::new(0.0, 0.0);
    if point != r.kind.origin_log_point() && point != r.kind.infinity_log_point() {
        return Ok(zero);
    }
    if p.gamma_diff().norm() == 0.0 || r.n_gamma == 0 {
        // every type's formula degenerates to 0 with no gamma difference
        return Ok(zero);
    }
    let sk = skeleton(r.kind, e);
    let s = e.sqrt_eps().re;
    let eps = s * s;
    let two_s = 2.0 * s;
    if point.merges_into_origin() {
        let sum = origin_sum(r, &sk, two_s);
        let w_pow = sk.w.powi(r.n_gamma as i32);
        let sign = match r.kind {
            ResonanceKind::A1 | ResonanceKind::A3 => -1.0,
            ResonanceKind::A2 | ResonanceKind::A4 => 1.0,
        };
        Ok(Complex64::new(sign * f64::from(r.n_gamma) * w_pow * sum, 0.0))
    } else {
        let sum = infinity_sum(r, &sk, two_s);
        let w_pow = sk.w.powi(r.n_beta as i32);
        // prefactor taken verbatim: 2 sqrt_eps over the signed beta
        // difference of the type, with sign +1 for A1/A3 and -1 for A2/A4
        let signed_bd = match r.kind {
            ResonanceKind::A1 | ResonanceKind::A2 => p.beta_diff(),
            ResonanceKind::A3 | ResonanceKind::A4 => -p.beta_diff(),
        };
        let sign = match r.kind {
            ResonanceKind::A1 | ResonanceKind::A3 => 1.0,
            ResonanceKind::A2 | ResonanceKind::A4 => -1.0,
        };
        Ok(sign * two_s / signed_bd * w_pow / (1.0 - eps * eps) * sum)
    }
}

/// Monodromy decomposition at the given point: exponents from the local
/// data, `d` from [`d_coefficient`].
pub fn monodromy_decomp(
    p: &Params,
    e: &Epsilon,
    r: DoubleResonance,
    point: PointId,
) -> Result<MonodromyDecomp, UnfoldError> {
    let d = d_coefficient(p, e, r, point)?;
    let rho = char_exponents(p, e).at(point);
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let e1 = (two_pi_i * rho.0).exp();
    let e2 = (two_pi_i * (rho.1 - 1.0)).exp();
    Ok(MonodromyDecomp { point, rho, exponent_part: Mat2::diag(e1, e2), d })
}

/// The unipotent factor `exp(2 pi i T) = [[1, 2 pi i d], [0, 1]]` of the
/// monodromy at the given point.
pub fn unfolded_stokes(
    p: &Params,
    e: &Epsilon,
    r: DoubleResonance,
    point: PointId,
) -> Result<Mat2, UnfoldError> {
    let d = d_coefficient(p, e, r, point)?;
    Ok(Mat2::upper_unipotent(Complex64::new(0.0, 2.0 * PI) * d))
}

/// The `eps -> 0` limits `(lim d_origin, lim d_infinity)` of the
/// logarithmic coefficients: `(-(gamma2-gamma1) S, +(gamma2-gamma1) S)`.
/// The two limits are exact negatives of each other.
pub fn limit_closed_form(p: &Params) -> Result<(Complex64, Complex64), UnfoldError> {
    let s = bessel_sum_S(p, 1e-15)?;
    let lim_origin = -p.gamma_diff() * s;
    Ok((lim_origin, -lim_origin))
}

/// Runs the convergence experiment for one parameter-sign case: for
/// each `n` the resonant value `sqrt_eps = |beta2-beta1|/(2n)` is formed,
/// the coefficients at the two logarithmic points are evaluated, and
/// `|2 pi i d - mu|` is recorded against the matching Stokes multiplier.
///
/// Requires real nonzero `beta2-beta1`, `gamma2-gamma1` with the sign
/// pattern of `case`, and `(gamma2-gamma1)/(beta2-beta1)` such that every
/// listed `n` makes both resonance ratios integers.
pub fn limit_experiment(
    p: &Params,
    case: MainCase,
    n_list: &[u32],
) -> Result<ConvergenceTable, UnfoldError> {
    let bd = p.beta_diff();
    let gd = p.gamma_diff();
    let incompatible = |why: String| UnfoldError::IncompatibleParameters(why);
    if bd.im.abs() > 1e-12 * bd.norm() || gd.im.abs() > 1e-12 * gd.norm().max(1.0) {
        return Err(incompatible("beta and gamma differences must be real".into()));
    }
    if gd.norm() == 0.0 {
        return Err(incompatible("gamma1 = gamma2 has identity Stokes matrices and no direction at infinity".into()));
    }
    let (sb, sg) = case.signs();
    if bd.re * sb <= 0.0 || gd.re * sg <= 0.0 {
        return Err(incompatible(format!(
            "case {case} needs sign({{beta2-beta1, gamma2-gamma1}}) = ({sb}, {sg})"
        )));
    }
    let kind = case.resonance_kind();
    let mu_origin = stokes_origin(p, 1e-14)?.mu;
    let mu_infinity = stokes_infinity(p, 1e-14)?.mu;
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut rows = Vec::with_capacity(2 * n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(incompatible("n = 0 is not a resonance".into()));
        }
        let s_n = bd.re.abs() / (2.0 * f64::from(n));
        let e = Epsilon::from_real(s_n)?;
        let r = classify_resonance(p, &e, GATE_INT_TOL).ok_or_else(|| {
            incompatible(format!("n = {n} does not make (gamma2-gamma1)/(2 sqrt_eps) an integer"))
        })?;
        if r.kind != kind {
            return Err(UnfoldError::WrongResonance { stated: r, detected: Some(r) });
        }
        for point in [kind.origin_log_point(), kind.infinity_log_point()] {
            let d = d_coefficient(p, &e, r, point)?;
            let target = if point.merges_into_origin() { mu_origin } else { mu_infinity };
            let abs_err = (two_pi_i * d - target).norm();
            rows.push(ConvergenceRow { n, sqrt_eps: s_n, point, d, abs_err });
        }
    }
    Ok(ConvergenceTable { case, mu_origin, mu_infinity, rows })
}

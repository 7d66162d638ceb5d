//! Independent brute-force verifiers for the closed-form monodromy data.
//!
//! Everything here is built from the explicit first solutions of the two
//! first-order factors of the perturbed equation,
//!
//! ```text
//! Phi_1(x) = (x-s)^{beta1/2s} (x+s)^{-beta1/2s} ((1+sx)/(1-sx))^{gamma1/2s},
//! Phi_2(x) = (x-s)^{beta2/2s-1} (x+s)^{-beta2/2s-1} ((1+sx)/(1-sx))^{gamma2/2s},
//! ```
//!
//! with `s = sqrt(eps)`, and from nothing else: no resonance closed forms
//! enter.  Three routes to the same monodromy data:
//!
//! * [`residue_contour`]: `d_j = (1/2 pi i) closed-integral Phi_2/Phi_1` on a
//!   circle around the point, by the trapezoid rule (spectrally accurate for
//!   a single-valued analytic integrand).
//! * [`phi12_quadrature`]: the second fundamental entry
//!   `Phi_12(x) = Phi_1(x) * integral of Phi_2/Phi_1` by adaptive path
//!   quadrature from the distinguished non-logarithmic base point.
//! * [`monodromy_ode`]: direct continuation of the triangular system
//!   `Y' = [[a1, 1], [0, a2]] Y` around polygonal loops with an embedded
//!   Dormand-Prince 5(4) integrator, returning `Y0^-1 Y_end`.
//!
//! Branch handling: each of the four linear factors gets its own
//! logarithm with the cut ray pointing away from the integration path
//! (for a convex segment the ray from an off-path anchor through its
//! nearest path point, extended backwards, never meets the path).  All
//! three solution values at a point are assembled from one shared set of
//! factor logarithms, so `Phi_2/Phi_1` equals the quadrature integrand
//! exactly and the measured monodromy is comparable to the closed-form
//! decomposition entry by entry, not merely up to conjugation.
//!
//! All functions are pure; independent contours and loops can run on
//! separate threads freely.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::mat2::Mat2;
use crate::model::{
    perturbed_coefficients, Epsilon, ModelError, Params, PerturbedEquation, PointId,
    SingularPoints,
};
use crate::quad::{self, QuadError};
use crate::specfun::{near_integer, principal_arg};

/// Loop vertices and quadrature paths keep at least this fraction of the
/// smallest pairwise singular distance away from every singular point.
pub const MIN_CLEARANCE_FRACTION: f64 = 1e-3;

/// Fewest trapezoid nodes accepted by [`residue_contour`].
pub const MIN_CONTOUR_NODES: usize = 256;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("loop is not closed (or has fewer than two edges)")]
    LoopNotClosed,
    #[error("loop vertex {vertex} too close to singular point {point}")]
    VertexTooClose { vertex: Complex64, point: PointId },
    #[error("winding number around {point} is {got}, expected {want}")]
    WrongWinding { point: PointId, want: i32, got: i32 },
    #[error("frame base and loop base differ")]
    BaseMismatch,
    #[error("path passes through (or too close to) singular point {point}")]
    PathThroughSingularity { point: PointId },
    #[error("integrand endpoint exponent {exponent} is not integrable at the base point")]
    NonIntegrableEndpoint { exponent: Complex64 },
    #[error("contour integrand is multivalued: endpoint mismatch {mismatch:.3e} (non-integer exponent difference, not a resonance)")]
    MultivaluedIntegrand { mismatch: f64 },
    #[error("{n} contour nodes requested, need at least {MIN_CONTOUR_NODES}")]
    TooFewNodes { n: usize },
    #[error("contour circle around {point} touches or encloses another singular point")]
    BadCircle { point: PointId },
    #[error("step size collapsed near {at} during ODE continuation")]
    StepFailure { at: Complex64 },
    #[error("frame matrix is singular or non-finite")]
    DegenerateFrame,
    #[error("quadrature stalled at error {achieved:.3e} (requested {requested:.3e})")]
    QuadratureStalled { achieved: f64, requested: f64 },
    #[error("non-finite integrand value at parameter {at}")]
    NonFiniteIntegrand { at: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<QuadError> for OracleError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::Stalled { achieved, requested } => {
                OracleError::QuadratureStalled { achieved, requested }
            }
            QuadError::NonFinite { at } => OracleError::NonFiniteIntegrand { at },
        }
    }
}

/// Which pair of singular points the frame is anchored to.  The origin
/// frame integrates the `Phi_12` path from `+-sqrt(eps)`, the infinity
/// frame from `+-1/sqrt(eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Origin,
    Infinity,
}

/// Fundamental matrix value `Y0 = [[Phi_1, Phi_12], [0, Phi_2]]` at a base
/// point, the reference frame for loop monodromy.
///
/// Invariant: `det Y0 != 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalFrame {
    pub base: Complex64,
    pub y0: Mat2,
    pub which: FrameKind,
}

/// The three solution values at a point, assembled from one shared set of
/// factor logarithms (so `phi2/phi1` equals the quadrature integrand at the
/// point exactly).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionTriple {
    pub phi1: Complex64,
    pub phi2: Complex64,
    pub phi12: Complex64,
}

/// Logarithm with the branch cut along the ray `arg w = psi`:
/// `Im(log_ray(w, psi))` lies in `(psi - 2 pi, psi]`.
fn log_ray(w: Complex64, psi: f64) -> Complex64 {
    let t0 = principal_arg(w);
    let k = ((psi - t0) / (2.0 * PI)).floor();
    Complex64::new(w.norm().ln(), t0 + 2.0 * PI * k)
}

/// The four linear factors shared by `Phi_1`, `Phi_2` and their ratio:
/// `w_0 = z - s`, `w_1 = z + s`, `w_2 = 1 + s z`, `w_3 = 1 - s z`, with the
/// exponent vector of each function.  `w_2` and `w_3` vanish at `-1/s` and
/// `+1/s`; their z-plane cut directions pick up `arg(+-s)` in the w-plane.
struct Factors {
    s: Complex64,
    anchors: [Complex64; 4],
    arg_offsets: [f64; 4],
    phi1_exp: [Complex64; 4],
    phi2_exp: [Complex64; 4],
    ratio_exp: [Complex64; 4],
}

fn factors(p: &Params, e: &Epsilon) -> Factors {
    let s = e.sqrt_eps();
    let two_s = 2.0 * s;
    let one = Complex64::new(1.0, 0.0);
    let b1h = p.beta1 / two_s;
    let b2h = p.beta2 / two_s;
    let g1h = p.gamma1 / two_s;
    let g2h = p.gamma2 / two_s;
    let delta = p.beta_diff() / two_s;
    let g = p.gamma_diff() / two_s;
    Factors {
        s,
        anchors: [s, -s, -one / s, one / s],
        arg_offsets: [0.0, 0.0, principal_arg(s), principal_arg(-s)],
        phi1_exp: [b1h, -b1h, g1h, -g1h],
        phi2_exp: [b2h - one, -b2h - one, g2h, -g2h],
        ratio_exp: [delta - one, -delta - one, g, -g],
    }
}

impl Factors {
    fn w(&self, j: usize, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match j {
            0 => z - self.s,
            1 => z + self.s,
            2 => one + self.s * z,
            _ => one - self.s * z,
        }
    }

    fn logs(&self, z: Complex64, cuts: &[f64; 4]) -> [Complex64; 4] {
        std::array::from_fn(|j| log_ray(self.w(j, z), cuts[j]))
    }

    fn eval(exps: &[Complex64; 4], logs: &[Complex64; 4]) -> Complex64 {
        (exps[0] * logs[0] + exps[1] * logs[1] + exps[2] * logs[2] + exps[3] * logs[3]).exp()
    }

    /// Factor index whose anchor sits at the given singular point.
    fn factor_of(point: PointId) -> usize {
        match point {
            PointId::R => 0,
            PointId::L => 1,
            PointId::LL => 2,
            PointId::RR => 3,
        }
    }
}

/// Closest point of the segment `[p1, p2]` to `a`.
fn segment_nearest(a: Complex64, p1: Complex64, p2: Complex64) -> Complex64 {
    let d = p2 - p1;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return p1;
    }
    let t = ((a - p1).re * d.re + (a - p1).im * d.im) / len2;
    p1 + d * t.clamp(0.0, 1.0)
}

fn segment_distance(a: Complex64, p1: Complex64, p2: Complex64) -> f64 {
    (a - segment_nearest(a, p1, p2)).norm()
}

/// Branch-cut directions keeping every factor continuous on the segment
/// `[p1, p2]`: each off-path anchor's ray points from its nearest segment
/// point onward through the anchor (never re-entering the segment); the
/// base anchor, which is the segment's start, gets the ray continuing
/// backwards out of the segment.
fn cut_directions(f: &Factors, p1: Complex64, p2: Complex64, base_factor: Option<usize>) -> [f64; 4] {
    std::array::from_fn(|j| {
        let dir = if base_factor == Some(j) {
            p1 - p2
        } else {
            let a = f.anchors[j];
            a - segment_nearest(a, p1, p2)
        };
        principal_arg(dir) + f.arg_offsets[j]
    })
}

// ---------------------------------------------------------------------------
// loops

/// Closed polygonal loop.  `vertices[0]` is the base; the last vertex
/// repeats it.  `enclosed` lists the singular points the loop winds around
/// once (counterclockwise); around every other point the winding is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub vertices: Vec<Complex64>,
    pub enclosed: Vec<PointId>,
}

impl Loop {
    pub fn base(&self) -> Complex64 {
        self.vertices[0]
    }

    fn square_corners(points: &SingularPoints, target: PointId) -> [Complex64; 4] {
        let center = points.at(target);
        let gap = PointId::ALL
            .iter()
            .filter(|&&q| q != target)
            .map(|&q| (points.at(q) - center).norm())
            .fold(f64::INFINITY, f64::min);
        std::array::from_fn(|k| {
            center + Complex64::from_polar(0.5 * gap, PI / 4.0 + k as f64 * PI / 2.0)
        })
    }

    /// Counterclockwise square around one singular point, corners at half
    /// the gap to its nearest neighbour, based at the first corner.
    pub fn square_around(points: &SingularPoints, target: PointId) -> Loop {
        let c = Self::square_corners(points, target);
        Loop { vertices: vec![c[0], c[1], c[2], c[3], c[0]], enclosed: vec![target] }
    }

    /// The same square reached by a straight spur from `base` and left the
    /// same way, so loops around different points share a base and compose.
    pub fn square_around_from(points: &SingularPoints, target: PointId, base: Complex64) -> Loop {
        let c = Self::square_corners(points, target);
        Loop { vertices: vec![base, c[0], c[1], c[2], c[3], c[0], base], enclosed: vec![target] }
    }

    /// Concatenation: traverse `self`, then `other`.  Both must start at
    /// the same base.  Continuation order makes the monodromy of the result
    /// the reversed product `M(other) * M(self)`.
    pub fn compose(&self, other: &Loop) -> Result<Loop, OracleError> {
        let b = self.base();
        if (b - other.base()).norm() > 1e-12 * (1.0 + b.norm()) {
            return Err(OracleError::BaseMismatch);
        }
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices[1..]);
        let mut enclosed = self.enclosed.clone();
        for &pt in &other.enclosed {
            if !enclosed.contains(&pt) {
                enclosed.push(pt);
            }
        }
        Ok(Loop { vertices, enclosed })
    }

    /// Winding number (in revolutions) around a point.  Per edge the arg
    /// increment of `z - around` is the principal argument of the endpoint
    /// ratio: a straight segment avoiding the point subtends less than pi.
    pub fn winding_number(&self, around: Complex64) -> f64 {
        let mut acc = 0.0;
        for edge in self.vertices.windows(2) {
            acc += principal_arg((edge[1] - around) / (edge[0] - around));
        }
        acc / (2.0 * PI)
    }

    /// Checks closure, vertex and edge clearance, and the winding numbers
    /// promised by `enclosed`.
    pub fn validate(&self, points: &SingularPoints) -> Result<(), OracleError> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(OracleError::LoopNotClosed);
        }
        let b = self.vertices[0];
        if (self.vertices[n - 1] - b).norm() > 1e-12 * (1.0 + b.norm()) {
            return Err(OracleError::LoopNotClosed);
        }
        let min_dist = MIN_CLEARANCE_FRACTION * points.min_gap();
        for &v in &self.vertices {
            for pt in PointId::ALL {
                if (v - points.at(pt)).norm() < min_dist {
                    return Err(OracleError::VertexTooClose { vertex: v, point: pt });
                }
            }
        }
        for edge in self.vertices.windows(2) {
            for pt in PointId::ALL {
                if segment_distance(points.at(pt), edge[0], edge[1]) < min_dist {
                    return Err(OracleError::PathThroughSingularity { point: pt });
                }
            }
        }
        for pt in PointId::ALL {
            let want = i32::from(self.enclosed.contains(&pt));
            let got = self.winding_number(points.at(pt)).round() as i32;
            if got != want {
                return Err(OracleError::WrongWinding { point: pt, want, got });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// contour residues

/// `(1/2 pi i) closed-integral Phi_2/Phi_1 dz` on the circle of the given
/// radius around the singular point, by the trapezoid rule with `n_nodes`
/// nodes (`>= 256`).
///
/// The integrand is continued factor-log by factor-log around the circle;
/// if after a full turn it fails to return to its start value the exponent
/// difference is not an integer (not a resonance) and the integral is not
/// well defined: [`OracleError::MultivaluedIntegrand`].
pub fn residue_contour(
    p: &Params,
    e: &Epsilon,
    point: PointId,
    radius: f64,
    n_nodes: usize,
) -> Result<Complex64, OracleError> {
    if n_nodes < MIN_CONTOUR_NODES {
        return Err(OracleError::TooFewNodes { n: n_nodes });
    }
    let pts = e.points();
    let center = pts.at(point);
    if !radius.is_finite() || radius <= 0.0 {
        return Err(OracleError::BadCircle { point });
    }
    for other in PointId::ALL {
        if other == point {
            continue;
        }
        let dist = (pts.at(other) - center).norm();
        // the circle must neither graze nor enclose any other point
        if dist < radius || (dist - radius).abs() < 0.05 * radius {
            return Err(OracleError::BadCircle { point });
        }
    }
    let f = factors(p, e);
    let z0 = center + radius;
    let mut logs: [Complex64; 4] = std::array::from_fn(|j| f.w(j, z0).ln());
    let first = Factors::eval(&f.ratio_exp, &logs);
    let mut prev = z0;
    let mut acc = KahanC::new();
    for k in 0..n_nodes {
        let t = 2.0 * PI * k as f64 / n_nodes as f64;
        let zk = center + Complex64::from_polar(radius, t);
        if k > 0 {
            for j in 0..4 {
                logs[j] += (f.w(j, zk) / f.w(j, prev)).ln();
            }
            prev = zk;
        }
        acc.add(Factors::eval(&f.ratio_exp, &logs) * Complex64::from_polar(radius, t));
    }
    for j in 0..4 {
        logs[j] += (f.w(j, z0) / f.w(j, prev)).ln();
    }
    let closed = Factors::eval(&f.ratio_exp, &logs);
    let scale = first.norm().max(closed.norm()).max(f64::MIN_POSITIVE);
    let mismatch = (closed - first).norm() / scale;
    if mismatch > 1e-6 {
        return Err(OracleError::MultivaluedIntegrand { mismatch });
    }
    Ok(acc.value() / n_nodes as f64)
}

/// Compensated complex accumulator for long node sums.
struct KahanC {
    acc: Complex64,
    comp: Complex64,
}

impl KahanC {
    fn new() -> Self {
        KahanC { acc: Complex64::new(0.0, 0.0), comp: Complex64::new(0.0, 0.0) }
    }

    fn add(&mut self, x: Complex64) {
        let y = x - self.comp;
        let t = self.acc + y;
        self.comp = (t - self.acc) - y;
        self.acc = t;
    }

    fn value(&self) -> Complex64 {
        self.acc
    }
}

// ---------------------------------------------------------------------------
// path quadrature for the second fundamental entry

/// The frame's quadrature base: the distinguished point whose endpoint
/// exponent of `Phi_2/Phi_1` is integrable.  Defaults to `x_R` (origin) or
/// `x_RR` (infinity) and falls back to the mirror point; when neither
/// endpoint is integrable the frame has no convergent base integral.
fn quadrature_base(f: &Factors, pts: &SingularPoints, which: FrameKind) -> Result<PointId, OracleError> {
    let _ = pts;
    let (first, second) = match which {
        FrameKind::Origin => (PointId::R, PointId::L),
        FrameKind::Infinity => (PointId::RR, PointId::LL),
    };
    let integrable = |pt: PointId| f.ratio_exp[Factors::factor_of(pt)].re > -1.0 + 1e-6;
    if integrable(first) {
        Ok(first)
    } else if integrable(second) {
        Ok(second)
    } else {
        Err(OracleError::NonIntegrableEndpoint { exponent: f.ratio_exp[Factors::factor_of(first)] })
    }
}

fn validate_path(
    pts: &SingularPoints,
    base_id: PointId,
    b: Complex64,
    x: Complex64,
) -> Result<(), OracleError> {
    let min_dist = MIN_CLEARANCE_FRACTION * pts.min_gap();
    for pt in PointId::ALL {
        if (x - pts.at(pt)).norm() < min_dist {
            return Err(OracleError::PathThroughSingularity { point: pt });
        }
        // the base point itself starts the path; every other singular point
        // must stay clear of the whole segment
        if pt != base_id && segment_distance(pts.at(pt), b, x) < min_dist {
            return Err(OracleError::PathThroughSingularity { point: pt });
        }
    }
    Ok(())
}

/// `integral of Phi_2/Phi_1` along the straight segment from the singular
/// base `b` to `x`, with the endpoint substitution `z = b + (x-b) u^m`
/// smoothing a non-integer integrable exponent; at resonance the exponent
/// is a nonnegative integer and `m = 1`.
fn base_integral(
    f: &Factors,
    b: Complex64,
    x: Complex64,
    c_exp: Complex64,
    cuts: &[f64; 4],
    tol: f64,
) -> Result<Complex64, OracleError> {
    let m: i32 = match near_integer(c_exp, 1e-9) {
        Some(k) if k >= 0 => 1,
        _ => ((2.0 / (c_exp.re + 1.0)).ceil() as i32).clamp(1, 64),
    };
    let span = x - b;
    let mf = f64::from(m);
    let integrand = |u: f64| {
        let z = b + span * u.powi(m);
        let logs = f.logs(z, cuts);
        Factors::eval(&f.ratio_exp, &logs) * span * mf * u.powi(m - 1)
    };
    let (value, _err) = quad::adaptive_segment(&integrand, 0.0, 1.0, tol)?;
    Ok(value)
}

/// `Phi_1`, `Phi_2` and `Phi_12 = Phi_1 * integral(Phi_2/Phi_1)` at `x`,
/// the integral taken from the frame's base point along the straight
/// segment.  All three values share one branch configuration.
pub fn solution_triple(
    p: &Params,
    e: &Epsilon,
    x: Complex64,
    which: FrameKind,
    tol: f64,
) -> Result<SolutionTriple, OracleError> {
    let f = factors(p, e);
    let pts = e.points();
    let base_id = quadrature_base(&f, &pts, which)?;
    let b = pts.at(base_id);
    validate_path(&pts, base_id, b, x)?;
    let base_factor = Factors::factor_of(base_id);
    let cuts = cut_directions(&f, b, x, Some(base_factor));
    let c_exp = f.ratio_exp[base_factor];
    if c_exp.re <= -1.0 + 1e-6 {
        return Err(OracleError::NonIntegrableEndpoint { exponent: c_exp });
    }
    let integral = base_integral(&f, b, x, c_exp, &cuts, tol)?;
    let logs = f.logs(x, &cuts);
    let phi1 = Factors::eval(&f.phi1_exp, &logs);
    let phi2 = Factors::eval(&f.phi2_exp, &logs);
    Ok(SolutionTriple { phi1, phi2, phi12: phi1 * integral })
}

/// The second fundamental entry `Phi_12(x)` by path quadrature from the
/// frame's base point (absolute quadrature tolerance `tol`).
pub fn phi12_quadrature(
    p: &Params,
    e: &Epsilon,
    x: Complex64,
    which: FrameKind,
    tol: f64,
) -> Result<Complex64, OracleError> {
    Ok(solution_triple(p, e, x, which, tol)?.phi12)
}

/// Builds the fundamental frame `Y0 = [[Phi_1, Phi_12], [0, Phi_2]]` at the
/// given base point.
pub fn fundamental_frame(
    p: &Params,
    e: &Epsilon,
    base: Complex64,
    which: FrameKind,
    tol: f64,
) -> Result<FundamentalFrame, OracleError> {
    let t = solution_triple(p, e, base, which, tol)?;
    let zero = Complex64::new(0.0, 0.0);
    let y0 = Mat2::new(t.phi1, t.phi12, zero, t.phi2);
    let det = y0.det();
    if !(det.re.is_finite() && det.im.is_finite()) || det.norm() == 0.0 {
        return Err(OracleError::DegenerateFrame);
    }
    Ok(FundamentalFrame { base, y0, which })
}

// ---------------------------------------------------------------------------
// direct ODE continuation

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] =
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// b - b*: the embedded fourth-order error weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

fn mat_lin(base: &Mat2, h: f64, coeffs: &[f64], ks: &[Mat2]) -> Mat2 {
    let mut out = *base;
    for (c, k) in coeffs.iter().zip(ks) {
        if *c == 0.0 {
            continue;
        }
        let ch = Complex64::new(h * c, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] += ch * k.e[i][j];
            }
        }
    }
    out
}

/// `d/dt Y = d * A(v + t d) * Y` with `A = [[a1, 1], [0, a2]]`.
fn edge_rhs(eq: &PerturbedEquation, v: Complex64, d: Complex64, t: f64, y: &Mat2) -> Result<Mat2, ModelError> {
    let x = v + d * t;
    let a1 = eq.a1(x)?;
    let a2 = eq.a2(x)?;
    Ok(Mat2::new(
        d * (a1 * y.e[0][0] + y.e[1][0]),
        d * (a1 * y.e[0][1] + y.e[1][1]),
        d * (a2 * y.e[1][0]),
        d * (a2 * y.e[1][1]),
    ))
}

fn integrate_edge(
    eq: &PerturbedEquation,
    v1: Complex64,
    v2: Complex64,
    y_in: Mat2,
    tol: f64,
) -> Result<Mat2, OracleError> {
    let d = v2 - v1;
    if d.norm() == 0.0 {
        return Ok(y_in);
    }
    let mut y = y_in;
    let mut t = 0.0_f64;
    let mut h = 0.1_f64;
    let h_min = 1e-12;
    while t < 1.0 {
        h = h.min(1.0 - t);
        let k1 = edge_rhs(eq, v1, d, t, &y)?;
        let k2 = edge_rhs(eq, v1, d, t + C[0] * h, &mat_lin(&y, h, &A2, &[k1]))?;
        let k3 = edge_rhs(eq, v1, d, t + C[1] * h, &mat_lin(&y, h, &A3, &[k1, k2]))?;
        let k4 = edge_rhs(eq, v1, d, t + C[2] * h, &mat_lin(&y, h, &A4, &[k1, k2, k3]))?;
        let k5 = edge_rhs(eq, v1, d, t + C[3] * h, &mat_lin(&y, h, &A5, &[k1, k2, k3, k4]))?;
        let k6 = edge_rhs(eq, v1, d, t + C[4] * h, &mat_lin(&y, h, &A6, &[k1, k2, k3, k4, k5]))?;
        let y5 = mat_lin(&y, h, &B, &[k1, k2, k3, k4, k5, k6]);
        let k7 = edge_rhs(eq, v1, d, t + h, &y5)?;
        let err = mat_lin(&Mat2::zero(), h, &E, &[k1, k2, k3, k4, k5, k6, k7]).norm_max();
        let scale = tol * (1.0 + y.norm_max().max(y5.norm_max()));
        let ratio = err / scale;
        if ratio <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if ratio > 0.0 { 0.9 * ratio.powf(-0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
        if h < h_min && t < 1.0 {
            return Err(OracleError::StepFailure { at: v1 + d * t });
        }
    }
    Ok(y)
}

/// Continues `Y` from the frame value around the loop with an embedded
/// Dormand-Prince 5(4) integrator and returns the monodromy `Y0^-1 Y_end`.
/// The loop must validate and start at the frame's base.
pub fn monodromy_ode(
    p: &Params,
    e: &Epsilon,
    lp: &Loop,
    frame: &FundamentalFrame,
    tol: f64,
) -> Result<Mat2, OracleError> {
    let pts = e.points();
    lp.validate(&pts)?;
    if (frame.base - lp.base()).norm() > 1e-12 * (1.0 + lp.base().norm()) {
        return Err(OracleError::BaseMismatch);
    }
    let eq = perturbed_coefficients(p, e);
    let tol = tol.max(1e-13);
    let mut y = frame.y0;
    for edge in lp.vertices.windows(2) {
        y = integrate_edge(&eq, edge[0], edge[1], y, tol)?;
    }
    let y0_inv = frame.y0.inverse().ok_or(OracleError::DegenerateFrame)?;
    Ok(y0_inv * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{char_exponents, classify_resonance, DoubleResonance};
    use crate::unfold::{d_coefficient, monodromy_decomp};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Generic A1 resonance with n_beta = n_gamma = 1 at sqrt_eps = 0.3:
    /// singular points at +-0.3 and +-10/3.
    fn a1_fixture() -> (Params, Epsilon, DoubleResonance) {
        let s = 0.3;
        let p = Params::new(c(0.17, 0.0), c(0.77, 0.0), c(-0.12, 0.0), c(-0.72, 0.0)).unwrap();
        let e = Epsilon::from_real(s).unwrap();
        let r = classify_resonance(&p, &e, 1e-8).unwrap();
        assert_eq!((r.n_beta, r.n_gamma), (1, 1));
        (p, e, r)
    }

    #[test]
    fn residue_matches_closed_form_at_both_log_points() {
        let (p, e, r) = a1_fixture();
        for point in [PointId::L, PointId::LL] {
            let want = d_coefficient(&p, &e, r, point).unwrap();
            let got = residue_contour(&p, &e, point, 0.3, 1024).unwrap();
            assert!(
                (got - want).norm() < 1e-10 * want.norm(),
                "{point}: contour {got} vs closed form {want}"
            );
        }
    }

    #[test]
    fn residue_is_radius_independent() {
        let (p, e, _) = a1_fixture();
        let r1 = residue_contour(&p, &e, PointId::L, 0.3, 1024).unwrap();
        let r2 = residue_contour(&p, &e, PointId::L, 0.15, 1024).unwrap();
        assert!((r1 - r2).norm() < 1e-10 * r1.norm().max(1.0));
    }

    #[test]
    fn residue_vanishes_where_integrand_is_analytic() {
        // at A1 the exponents at x_R and x_RR are nonnegative integers, so
        // the integrand is analytic there and Cauchy gives zero
        let (p, e, _) = a1_fixture();
        for point in [PointId::R, PointId::RR] {
            let got = residue_contour(&p, &e, point, 0.3, 1024).unwrap();
            assert!(got.norm() < 1e-12, "{point}: {got}");
        }
    }

    #[test]
    fn residue_vanishes_at_log_point_for_equal_gammas() {
        // gamma1 = gamma2 with beta difference 4s: A1 with n_gamma = 0
        let s = 0.25;
        let p = Params::new(c(0.1, 0.0), c(0.1 + 4.0 * s, 0.0), c(0.4, 0.0), c(0.4, 0.0)).unwrap();
        let e = Epsilon::from_real(s).unwrap();
        let r = classify_resonance(&p, &e, 1e-8).unwrap();
        assert_eq!(r.n_gamma, 0);
        let log_point = r.kind.origin_log_point();
        let got = residue_contour(&p, &e, log_point, 0.2, 1024).unwrap();
        assert!(got.norm() < 1e-12, "{got}");
    }

    #[test]
    fn residue_rejects_non_resonant_exponents() {
        let (p, _, _) = a1_fixture();
        let e = Epsilon::from_real(0.31).unwrap();
        match residue_contour(&p, &e, PointId::L, 0.3, 1024) {
            Err(OracleError::MultivaluedIntegrand { mismatch }) => assert!(mismatch > 1e-6),
            other => panic!("expected multivalued-integrand error, got {other:?}"),
        }
    }

    #[test]
    fn residue_input_validation() {
        let (p, e, _) = a1_fixture();
        assert!(matches!(
            residue_contour(&p, &e, PointId::L, 0.3, 64),
            Err(OracleError::TooFewNodes { n: 64 })
        ));
        // radius 0.7 would enclose x_R from x_L (gap 0.6)
        assert!(matches!(
            residue_contour(&p, &e, PointId::L, 0.7, 1024),
            Err(OracleError::BadCircle { .. })
        ));
        // radius ~ gap grazes the neighbour
        assert!(matches!(
            residue_contour(&p, &e, PointId::L, 0.61, 1024),
            Err(OracleError::BadCircle { .. })
        ));
    }

    #[test]
    fn phi12_satisfies_its_defining_equation() {
        // d/dx Phi_12 - a1 Phi_12 = Phi_2, derivative by a five-point
        // stencil of the quadrature values
        let (p, e, _) = a1_fixture();
        let x0 = c(0.45, 0.25);
        let h = 0.0015;
        let tol = 1e-12;
        let f = |x: Complex64| phi12_quadrature(&p, &e, x, FrameKind::Origin, tol).unwrap();
        let d_num = (-f(x0 + 2.0 * h) + 8.0 * f(x0 + h) - 8.0 * f(x0 - h) + f(x0 - 2.0 * h))
            / (12.0 * h);
        let triple = solution_triple(&p, &e, x0, FrameKind::Origin, tol).unwrap();
        let a1 = perturbed_coefficients(&p, &e).a1(x0).unwrap();
        let residual = d_num - a1 * triple.phi12 - triple.phi2;
        let scale = triple.phi2.norm() + (a1 * triple.phi12).norm() + d_num.norm();
        assert!(residual.norm() < 1e-8 * scale, "residual {:e}", residual.norm() / scale);
    }

    #[test]
    fn phi12_approaches_elementary_form_as_eps_shrinks() {
        // gamma1 = gamma2: the merged-equation entry is
        // e^{gamma1 x - beta2/x}/(beta2 - beta1); the perturbed quadrature
        // value converges to it at rate eps
        let x = c(0.6, 0.0);
        let g = 0.4;
        let target = (g * x - 1.0 / x).exp();
        let err_at = |s: f64| {
            let p = Params::new(c(0.0, 0.0), c(1.0, 0.0), c(g, 0.0), c(g, 0.0)).unwrap();
            let e = Epsilon::from_real(s).unwrap();
            let got = phi12_quadrature(&p, &e, x, FrameKind::Origin, 1e-12).unwrap();
            (got - target).norm() / target.norm()
        };
        let coarse = err_at(0.05);
        let fine = err_at(0.025);
        assert!(coarse < 0.02, "coarse error {coarse:e}");
        assert!(fine < 0.6 * coarse, "no eps-rate improvement: {coarse:e} -> {fine:e}");
    }

    #[test]
    fn frames_from_both_bases_span_the_same_solution_pair() {
        // Phi_12 built from the origin base and from the infinity base may
        // differ only by a constant multiple of Phi_1, i.e. the ratios
        // Phi_12/Phi_1 differ by an x-independent constant
        let (p, e, _) = a1_fixture();
        let tol = 1e-12;
        let r_at = |x: Complex64| {
            let o = solution_triple(&p, &e, x, FrameKind::Origin, tol).unwrap();
            let i = solution_triple(&p, &e, x, FrameKind::Infinity, tol).unwrap();
            i.phi12 / i.phi1 - o.phi12 / o.phi1
        };
        let ra = r_at(c(0.45, 0.25));
        let rb = r_at(c(0.55, 0.35));
        assert!(ra.norm() > 1e-6, "difference degenerately small: {ra}");
        assert!((ra - rb).norm() < 1e-9 * (1.0 + ra.norm()), "{ra} vs {rb}");
    }

    #[test]
    fn empty_loop_returns_identity() {
        let (p, e, _) = a1_fixture();
        let center = c(0.9, 0.0);
        let vertices: Vec<Complex64> = (0..=4)
            .map(|k| center + Complex64::from_polar(0.25, PI / 4.0 + k as f64 * PI / 2.0))
            .collect();
        let lp = Loop { vertices, enclosed: vec![] };
        let frame = fundamental_frame(&p, &e, lp.base(), FrameKind::Origin, 1e-12).unwrap();
        let m = monodromy_ode(&p, &e, &lp, &frame, 1e-10).unwrap();
        assert!(m.max_abs_diff(&Mat2::identity()) < 1e-8);
    }

    #[test]
    fn ode_monodromy_matches_decomposition_at_log_point() {
        let (p, e, r) = a1_fixture();
        let pts = e.points();
        let lp = Loop::square_around(&pts, PointId::L);
        let frame = fundamental_frame(&p, &e, lp.base(), FrameKind::Origin, 1e-12).unwrap();
        let m = monodromy_ode(&p, &e, &lp, &frame, 1e-10).unwrap();
        let want = monodromy_decomp(&p, &e, r, PointId::L).unwrap().monodromy();
        assert!(m.max_abs_diff(&want) < 1e-6, "ODE {m:?} vs closed form {want:?}");
        // first column is the e^{2 pi i rho_1} eigenvector
        let rho1 = char_exponents(&p, &e).at(PointId::L).0;
        let e1 = (Complex64::new(0.0, 2.0 * PI) * rho1).exp();
        assert!(m.e[1][0].norm() < 1e-8);
        assert!((m.e[0][0] - e1).norm() < 1e-6);
        // det equals the product of the two local exponent exponentials
        let det_want = m.e[0][0] * m.e[1][1];
        assert!((m.det() - det_want).norm() < 1e-8 * det_want.norm());
    }

    #[test]
    fn ode_monodromy_is_scalar_at_non_log_point() {
        let (p, e, _) = a1_fixture();
        let pts = e.points();
        let lp = Loop::square_around(&pts, PointId::R);
        let frame = fundamental_frame(&p, &e, lp.base(), FrameKind::Origin, 1e-12).unwrap();
        let m = monodromy_ode(&p, &e, &lp, &frame, 1e-10).unwrap();
        let rho = char_exponents(&p, &e).at(PointId::R);
        let e1 = (Complex64::new(0.0, 2.0 * PI) * rho.0).exp();
        let e2 = (Complex64::new(0.0, 2.0 * PI) * (rho.1 - 1.0)).exp();
        assert!((e1 - e2).norm() < 1e-12, "resonance makes the eigenvalues equal");
        assert!(m.max_abs_diff(&Mat2::diag(e1, e2)) < 1e-6);
    }

    #[test]
    fn composition_reverses_the_product() {
        let (p, e, _) = a1_fixture();
        let pts = e.points();
        let base = c(0.0, 0.9);
        let gl = Loop::square_around_from(&pts, PointId::L, base);
        let gr = Loop::square_around_from(&pts, PointId::R, base);
        let frame = fundamental_frame(&p, &e, base, FrameKind::Origin, 1e-12).unwrap();
        let ml = monodromy_ode(&p, &e, &gl, &frame, 1e-10).unwrap();
        let mr = monodromy_ode(&p, &e, &gr, &frame, 1e-10).unwrap();
        let composed = gl.compose(&gr).unwrap();
        assert_eq!(composed.enclosed.len(), 2);
        let m_both = monodromy_ode(&p, &e, &composed, &frame, 1e-10).unwrap();
        assert!(m_both.max_abs_diff(&(mr * ml)) < 1e-6);
        // mismatched bases refuse to compose
        assert!(matches!(
            gl.compose(&Loop::square_around(&pts, PointId::R)),
            Err(OracleError::BaseMismatch)
        ));
    }

    #[test]
    fn loop_validation_catches_bad_geometry() {
        let (p, e, _) = a1_fixture();
        let pts = e.points();
        let open = Loop { vertices: vec![c(0.9, 0.0), c(0.9, 0.4), c(1.2, 0.2)], enclosed: vec![] };
        assert!(matches!(open.validate(&pts), Err(OracleError::LoopNotClosed)));

        let near = pts.x_r + c(1e-5, 0.0);
        let touching = Loop { vertices: vec![near, c(0.9, 0.4), c(1.2, 0.2), near], enclosed: vec![] };
        assert!(matches!(touching.validate(&pts), Err(OracleError::VertexTooClose { .. })));

        // an edge running straight through x_R
        let through = Loop {
            vertices: vec![c(0.0, 0.1), c(0.6, -0.1), c(0.9, 0.2), c(0.0, 0.1)],
            enclosed: vec![],
        };
        assert!(matches!(through.validate(&pts), Err(OracleError::PathThroughSingularity { .. })));

        // claims to enclose x_L but winds around nothing
        let wrong = Loop {
            vertices: vec![c(0.9, 0.1), c(1.1, 0.1), c(1.1, 0.3), c(0.9, 0.3), c(0.9, 0.1)],
            enclosed: vec![PointId::L],
        };
        assert!(matches!(
            wrong.validate(&pts),
            Err(OracleError::WrongWinding { point: PointId::L, want: 1, got: 0 })
        ));

        let lp = Loop::square_around(&pts, PointId::L);
        let frame = fundamental_frame(&p, &e, c(0.0, 0.9), FrameKind::Origin, 1e-12).unwrap();
        assert!(matches!(
            monodromy_ode(&p, &e, &lp, &frame, 1e-10),
            Err(OracleError::BaseMismatch)
        ));
    }
}

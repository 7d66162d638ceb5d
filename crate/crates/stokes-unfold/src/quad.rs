//! Adaptive Gauss-Kronrod quadrature over real parameter intervals with
//! complex-valued integrands.
//!
//! All Laplace-type ray integrals and oracle path integrals in this crate
//! reduce, after parameterization, to integrals of a smooth complex function
//! over a finite real interval.  A 7-15 Gauss-Kronrod rule per panel with
//! worst-panel bisection is accurate and cheap at the scales involved
//! (integrands are analytic away from isolated near-poles, which callers
//! pre-split around).

use num_complex::Complex64;

/// Abscissae of the 15-point Kronrod rule on [-1, 1], non-negative half.
/// Index 7 is the midpoint 0; odd indices 1, 3, 5 are the embedded 7-point
/// Gauss nodes together with their mirror images and the midpoint.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_6,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Weights of the embedded 7-point Gauss rule at `XGK[1], XGK[3], XGK[5]`
/// (mirrored) and the midpoint.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Hard cap on the number of panels before refinement is declared stalled.
const MAX_PANELS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum QuadError {
    /// Refinement stopped making progress before reaching the requested
    /// absolute tolerance.
    Stalled { achieved: f64, requested: f64 },
    /// The integrand returned a non-finite value.
    NonFinite { at: f64 },
}

impl std::fmt::Display for QuadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QuadError::Stalled { achieved, requested } => write!(
                f,
                "quadrature refinement stalled at error {achieved:.3e} (requested {requested:.3e})"
            ),
            QuadError::NonFinite { at } => {
                write!(f, "integrand returned a non-finite value at t = {at:.6e}")
            }
        }
    }
}

impl std::error::Error for QuadError {}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

/// One 7-15 Gauss-Kronrod evaluation on [a, b].
///
/// Returns the Kronrod value and |K - G| as the error estimate.  The plain
/// difference is conservative for the analytic integrands used here.
fn gk15<F>(f: &F, a: f64, b: f64) -> Result<(Complex64, f64), QuadError>
where
    F: Fn(f64) -> Complex64,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = Complex64::new(0.0, 0.0);
    let mut gauss = Complex64::new(0.0, 0.0);
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let pair = if j == 7 {
            let v = f(c);
            if !v.is_finite() {
                return Err(QuadError::NonFinite { at: c });
            }
            v
        } else {
            let vp = f(c + h * x);
            let vm = f(c - h * x);
            if !vp.is_finite() || !vm.is_finite() {
                return Err(QuadError::NonFinite {
                    at: if vp.is_finite() { c - h * x } else { c + h * x },
                });
            }
            vp + vm
        };
        kron += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        } else if j == 7 {
            gauss += WG[3] * pair;
        }
    }
    Ok((h * kron, (h * (kron - gauss)).norm()))
}

/// Adaptive integration of `f` over [a, b] to absolute tolerance `tol`.
///
/// Bisects the worst panel until the summed error estimate drops below
/// `tol`.  Returns the value and the final error estimate.
pub(crate) fn adaptive_segment<F>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(Complex64, f64), QuadError>
where
    F: Fn(f64) -> Complex64,
{
    if a == b {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let span = (b - a).abs();
    let (v, e) = gk15(f, a, b)?;
    let mut panels = vec![Panel { a, b, value: v, error: e }];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        if total_err <= tol {
            let value = panels.iter().map(|p| p.value).sum();
            return Ok((value, total_err));
        }
        if panels.len() >= MAX_PANELS {
            return Err(QuadError::Stalled { achieved: total_err, requested: tol });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| p.error.total_cmp(&q.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let Panel { a: pa, b: pb, .. } = panels[worst];
        // a panel this narrow cannot improve in f64, and splitting it risks
        // placing a node exactly on an integrable singularity
        if (pb - pa).abs() < 1e-12 * span {
            return Err(QuadError::Stalled { achieved: total_err, requested: tol });
        }
        let mid = 0.5 * (pa + pb);
        let (vl, el) = gk15(f, pa, mid)?;
        let (vr, er) = gk15(f, mid, pb)?;
        panels[worst] = Panel { a: pa, b: mid, value: vl, error: el };
        panels.push(Panel { a: mid, b: pb, value: vr, error: er });
    }
}

/// Adaptive integration over a chain of breakpoints `ts[0] < ts[1] < ...`.
///
/// Each segment gets an equal share of the tolerance.  Callers use the
/// breakpoints to isolate near-singular structure (for instance the closest
/// approach of a ray to a pole) so that bisection starts from panels that
/// already resolve it.
pub(crate) fn adaptive_polyline<F>(
    f: &F,
    ts: &[f64],
    tol: f64,
) -> Result<(Complex64, f64), QuadError>
where
    F: Fn(f64) -> Complex64,
{
    assert!(ts.len() >= 2, "need at least one segment");
    let per = tol / (ts.len() - 1) as f64;
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for w in ts.windows(2) {
        let (v, e) = adaptive_segment(f, w[0], w[1], per)?;
        value += v;
        error += e;
    }
    Ok((value, error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_polynomial_exactly() {
        // x^6 is within the Gauss-7 degree of exactness already.
        let f = |t: f64| Complex64::new(t * t * t * t * t * t, 0.0);
        let (v, e) = adaptive_segment(&f, 0.0, 1.0, 1e-12).unwrap();
        assert!((v.re - 1.0 / 7.0).abs() < 1e-14);
        assert!(v.im.abs() < 1e-16);
        assert!(e < 1e-12);
    }

    #[test]
    fn integrates_oscillatory_exponential() {
        // int_0^pi e^{it} dt = 2i.
        let f = |t: f64| Complex64::new(0.0, t).exp();
        let (v, _) = adaptive_segment(&f, 0.0, PI, 1e-12).unwrap();
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-11);
    }

    #[test]
    fn refines_near_peak() {
        // Lorentzian peak of width 1e-3 at t = 0.3; exact value via arctan.
        let w = 1e-3;
        let f = move |t: f64| Complex64::new(w / ((t - 0.3) * (t - 0.3) + w * w), 0.0);
        let exact = ((1.0 - 0.3) / w).atan() + (0.3 / w).atan();
        let (v, _) = adaptive_segment(&f, 0.0, 1.0, 1e-10).unwrap();
        assert!((v.re - exact).abs() < 1e-9, "got {} want {}", v.re, exact);
    }

    #[test]
    fn polyline_matches_single_segment() {
        let f = |t: f64| Complex64::new((-t).exp(), 0.0) * Complex64::new(0.0, t).exp();
        let (a, _) = adaptive_segment(&f, 0.0, 10.0, 1e-12).unwrap();
        let (b, _) = adaptive_polyline(&f, &[0.0, 2.5, 7.0, 10.0], 1e-12).unwrap();
        assert!((a - b).norm() < 1e-11);
    }

    #[test]
    fn reports_non_finite_integrand() {
        let f = |t: f64| Complex64::new(1.0 / (t - 0.5), 0.0);
        match adaptive_segment(&f, 0.0, 1.0, 1e-10) {
            Err(QuadError::NonFinite { .. }) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn stalls_on_hard_singularity() {
        // 1/sqrt(|t - pi/10|) is integrable but the panel estimate cannot
        // reach 1e-14; the loop must terminate with Stalled, not spin.
        let f = |t: f64| Complex64::new(1.0 / (t - PI / 10.0).abs().sqrt(), 0.0);
        match adaptive_segment(&f, 0.0, 1.0, 1e-14) {
            Err(QuadError::Stalled { achieved, requested }) => {
                assert!(achieved > requested);
            }
            other => panic!("expected Stalled, got {other:?}"),
        }
    }
}

//! Minimal 2x2 complex matrix arithmetic.
//!
//! Everything in this crate lives in dimension two, so a fixed-size type with
//! the handful of operations the Stokes/monodromy code needs (product,
//! inverse, determinant, max-norm comparisons) is simpler and easier to audit
//! than a general linear-algebra dependency.

use num_complex::Complex64;
use std::ops::{Mul, Sub};

/// Row-major 2x2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub e: [[Complex64; 2]; 2],
}

impl Mat2 {
    pub fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Mat2 {
            e: [[a11, a12], [a21, a22]],
        }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2::new(one, zero, zero, one)
    }

    pub fn zero() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Mat2::new(zero, zero, zero, zero)
    }

    /// Diagonal matrix diag(a, b).
    pub fn diag(a: Complex64, b: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Mat2::new(a, zero, zero, b)
    }

    /// Upper-triangular unipotent matrix [[1, u], [0, 1]].
    pub fn upper_unipotent(u: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2::new(one, u, zero, one)
    }

    pub fn det(&self) -> Complex64 {
        self.e[0][0] * self.e[1][1] - self.e[0][1] * self.e[1][0]
    }

    /// Inverse, or `None` when the determinant vanishes to working precision.
    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d.norm() < 1e-300 * self.norm_max().max(1.0) {
            return None;
        }
        Some(Mat2::new(
            self.e[1][1] / d,
            -self.e[0][1] / d,
            -self.e[1][0] / d,
            self.e[0][0] / d,
        ))
    }

    /// Largest entry modulus.
    pub fn norm_max(&self) -> f64 {
        self.e
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise difference `|self - other|`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (*self - *other).norm_max()
    }

    pub fn scale(&self, c: Complex64) -> Mat2 {
        let mut out = *self;
        for row in out.e.iter_mut() {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Matrix commutator norm `|AB - BA|_max`; zero iff the matrices commute.
    pub fn commutator_norm(&self, other: &Mat2) -> f64 {
        (*self * *other).max_abs_diff(&(*other * *self))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] = self.e[i][0] * rhs.e[0][j] + self.e[i][1] * rhs.e[1][j];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] = self.e[i][j] - rhs.e[i][j];
            }
        }
        out
    }
}

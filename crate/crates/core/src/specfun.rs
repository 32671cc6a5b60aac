//! Special functions.
//!
//! `erf`/`erfc` delegate to `libm` (a port of the FreeBSD msun routines, well
//! under 1e-14 relative error); the unit tests check them against direct
//! quadrature of the defining integral. The two `erfc` approximations are the
//! building blocks of the approximate average error-rate expressions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

/// 2/√π
pub const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Which flavour of `erfc` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErfcApproxKind {
    /// The true complementary error function.
    Exact,
    /// Two-branch approximation, tight as z → +∞ and as z → −∞.
    PiecewiseTight,
    /// One-term asymptotic tail `e^{-z²}/(z√π)`, valid only for z > 0.
    SimpleTail,
}

impl ErfcApproxKind {
    pub fn eval(self, z: f64) -> Result<f64> {
        match self {
            ErfcApproxKind::Exact => Ok(erfc(z)),
            ErfcApproxKind::PiecewiseTight => Ok(erfc_piecewise_approx(z)),
            ErfcApproxKind::SimpleTail => erfc_simple_tail(z),
        }
    }
}

pub fn erf(z: f64) -> f64 {
    libm::erf(z)
}

pub fn erfc(z: f64) -> f64 {
    libm::erfc(z)
}

/// Natural log of `erfc(z)`, finite far beyond the point where `erfc`
/// underflows.
pub fn ln_erfc(z: f64) -> f64 {
    if z < 25.0 {
        return erfc(z).ln();
    }
    // Asymptotic series of erfc(z)·z·√π·e^{z²}; at z ≥ 25 the omitted term is < 1e-12.
    let w = 1.0 / (2.0 * z * z);
    let series = 1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w)));
    -z * z - (z * PI.sqrt()).ln() + series.ln()
}

/// Gaussian tail probability Q(z) = erfc(z/√2)/2.
pub fn q_function(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// The `z ≥ 0` branch factor `e^{-z²}/(z + √(z² + 4/π))`, so that the
/// positive branch of [`erfc_piecewise_approx`] is `(2/√π)` times this.
pub fn tail_factor(z: f64) -> f64 {
    (-z * z).exp() / (z + (z * z + 4.0 / PI).sqrt())
}

/// `ln` of [`tail_factor`].
pub fn ln_tail_factor(z: f64) -> f64 {
    -z * z - (z + (z * z + 4.0 / PI).sqrt()).ln()
}

/// The `z < 0` branch `1 + (e^{-2πz/√6} − 1)/(e^{-2πz/√6} + 1)`.
///
/// The ratio is `tanh(−πz/√6)`, which stays finite where the exponentials
/// overflow.
pub fn negative_branch(z: f64) -> f64 {
    1.0 - (PI * z / 6f64.sqrt()).tanh()
}

/// Two-branch `erfc` approximation: the bounded rational-exponential form for
/// `z ≥ 0` and a logistic form for `z < 0`. Both branches equal 1 at `z = 0`.
pub fn erfc_piecewise_approx(z: f64) -> f64 {
    if z >= 0.0 {
        FRAC_2_SQRT_PI * tail_factor(z)
    } else {
        negative_branch(z)
    }
}

/// One-term asymptotic tail `e^{-z²}/(z√π)`.
///
/// Diverges as z → 0⁺, so non-positive arguments are rejected.
pub fn erfc_simple_tail(z: f64) -> Result<f64> {
    if z.is_nan() || z <= 0.0 {
        return Err(Error::Domain(format!(
            "erfc_simple_tail requires z > 0, got {z}"
        )));
    }
    Ok((-z * z).exp() / (z * PI.sqrt()))
}

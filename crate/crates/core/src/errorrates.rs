//! Conditional and average BER/SER of M-PAM over the composite channel.
//!
//! All averages are evaluated in `x = ln(h/(h_l h_g κ))`. In that variable
//! the PDF weight `h^{γ²−1} dh` becomes `e^{γ²x} dx` and the constant
//! `(h_l h_g κ)^{γ²}` cancels, so the integrands are exponentials of sums of
//! moderate logarithms. The branch point `ĥ` maps to `x = −μ`.
//!
//! Exact averages replace each inner Gaussian integral `∫_z^∞ e^{−t²} dt` by
//! `(√π/2)·erfc(z)`; the literal nested double integral is kept in the
//! `*_nested` functions as a validation oracle.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{dbm_to_watts, FadingModel, ModulationOrder, OperatingPoint};
use crate::quadrature::{find_crossing, integrate, QuadratureSpec};
use crate::specfun::{erfc, ln_erfc, ln_tail_factor, negative_branch, q_function};
use crate::{Error, Result};

/// Scaled arguments above this contribute less than `e^{−745}` and are cut.
const W_MAX: f64 = 27.3;

/// Lower cutoff of the single-integral OOK approximation, relative to `ĥ`.
pub const SIMPLE_TAIL_CUTOFF: f64 = 1e-12;

/// HD-FEC BER threshold.
pub const BER_THRESHOLD: f64 = 3.84e-3;

/// SER threshold used for the M-PAM analyses.
pub const SER_THRESHOLD: f64 = 1e-3;

/// Power grid spacing (dB) used to bracket threshold crossings.
pub const CROSSING_GRID_STEP_DB: f64 = 0.25;

/// Final tolerance (dB) of refined crossings.
pub const CROSSING_TOL_DB: f64 = 1e-7;

fn average_spec() -> QuadratureSpec {
    QuadratureSpec::with_tolerances(1e-10, 0.0)
}

/// `((M−1)/M)·erfc(A/(2√2(M−1)))`
pub fn conditional_ser_pam(m: ModulationOrder, a: f64) -> f64 {
    let d = m.as_f64() - 1.0;
    d / m.as_f64() * erfc(a / (2.0 * SQRT_2 * d))
}

/// `½·erfc(A/√8)`
pub fn conditional_ber_ook(a: f64) -> f64 {
    0.5 * erfc(a / 8f64.sqrt())
}

/// Gray-mapped conditional BER of 8-PAM and 16-PAM as signed Q-function sums.
pub fn conditional_ber_exact(m: ModulationOrder, a: f64) -> Result<f64> {
    let q = |k: f64, den: f64| q_function(k * a / den);
    match m.get() {
        8 => Ok(
            (7.0 * q(1.0, 14.0) + 6.0 * q(3.0, 14.0) - q(5.0, 14.0) + q(9.0, 14.0) - q(13.0, 14.0))
                / 12.0,
        ),
        16 => {
            let mut s = 15.0 * q(1.0, 30.0) + 14.0 * q(3.0, 30.0) - q(5.0, 30.0);
            for k in 0..3 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let k = k as f64;
                s += sign * (5.0 * q(4.0 * k + 9.0, 30.0) + 4.0 * q(4.0 * k + 11.0, 30.0));
            }
            s += q(25.0, 30.0) - q(29.0, 30.0);
            s -= 3.0 * q(21.0, 30.0) + 2.0 * q(23.0, 30.0);
            Ok(s / 32.0)
        }
        other => Err(Error::UnsupportedOrder(other)),
    }
}

/// `P_s/m`, the high-SNR Gray approximation of the conditional BER.
pub fn conditional_ber_approx(m: ModulationOrder, a: f64) -> f64 {
    conditional_ser_pam(m, a) / m.bits() as f64
}

/// Which average-SER expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SerExpressionKind {
    Exact,
    Approx,
    Dense,
    DenseHighPower,
}

/// How to obtain the average BER of M-PAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BerMode {
    /// Gray-mapped exact conditional BER (M ∈ {2, 8, 16}).
    ExactGray,
    /// Average SER divided by `log2 M`.
    SerOverM(SerExpressionKind),
}

/// Any of the average error-rate expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Expression {
    BerOokExact,
    BerOokPiecewise,
    BerOokSimple,
    Ser(SerExpressionKind),
    Ber(BerMode),
}

impl Expression {
    pub const ALL: [Expression; 10] = [
        Expression::BerOokExact,
        Expression::BerOokPiecewise,
        Expression::BerOokSimple,
        Expression::Ser(SerExpressionKind::Exact),
        Expression::Ser(SerExpressionKind::Approx),
        Expression::Ser(SerExpressionKind::Dense),
        Expression::Ser(SerExpressionKind::DenseHighPower),
        Expression::Ber(BerMode::ExactGray),
        Expression::Ber(BerMode::SerOverM(SerExpressionKind::Exact)),
        Expression::Ber(BerMode::SerOverM(SerExpressionKind::Approx)),
    ];

    pub fn name(&self) -> &'static str {
        use SerExpressionKind::*;
        match self {
            Expression::BerOokExact => "ber_ook_exact",
            Expression::BerOokPiecewise => "ber_ook_piecewise",
            Expression::BerOokSimple => "ber_ook_simple",
            Expression::Ser(Exact) => "ser_exact",
            Expression::Ser(Approx) => "ser_approx",
            Expression::Ser(Dense) => "ser_dense",
            Expression::Ser(DenseHighPower) => "ser_dense_highpower",
            Expression::Ber(BerMode::ExactGray) => "ber_exact",
            Expression::Ber(BerMode::SerOverM(Exact)) => "ber_ser_over_m",
            Expression::Ber(BerMode::SerOverM(Approx)) => "ber_approx_over_m",
            Expression::Ber(BerMode::SerOverM(Dense)) => "ber_dense_over_m",
            Expression::Ber(BerMode::SerOverM(DenseHighPower)) => "ber_dense_highpower_over_m",
        }
    }

    /// The exact expression an approximation is judged against.
    pub fn reference(&self) -> Expression {
        match self {
            Expression::BerOokExact | Expression::BerOokPiecewise | Expression::BerOokSimple => {
                Expression::BerOokExact
            }
            Expression::Ser(_) => Expression::Ser(SerExpressionKind::Exact),
            Expression::Ber(_) => Expression::Ber(BerMode::ExactGray),
        }
    }

    pub fn is_ber(&self) -> bool {
        !matches!(self, Expression::Ser(_))
    }

    pub fn evaluate(&self, op: &OperatingPoint) -> Result<f64> {
        match *self {
            Expression::BerOokExact => avg_ber_ook_exact(op),
            Expression::BerOokPiecewise => avg_ber_ook_approx_piecewise(op),
            Expression::BerOokSimple => avg_ber_ook_approx_simple(op),
            Expression::Ser(kind) => avg_ser(op, kind),
            Expression::Ber(mode) => avg_ber_mpam(op, mode),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use SerExpressionKind::*;
        let all = Expression::ALL.into_iter().chain([
            Expression::Ber(BerMode::SerOverM(Dense)),
            Expression::Ber(BerMode::SerOverM(DenseHighPower)),
        ]);
        for e in all {
            if e.name() == s.trim() {
                return Ok(e);
            }
        }
        Err(Error::InvalidParameter(format!("unknown expression '{s}'")))
    }
}

/// Per-operating-point constants shared by the integrands.
struct Kernel {
    fading: FadingModel,
    g2: f64,
    /// `ln γ² + γ²σ_R²(1 + γ²/2)`
    ln_pre: f64,
    /// `u·h_l h_g κ`, so that `u·h = uc·e^x`.
    uc: f64,
    u: f64,
    mu: f64,
}

impl Kernel {
    fn new(op: &OperatingPoint) -> Self {
        let fading = op.fading;
        let g2 = fading.gamma_sq();
        let u = op.u();
        Kernel {
            fading,
            g2,
            ln_pre: g2.ln() + fading.ln_pdf_exponent(),
            uc: u * fading.reference_gain(),
            u,
            mu: fading.mu(),
        }
    }

    /// `u·h/d` at `h = h_l h_g κ e^x`.
    fn w(&self, x: f64, d: f64) -> f64 {
        self.uc * x.exp() / d
    }

    fn v(&self, x: f64) -> f64 {
        self.fading.v_at_log(x)
    }

    /// `ln(γ² e^{E} e^{γ²x})`
    fn ln_weight(&self, x: f64) -> f64 {
        self.ln_pre + self.g2 * x
    }

    /// Truncation gain where `u·h/d` reaches [`W_MAX`].
    fn h_max(&self, d: f64) -> f64 {
        W_MAX * d / self.u
    }

    /// `x` at which `u·h/d = 1`.
    fn unit_split(&self, d: f64) -> QuadratureSpec {
        average_spec().with_split_points(vec![(d / self.uc).ln()])
    }
}

#[derive(Clone, Copy)]
enum ScaledTail {
    /// `e^{−w²}/(w + √(w² + 4/π))`
    Tight,
    /// `e^{−w²}/(2w)`
    HighPower,
}

impl ScaledTail {
    /// Log of the factor at `w = uh/d`; `ln w` is formed from `x` directly
    /// so it stays finite where `w` underflows.
    fn ln(self, k: &Kernel, x: f64, d: f64) -> f64 {
        let w = k.w(x, d);
        match self {
            ScaledTail::Tight => ln_tail_factor(w),
            ScaledTail::HighPower => -w * w - (2.0 * k.uc / d).ln() - x,
        }
    }
}

/// `(scale/√π)·[∫_{x<−μ} γ²e^{E+γ²x}·nb(v)·T(w) dx + (2/√π)∫_{x>−μ} γ²e^{E+γ²x}·t(v)·T(w) dx]`
/// with `w = u·h/d`, the shared shape of the two-branch approximations.
fn two_branch_average(op: &OperatingPoint, d: f64, scale: f64, tail: ScaledTail) -> Result<f64> {
    let k = Kernel::new(op);
    let lower = |x: f64| (k.ln_weight(x) + tail.ln(&k, x, d)).exp() * negative_branch(k.v(x));
    let upper = |x: f64| {
        let ln = k.ln_weight(x) + ln_tail_factor(k.v(x)) + tail.ln(&k, x, d);
        2.0 / PI.sqrt() * ln.exp()
    };
    let total = k
        .fading
        .integrate_log_gain(lower, upper, k.h_max(d), &k.unit_split(d))?;
    Ok(scale / PI.sqrt() * total)
}

fn require_ook(op: &OperatingPoint) -> Result<()> {
    if op.order.get() != 2 {
        return Err(Error::InvalidParameter(format!(
            "OOK expressions need M = 2, got M = {}",
            op.order.get()
        )));
    }
    Ok(())
}

/// Exact average OOK BER, `∫ ½erfc(uh)·f_H(h) dh`.
pub fn avg_ber_ook_exact(op: &OperatingPoint) -> Result<f64> {
    require_ook(op)?;
    avg_ser_exact(op)
}

/// Two-branch OOK approximation (tight `erfc` approximation in both factors).
pub fn avg_ber_ook_approx_piecewise(op: &OperatingPoint) -> Result<f64> {
    require_ook(op)?;
    two_branch_average(op, 1.0, 0.5, ScaledTail::Tight)
}

/// Single-integral OOK approximation (one-term `erfc` tail in both factors),
/// integrated over `h ≥ ĥ·(1 + 1e-12)`.
///
/// The integrand carries `1/(x + μ)` with `x + μ → 0` at `ĥ` while
/// `e^{−v²} → 1`, so the integral diverges logarithmically there and the
/// value depends on the cutoff. Integration runs in `s = ln(x + μ)`, which
/// absorbs the pole.
pub fn avg_ber_ook_approx_simple(op: &OperatingPoint) -> Result<f64> {
    Ok(ln_avg_ber_ook_approx_simple(op)?.exp())
}

/// Natural log of [`avg_ber_ook_approx_simple`], finite where the value
/// itself underflows (it decays like a Gaussian tail in `P`).
///
/// The exponent is shifted by its maximum on a coarse grid before
/// integration; the range ends where `w² − w(ĥ)²` reaches `W_MAX²`.
pub fn ln_avg_ber_ook_approx_simple(op: &OperatingPoint) -> Result<f64> {
    require_ook(op)?;
    let k = Kernel::new(op);
    let g = op.geometry;
    let sigma_r = op.fading.rytov_variance().sqrt();
    let ln_pre = (k.g2 * sigma_r * g.noise_sigma()
        / (2.0 * g.eta() * op.power * PI * op.fading.reference_gain()))
    .ln()
        + op.fading.ln_pdf_exponent();
    let s_lo = SIMPLE_TAIL_CUTOFF.ln_1p().ln();
    let w_lo = k.w(s_lo.exp() - k.mu, 1.0);
    let sigma2 = op.fading.sigma2();
    let x_hi = ((w_lo * w_lo + W_MAX * W_MAX).sqrt() / k.uc)
        .ln()
        .min(-sigma2 + 40.0 * sigma2.sqrt());
    if x_hi + k.mu <= SIMPLE_TAIL_CUTOFF.ln_1p() {
        return Ok(f64::NEG_INFINITY);
    }
    let s_hi = (x_hi + k.mu).ln();
    let exponent = |s: f64| {
        let x = s.exp() - k.mu;
        let w = k.w(x, 1.0);
        let v = k.v(x);
        ln_pre + (k.g2 - 1.0) * x - w * w - v * v
    };
    let grid = 512;
    let shift = (0..=grid)
        .map(|i| exponent(s_lo + (s_hi - s_lo) * i as f64 / grid as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::NonFinite { at: s_lo });
    }
    let scaled = integrate(
        |s: f64| (exponent(s) - shift).exp(),
        s_lo,
        s_hi,
        &average_spec(),
    )?
    .value;
    Ok(shift + scaled.ln())
}

/// Exact average SER `∫ ((M−1)/M)·erfc(uh/(M−1))·f_H(h) dh`.
pub fn avg_ser_exact(op: &OperatingPoint) -> Result<f64> {
    let k = Kernel::new(op);
    let m = op.order.as_f64();
    let d = m - 1.0;
    let ln_scale = (d / m).ln();
    let f = |x: f64| (ln_scale + ln_erfc(k.w(x, d)) + k.fading.ln_h_pdf_at_log(x)).exp();
    k.fading
        .integrate_log_gain(f, f, k.h_max(d), &k.unit_split(d))
}

/// `∫_z^∞ e^{−t²} dt` by quadrature, returned as a logarithm.
fn ln_gaussian_tail_by_quadrature(z: f64, spec: &QuadratureSpec) -> Result<f64> {
    let from_zero = |z: f64| -> Result<f64> {
        // t = z + y pulls out e^{−z²}: ∫₀^∞ e^{−2zy − y²} dy.
        Ok(integrate(
            |y: f64| (-2.0 * z * y - y * y).exp(),
            0.0,
            f64::INFINITY,
            spec,
        )?
        .value)
    };
    if z >= 0.0 {
        Ok(-z * z + from_zero(z)?.ln())
    } else {
        let head = integrate(|t: f64| (-t * t).exp(), z, 0.0, spec)?.value;
        Ok((head + from_zero(0.0)?).ln())
    }
}

/// Literal double-integral form of [`avg_ser_exact`]; slow, for validation.
pub fn avg_ser_exact_nested(op: &OperatingPoint) -> Result<f64> {
    let k = Kernel::new(op);
    let m = op.order.as_f64();
    let d = m - 1.0;
    let inner = QuadratureSpec::with_tolerances(1e-13, 0.0);
    let ln_scale = (2.0 * d / (PI * m)).ln();
    let failure = std::cell::RefCell::new(None);
    let f = |x: f64| {
        let tails = ln_gaussian_tail_by_quadrature(k.w(x, d), &inner)
            .and_then(|a| Ok(a + ln_gaussian_tail_by_quadrature(k.v(x), &inner)?));
        match tails {
            Ok(t) => (ln_scale + k.ln_weight(x) + t).exp(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let outer = QuadratureSpec {
        rel_tol: 1e-12,
        ..k.unit_split(d)
    };
    let value = k.fading.integrate_log_gain(f, f, k.h_max(d), &outer)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Literal double-integral form of [`avg_ber_ook_exact`].
pub fn avg_ber_ook_exact_nested(op: &OperatingPoint) -> Result<f64> {
    require_ook(op)?;
    avg_ser_exact_nested(op)
}

/// Two-branch SER approximation with `w = uh/(M−1)`.
pub fn avg_ser_approx(op: &OperatingPoint) -> Result<f64> {
    let m = op.order.as_f64();
    two_branch_average(op, m - 1.0, (m - 1.0) / m, ScaledTail::Tight)
}

/// Dense-constellation SER: `M−1 → M` in [`avg_ser_approx`].
///
/// Depends on `M` and `P` only through `uh/M`, so `(M, P)` and `(2M, 2P)`
/// give bit-identical results.
pub fn avg_ser_dense(op: &OperatingPoint) -> Result<f64> {
    two_branch_average(op, op.order.as_f64(), 1.0, ScaledTail::Tight)
}

/// High-power dense SER: `(uh/M)² + 4/π ≈ (uh/M)²` in [`avg_ser_dense`].
pub fn avg_ser_dense_highpower(op: &OperatingPoint) -> Result<f64> {
    if op.fading.gamma_sq() <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "high-power dense SER diverges at h → 0 for γ² ≤ 1 (γ² = {})",
            op.fading.gamma_sq()
        )));
    }
    two_branch_average(op, op.order.as_f64(), 1.0, ScaledTail::HighPower)
}

pub fn avg_ser(op: &OperatingPoint, kind: SerExpressionKind) -> Result<f64> {
    match kind {
        SerExpressionKind::Exact => avg_ser_exact(op),
        SerExpressionKind::Approx => avg_ser_approx(op),
        SerExpressionKind::Dense => avg_ser_dense(op),
        SerExpressionKind::DenseHighPower => avg_ser_dense_highpower(op),
    }
}

/// Average M-PAM BER.
pub fn avg_ber_mpam(op: &OperatingPoint, mode: BerMode) -> Result<f64> {
    match mode {
        BerMode::SerOverM(kind) => Ok(avg_ser(op, kind)? / op.order.bits() as f64),
        BerMode::ExactGray => match op.order.get() {
            2 => avg_ber_ook_exact(op),
            8 | 16 => {
                let k = Kernel::new(op);
                let d = op.order.as_f64() - 1.0;
                let a_per_w = 8f64.sqrt() * d;
                let f = |x: f64| {
                    let pb =
                        conditional_ber_exact(op.order, a_per_w * k.w(x, d)).unwrap_or(f64::NAN);
                    pb * k.fading.ln_h_pdf_at_log(x).exp()
                };
                k.fading
                    .integrate_log_gain(f, f, k.h_max(d), &k.unit_split(d))
            }
            other => Err(Error::UnsupportedOrder(other)),
        },
    }
}

/// A sampled error-rate curve over transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRateCurve {
    pub expression: Expression,
    pub order: ModulationOrder,
    pub jitter_sigma: f64,
    pub rytov_variance: f64,
    points: Vec<(f64, f64)>,
}

impl ErrorRateCurve {
    pub fn new(
        expression: Expression,
        order: ModulationOrder,
        jitter_sigma: f64,
        rytov_variance: f64,
        points: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter(
                "curve powers must be strictly increasing".into(),
            ));
        }
        // Approximations can exceed 1 far outside their regime (the high-power
        // dense form at low power), so only finiteness and sign are enforced.
        if let Some(&(p, v)) = points.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "curve value {v} at {p} dBm is not a finite rate"
            )));
        }
        Ok(ErrorRateCurve {
            expression,
            order,
            jitter_sigma,
            rytov_variance,
            points,
        })
    }

    /// `(P_dBm, value)` pairs in increasing power.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_monotone_nonincreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    /// First downward crossing of `threshold`, interpolated linearly in
    /// `log10(value)` between the bracketing grid points.
    pub fn crossing(&self, threshold: f64) -> Result<f64> {
        let i = self
            .points
            .iter()
            .position(|&(_, v)| v <= threshold)
            .filter(|&i| i > 0)
            .ok_or(Error::NoCrossing { threshold })?;
        let (p0, v0) = self.points[i - 1];
        let (p1, v1) = self.points[i];
        let (l0, l1, lt) = (safe_log10(v0), safe_log10(v1), threshold.log10());
        if l0 == l1 {
            return Ok(p1);
        }
        Ok(p0 + (p1 - p0) * (l0 - lt) / (l0 - l1))
    }
}

fn safe_log10(v: f64) -> f64 {
    v.max(f64::MIN_POSITIVE).log10()
}

/// Uniform power grid `lo, lo + step, …` up to and including `hi`.
pub fn power_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bad power grid [{lo}, {hi}] step {step}"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

/// Evaluates `expr` at every power; failures are returned per point.
pub fn sweep_points(expr: Expression, op: &OperatingPoint, powers_dbm: &[f64]) -> Vec<Result<f64>> {
    powers_dbm
        .par_iter()
        .map(|&p| expr.evaluate(&op.with_power_dbm(p)))
        .collect()
}

pub fn sweep(expr: Expression, op: &OperatingPoint, powers_dbm: &[f64]) -> Result<ErrorRateCurve> {
    let values = sweep_points(expr, op, powers_dbm)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    ErrorRateCurve::new(
        expr,
        op.order,
        op.fading.jitter_sigma(),
        op.fading.rytov_variance(),
        powers_dbm.iter().copied().zip(values).collect(),
    )
}

/// `P_approx*(threshold) − P_exact*(threshold)` in dB from sampled curves.
pub fn delta_gap(exact: &ErrorRateCurve, approx: &ErrorRateCurve, threshold: f64) -> Result<f64> {
    Ok(approx.crossing(threshold)? - exact.crossing(threshold)?)
}

/// Crossing of `threshold` by `curve(y)`, scanning `y` on a grid from `lo`
/// and refining the first bracket in `log10` of the curve.
fn crossing_offset<F>(curve: F, threshold: f64, lo: f64, hi: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let grid = power_grid(lo, hi, step)?;
    let mut prev = None;
    for &y in &grid {
        let v = curve(y)?;
        if v <= threshold {
            let Some(y0) = prev else {
                return Err(Error::NoCrossing { threshold });
            };
            return find_crossing(
                |t| Ok(safe_log10(curve(t)?)),
                threshold.log10(),
                y0,
                y,
                CROSSING_TOL_DB,
            );
        }
        prev = Some(y);
    }
    Err(Error::NoCrossing { threshold })
}

/// Transmit power (dBm) at which `expr` first drops to `threshold` on `[lo, hi]`.
pub fn crossing_power_dbm(
    expr: Expression,
    op: &OperatingPoint,
    threshold: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    crossing_offset(
        |p| expr.evaluate(&op.with_power_dbm(p)),
        threshold,
        lo,
        hi,
        CROSSING_GRID_STEP_DB,
    )
}

/// Δ of `approx` against its exact reference, from refined crossings.
pub fn delta_gap_refined(
    approx: Expression,
    op: &OperatingPoint,
    threshold: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let exact = crossing_power_dbm(approx.reference(), op, threshold, lo, hi)?;
    Ok(crossing_power_dbm(approx, op, threshold, lo, hi)? - exact)
}

/// Which SER expression drives the power-step analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerStepVariant {
    Exact,
    Dense,
}

/// Default dBm search range of [`power_increase_for_next_bit`].
pub const POWER_STEP_RANGE_DBM: (f64, f64) = (-30.0, 90.0);

/// Extra power (dB) needed to go from `2^{m−1}`-PAM to `2^m`-PAM at the same
/// SER, `P*(2^m) − P*(2^{m−1})`; requires `m ≥ 2`.
///
/// Both crossings are searched in a dB offset `y` with `P = base·10^{y/10}`.
/// The larger order uses twice the base power, so the dense variant runs the
/// same floating-point computation twice and returns `10·log10 2` exactly.
pub fn power_increase_for_next_bit(
    op: &OperatingPoint,
    m: u32,
    target_ser: f64,
    variant: PowerStepVariant,
) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "power step compares 2^(m-1) with 2^m and needs m ≥ 2, got {m}"
        )));
    }
    if !(target_ser > 0.0 && target_ser < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "target SER must lie in (0, 0.5), got {target_ser}"
        )));
    }
    let small = op.with_order(ModulationOrder::from_bits(m - 1)?);
    let large = op.with_order(ModulationOrder::from_bits(m)?);
    let base = dbm_to_watts(0.0);
    let (lo, hi) = POWER_STEP_RANGE_DBM;
    let crossing = |point: OperatingPoint, base: f64| {
        let eval = |y: f64| {
            let p = point.with_power(base * 10f64.powf(y / 10.0));
            match variant {
                PowerStepVariant::Exact => avg_ser_exact(&p),
                PowerStepVariant::Dense => avg_ser_dense(&p),
            }
        };
        crossing_offset(eval, target_ser, lo, hi, CROSSING_GRID_STEP_DB)
    };
    match variant {
        PowerStepVariant::Exact => Ok(crossing(large, base)? - crossing(small, base)?),
        PowerStepVariant::Dense => {
            Ok(dense_power_step_db() + (crossing(large, 2.0 * base)? - crossing(small, base)?))
        }
    }
}

/// `10·log10 2`, the dense-constellation power step.
pub fn dense_power_step_db() -> f64 {
    10.0 * 2f64.log10()
}

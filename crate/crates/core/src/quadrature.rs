//! Adaptive Gauss-Kronrod quadrature and threshold-crossing root finding.
//!
//! [`integrate`] is a globally adaptive G7-K15 scheme: the subinterval with
//! the largest error estimate is bisected until the summed estimate meets
//! `max(abs_tol, rel_tol·|value|)`. Semi-infinite and infinite ranges are
//! mapped onto finite ones with `x = a + t/(1−t)`.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and breakpoints for [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Interior breakpoints, strictly increasing.
    pub split_points: Vec<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
            split_points: Vec::new(),
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        QuadratureSpec {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn with_split_points(mut self, split_points: Vec<f64>) -> Self {
        self.split_points = split_points;
        self
    }

    fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) || self.max_subdivisions < 1 {
            return Err(Error::InvalidParameter(format!(
                "quadrature spec needs rel_tol > 0, abs_tol ≥ 0, max_subdivisions ≥ 1: {self:?}"
            )));
        }
        let mut prev = lo;
        for &s in &self.split_points {
            if !(s > prev) || !(s < hi) {
                return Err(Error::InvalidParameter(format!(
                    "split points must be strictly increasing inside ({lo}, {hi}): {:?}",
                    self.split_points
                )));
            }
            prev = s;
        }
        Ok(())
    }
}

/// Result of an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One G7-K15 panel with the QUADPACK error heuristic.
fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = res_k * half;
    res_abs *= scale;
    res_asc *= scale;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error }
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
    nan_at: &Cell<Option<f64>>,
) -> Result<Estimate> {
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        heap.push(gauss_kronrod_15(f, w[0], w[1]));
    }
    let mut evaluations = 15 * heap.len();
    let mut subdivisions = 0;
    loop {
        if let Some(at) = nan_at.get() {
            return Err(Error::NonFinite { at });
        }
        let value: f64 = heap.iter().map(|s| s.value).sum();
        let error: f64 = heap.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::NonFinite { at: f64::NAN });
        }
        if error <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            return Ok(Estimate {
                value,
                error,
                subdivisions,
                evaluations,
            });
        }
        let worst = *heap.peek().expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        let too_narrow = !(mid > worst.a && mid < worst.b);
        if subdivisions >= spec.max_subdivisions || too_narrow {
            return Err(Error::NonConvergence {
                estimate: value,
                error_bound: error,
                subdivisions,
            });
        }
        heap.pop();
        heap.push(gauss_kronrod_15(f, worst.a, mid));
        heap.push(gauss_kronrod_15(f, mid, worst.b));
        evaluations += 30;
        subdivisions += 1;
    }
}

/// Integrates `f` over `[lo, hi]`; either limit may be infinite.
///
/// Returns [`Error::NonConvergence`] carrying the best estimate when the
/// subdivision budget is exhausted, and [`Error::NonFinite`] when `f`
/// produces NaN or ±∞.
pub fn integrate<F>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    integrate_dyn(&f, lo, hi, spec)
}

fn integrate_dyn(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::Domain("integration limits must not be NaN".into()));
    }
    if lo == hi {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
            evaluations: 0,
        });
    }
    if lo > hi {
        let reversed = QuadratureSpec {
            split_points: spec.split_points.iter().rev().copied().collect(),
            ..spec.clone()
        };
        return integrate_dyn(f, hi, lo, &reversed).map(|e| Estimate {
            value: -e.value,
            ..e
        });
    }
    spec.validate(lo, hi)?;

    let bad = Cell::new(None);
    let guard = |x: f64, v: f64| {
        if !v.is_finite() && bad.get().is_none() {
            bad.set(Some(x));
        }
        v
    };

    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let mut pts = Vec::with_capacity(spec.split_points.len() + 2);
            pts.push(lo);
            pts.extend_from_slice(&spec.split_points);
            pts.push(hi);
            adaptive(&|x| guard(x, f(x)), &pts, spec, &bad)
        }
        (true, false) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                let x = lo + t / s;
                guard(x, f(x)) / (s * s)
            };
            let mut pts = vec![0.0];
            pts.extend(spec.split_points.iter().map(|&x| (x - lo) / (1.0 + x - lo)));
            pts.push(1.0);
            adaptive(&g, &pts, spec, &bad)
        }
        (false, true) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                let x = hi - t / s;
                guard(x, f(x)) / (s * s)
            };
            let mut pts = vec![0.0];
            pts.extend(
                spec.split_points
                    .iter()
                    .rev()
                    .map(|&x| (hi - x) / (1.0 + hi - x)),
            );
            pts.push(1.0);
            adaptive(&g, &pts, spec, &bad)
        }
        (false, false) => {
            let (pivot, rest) = match spec.split_points.split_first() {
                Some((&p, rest)) => (p, rest.to_vec()),
                None => (0.0, Vec::new()),
            };
            let left = integrate_dyn(
                f,
                f64::NEG_INFINITY,
                pivot,
                &QuadratureSpec {
                    split_points: Vec::new(),
                    ..spec.clone()
                },
            )?;
            let right = integrate_dyn(
                f,
                pivot,
                f64::INFINITY,
                &QuadratureSpec {
                    split_points: rest,
                    ..spec.clone()
                },
            )?;
            Ok(Estimate {
                value: left.value + right.value,
                error: left.error + right.error,
                subdivisions: left.subdivisions + right.subdivisions,
                evaluations: left.evaluations + right.evaluations,
            })
        }
    }
}

/// Default x-tolerance of [`find_crossing`] (dB when x is a power axis).
pub const DEFAULT_CROSSING_TOL: f64 = 1e-4;

/// Locates `x ∈ [lo, hi]` with `curve(x) = target` for a continuous monotone
/// curve.
///
/// Illinois-modified regula falsi inside a bracket that is always kept; a
/// bisection step is forced whenever the bracket fails to halve within two
/// iterations. The returned point lies within `tol` of the root.
pub fn find_crossing<F>(mut curve: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "find_crossing needs lo < hi and tol > 0 (lo={lo}, hi={hi}, tol={tol})"
        )));
    }
    let eval = |curve: &mut F, x: f64| -> Result<f64> {
        let y = curve(x)?;
        if y.is_nan() {
            return Err(Error::NonFinite { at: x });
        }
        Ok(y - target)
    };
    let (mut a, mut b) = (lo, hi);
    let mut fa = eval(&mut curve, a)?;
    let mut fb = eval(&mut curve, b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket {
            target,
            lo,
            hi,
            f_lo: fa + target,
            f_hi: fb + target,
        });
    }
    let mut side = 0i8;
    let mut since_halving = 0u32;
    let mut width_at_halving = b - a;
    while b - a > 2.0 * tol {
        let secant = (a * fb - b * fa) / (fb - fa);
        let x = if since_halving >= 2 || !(secant > a && secant < b) {
            0.5 * (a + b)
        } else {
            secant
        };
        let fx = eval(&mut curve, x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        if b - a <= 0.5 * width_at_halving {
            width_at_halving = b - a;
            since_halving = 0;
        } else {
            since_halving += 1;
        }
    }
    Ok(0.5 * (a + b))
}

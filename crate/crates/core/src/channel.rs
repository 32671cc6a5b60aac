//! Composite FSO channel: `H = h_l · h_g · H_a · H_p`.
//!
//! `h_l` (Beer-Lambert loss) and `h_g` (geometric spread) are deterministic
//! for a given link; `H_a` is log-normal turbulence normalised so that
//! `E[H_a²] = 1`; `H_p` is the pointing-error gain of a Gaussian beam under
//! Rayleigh radial jitter, normalised by `κ` so that `E[H_p²] = 1`.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::quadrature::{integrate, QuadratureSpec};
use crate::specfun::{erf, ln_erfc};
use crate::{Error, Result};

/// `10^{(P_dBm − 30)/10}`
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * p_w.log10() + 30.0
}

/// Beer-Lambert attenuation `exp(−σ·z)`.
///
/// The coefficient is used directly as a natural-log exponent per km, which is
/// what reproduces `h_l = 0.516` for `σ = 0.2208`, `z = 3 km` even though that
/// number is usually quoted in dB/km.
pub fn beer_lambert_loss(sigma_per_km: f64, z_km: f64) -> Result<f64> {
    if !(sigma_per_km >= 0.0) || !(z_km > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beer_lambert_loss needs sigma ≥ 0 and z > 0, got ({sigma_per_km}, {z_km})"
        )));
    }
    Ok((-sigma_per_km * z_km).exp())
}

/// Rytov variance `1.23·C_n²·k^{7/6}·z^{11/6}` with `k = 2π/λ`.
pub fn rytov_variance(cn2: f64, wavelength: f64, z: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    1.23 * cn2 * k.powf(7.0 / 6.0) * z.powf(11.0 / 6.0)
}

/// Inverse of [`rytov_variance`] in `C_n²`.
pub fn cn2_for_rytov(sigma_r2: f64, wavelength: f64, z: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    sigma_r2 / (1.23 * k.powf(7.0 / 6.0) * z.powf(11.0 / 6.0))
}

/// Returns `(v0, h_g)` with `v0 = √π·a/(√2·w_z)` and `h_g = erf(v0)²`.
pub fn geometric_spread(aperture_radius: f64, beam_waist: f64) -> Result<(f64, f64)> {
    if !(aperture_radius > 0.0) || !(beam_waist > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "geometric_spread needs a > 0 and w_z > 0, got ({aperture_radius}, {beam_waist})"
        )));
    }
    let v0 = PI.sqrt() * aperture_radius / (SQRT_2 * beam_waist);
    Ok((v0, erf(v0).powi(2)))
}

/// Equivalent beam width `ŵ_z² = w_z²·√π·erf(v0) / (2·v0·e^{−v0²})`.
pub fn equivalent_beam_width_sq(beam_waist: f64, v0: f64) -> Result<f64> {
    if !(beam_waist > 0.0) || !(v0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "equivalent_beam_width_sq needs w_z > 0 and v0 > 0, got ({beam_waist}, {v0})"
        )));
    }
    Ok(beam_waist * beam_waist * PI.sqrt() * erf(v0) / (2.0 * v0 * (-v0 * v0).exp()))
}

/// Pointing-error shape parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingParams {
    /// `ŵ_z / (2σ_s)`
    pub gamma: f64,
    /// `√((γ²+2)/γ²)`, the second-moment normaliser.
    pub kappa: f64,
}

impl PointingParams {
    /// Log-domain shift `μ = σ_R²(γ² + 1)` of the composite PDF.
    pub fn mu(&self, rytov_variance: f64) -> f64 {
        rytov_variance * (self.gamma * self.gamma + 1.0)
    }
}

pub fn pointing_params(wz_hat_sq: f64, jitter_sigma: f64) -> Result<PointingParams> {
    if !(wz_hat_sq > 0.0) || !(jitter_sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pointing_params needs ŵ_z² > 0 and σ_s > 0, got ({wz_hat_sq}, {jitter_sigma})"
        )));
    }
    let gamma = wz_hat_sq.sqrt() / (2.0 * jitter_sigma);
    let g2 = gamma * gamma;
    Ok(PointingParams {
        gamma,
        kappa: (1.0 + 2.0 / g2).sqrt(),
    })
}

/// Log-normal turbulence density with log-mean `−σ²` and log-variance `σ²`.
pub fn pdf_turbulence(h_a: f64, sigma2: f64) -> Result<f64> {
    if !(h_a > 0.0) {
        return Err(Error::Domain(format!(
            "turbulence gain must be > 0, got {h_a}"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "σ² must be > 0, got {sigma2}"
        )));
    }
    let d = h_a.ln() + sigma2;
    Ok((-d * d / (2.0 * sigma2)).exp() / (h_a * (2.0 * PI * sigma2).sqrt()))
}

/// Pointing-error density `γ²/κ^{γ²} · h_p^{γ²−1}` on `[0, κ]`, zero above `κ`.
pub fn pdf_pointing(h_p: f64, gamma: f64, kappa: f64) -> Result<f64> {
    if !(h_p >= 0.0) {
        return Err(Error::Domain(format!(
            "pointing gain must be ≥ 0, got {h_p}"
        )));
    }
    if h_p > kappa {
        return Ok(0.0);
    }
    let g2 = gamma * gamma;
    Ok(g2 * ((g2 - 1.0) * h_p.ln() - g2 * kappa.ln()).exp())
}

/// `E[H_a] = exp(−σ²/2)`
pub fn mean_turbulence(sigma2: f64) -> f64 {
    (-sigma2 / 2.0).exp()
}

/// `E[H_p] = κγ²/(γ²+1)`
pub fn mean_pointing(p: &PointingParams) -> f64 {
    let g2 = p.gamma * p.gamma;
    p.kappa * g2 / (g2 + 1.0)
}

/// Deterministic link parameters, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub wavelength: f64,
    pub distance: f64,
    pub divergence: f64,
    pub aperture_radius: f64,
    /// Electro-optical conversion α (W/A).
    pub conversion_alpha: f64,
    /// Photodetector responsivity β (A/W).
    pub responsivity_beta: f64,
    /// Noise standard deviation σ_n (A).
    pub noise_sigma: f64,
    /// Attenuation coefficient per km (see [`beer_lambert_loss`]).
    pub attenuation_per_km: f64,
}

impl LinkParams {
    /// 3 km, 1550 nm clear-air reference link.
    pub fn reference() -> Self {
        LinkParams {
            wavelength: 1550e-9,
            distance: 3000.0,
            divergence: 1.32e-3,
            aperture_radius: 0.05,
            conversion_alpha: 1.0,
            responsivity_beta: 0.5,
            noise_sigma: 1e-7,
            attenuation_per_km: 0.2208,
        }
    }
}

/// Link parameters together with the constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    params: LinkParams,
    beam_waist: f64,
    eta: f64,
    h_l: f64,
    v0: f64,
    h_g: f64,
    wz_hat_sq: f64,
}

impl LinkGeometry {
    pub fn new(params: LinkParams) -> Result<Self> {
        let LinkParams {
            wavelength,
            distance,
            divergence,
            aperture_radius,
            conversion_alpha,
            responsivity_beta,
            noise_sigma,
            attenuation_per_km,
        } = params;
        for (name, v) in [
            ("wavelength", wavelength),
            ("distance", distance),
            ("divergence", divergence),
            ("aperture_radius", aperture_radius),
            ("conversion_alpha", conversion_alpha),
            ("responsivity_beta", responsivity_beta),
            ("noise_sigma", noise_sigma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        let beam_waist = divergence * distance / 2.0;
        let h_l = beer_lambert_loss(attenuation_per_km, distance / 1000.0)?;
        let (v0, h_g) = geometric_spread(aperture_radius, beam_waist)?;
        let wz_hat_sq = equivalent_beam_width_sq(beam_waist, v0)?;
        if !(h_l > 0.0 && h_g > 0.0 && h_g < 1.0 && wz_hat_sq > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "degenerate link: h_l = {h_l}, h_g = {h_g}, ŵ_z² = {wz_hat_sq}"
            )));
        }
        Ok(LinkGeometry {
            params,
            beam_waist,
            eta: conversion_alpha * responsivity_beta,
            h_l,
            v0,
            h_g,
            wz_hat_sq,
        })
    }

    pub fn reference() -> Self {
        Self::new(LinkParams::reference()).expect("reference link is valid")
    }

    pub fn params(&self) -> &LinkParams {
        &self.params
    }

    /// `w_z = θ·z/2`
    pub fn beam_waist(&self) -> f64 {
        self.beam_waist
    }

    /// `η = α·β`
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn h_l(&self) -> f64 {
        self.h_l
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn h_g(&self) -> f64 {
        self.h_g
    }

    pub fn wz_hat_sq(&self) -> f64 {
        self.wz_hat_sq
    }

    pub fn noise_sigma(&self) -> f64 {
        self.params.noise_sigma
    }
}

/// Turbulence and pointing statistics for one operating point `(σ_s, σ_R²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingModel {
    rytov_variance: f64,
    sigma2: f64,
    jitter_sigma: f64,
    pointing: PointingParams,
    mu: f64,
    wz_hat_sq: f64,
    /// `h_l·h_g`
    fixed_gain: f64,
}

impl FadingModel {
    /// Builds the model with `σ² = σ_R²` (weak-turbulence identification).
    pub fn new(geometry: &LinkGeometry, rytov_variance: f64, jitter_sigma: f64) -> Result<Self> {
        if !(rytov_variance > 0.0 && rytov_variance <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Rytov variance must lie in (0, 1] (weak turbulence), got {rytov_variance}"
            )));
        }
        let pointing = pointing_params(geometry.wz_hat_sq(), jitter_sigma)?;
        Ok(FadingModel {
            rytov_variance,
            sigma2: rytov_variance,
            jitter_sigma,
            pointing,
            mu: pointing.mu(rytov_variance),
            wz_hat_sq: geometry.wz_hat_sq(),
            fixed_gain: geometry.h_l() * geometry.h_g(),
        })
    }

    /// Jitter given as an angle (rad); `σ_s = θ_s·z`.
    pub fn from_jitter_angle(
        geometry: &LinkGeometry,
        rytov_variance: f64,
        jitter_angle: f64,
    ) -> Result<Self> {
        Self::new(
            geometry,
            rytov_variance,
            jitter_angle * geometry.params().distance,
        )
    }

    pub fn rytov_variance(&self) -> f64 {
        self.rytov_variance
    }

    /// Log-variance σ² of `H_a`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Log-scale δ = −σ².
    pub fn delta(&self) -> f64 {
        -self.sigma2
    }

    pub fn jitter_sigma(&self) -> f64 {
        self.jitter_sigma
    }

    pub fn pointing(&self) -> PointingParams {
        self.pointing
    }

    pub fn gamma(&self) -> f64 {
        self.pointing.gamma
    }

    pub fn gamma_sq(&self) -> f64 {
        self.pointing.gamma * self.pointing.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.pointing.kappa
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `h_l·h_g`
    pub fn fixed_gain(&self) -> f64 {
        self.fixed_gain
    }

    /// `h_g·h_l·κ`, the gain with unit turbulence and perfect pointing.
    pub fn reference_gain(&self) -> f64 {
        self.fixed_gain * self.pointing.kappa
    }

    /// Branch point `ĥ = h_g·h_l·κ·e^{−μ}` where `v(h)` changes sign.
    pub fn h_hat(&self) -> f64 {
        self.reference_gain() * (-self.mu).exp()
    }

    /// `γ²σ_R²(1 + γ²/2)`, the log of the exponential factor in the PDF.
    pub fn ln_pdf_exponent(&self) -> f64 {
        let g2 = self.gamma_sq();
        g2 * self.rytov_variance * (1.0 + g2 / 2.0)
    }

    /// `v = (ln(h/(h_l h_g κ)) + μ)/√(2σ²)` in terms of `x = ln(h/(h_l h_g κ))`.
    pub fn v_at_log(&self, x: f64) -> f64 {
        (x + self.mu) / (2.0 * self.sigma2).sqrt()
    }

    pub fn v(&self, h: f64) -> f64 {
        self.v_at_log((h / self.reference_gain()).ln())
    }

    /// `ln(h·f_H(h))` at `h = h_l h_g κ e^x`.
    pub fn ln_h_pdf_at_log(&self, x: f64) -> f64 {
        let g2 = self.gamma_sq();
        (0.5 * g2).ln() + g2 * x + self.ln_pdf_exponent() + ln_erfc(self.v_at_log(x))
    }

    /// Composite density
    /// `γ²h^{γ²−1}/(2(h_g h_l κ)^{γ²}) · erfc(v) · exp[γ²σ_R²(1+γ²/2)]`.
    pub fn pdf(&self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!(
                "composite gain must be > 0, got {h}"
            )));
        }
        let x = (h / self.reference_gain()).ln();
        Ok((self.ln_h_pdf_at_log(x) - h.ln()).exp())
    }

    /// `E[H^order]` from the factorised closed forms.
    pub fn moment(&self, order: u32) -> Result<f64> {
        match order {
            1 => Ok(self.fixed_gain * mean_turbulence(self.sigma2) * mean_pointing(&self.pointing)),
            2 => Ok(self.fixed_gain * self.fixed_gain),
            _ => Err(Error::InvalidParameter(format!(
                "only moments of order 1 and 2 are available, got {order}"
            ))),
        }
    }

    /// `∫₀^{h_max} g(h)·f_H(h) dh`.
    ///
    /// Integrates in `x = ln(h/(h_l h_g κ))` with a breakpoint at `ĥ`, which
    /// keeps the integrand bounded and smooth for any `γ²`.
    pub fn expectation<G>(&self, g: G, h_max: f64, spec: &QuadratureSpec) -> Result<f64>
    where
        G: Fn(f64) -> f64,
    {
        let c = self.reference_gain();
        self.integrate_log_gain(
            |x| g(c * x.exp()) * self.ln_h_pdf_at_log(x).exp(),
            |x| g(c * x.exp()) * self.ln_h_pdf_at_log(x).exp(),
            h_max,
            spec,
        )
    }

    /// Integrates `lower(x)` over `x ≤ −μ` and `upper(x)` over `x ≥ −μ`, both
    /// truncated at `ln(h_max/(h_l h_g κ))`. The integrands are already in the
    /// `x` measure (`dh = h dx`). Split points in `spec` are `x` values and are
    /// routed to whichever half contains them.
    pub fn integrate_log_gain<L, U>(
        &self,
        lower: L,
        upper: U,
        h_max: f64,
        spec: &QuadratureSpec,
    ) -> Result<f64>
    where
        L: Fn(f64) -> f64,
        U: Fn(f64) -> f64,
    {
        if !(h_max > 0.0) {
            return Ok(0.0);
        }
        let x_hat = -self.mu;
        // ln H_a ~ N(−σ², σ²) and H_p ≤ κ, so nothing survives 40σ above −σ².
        let x_cap = -self.sigma2 + 40.0 * self.sigma2.sqrt();
        let x_max = (h_max / self.reference_gain()).ln().min(x_cap);
        let x_mid = x_max.min(x_hat);
        let within = |a: f64, b: f64| {
            let mut pts: Vec<f64> = spec
                .split_points
                .iter()
                .copied()
                .filter(|&p| p > a && p < b)
                .collect();
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            QuadratureSpec {
                split_points: pts,
                ..spec.clone()
            }
        };
        let below = integrate(
            &lower,
            f64::NEG_INFINITY,
            x_mid,
            &within(f64::NEG_INFINITY, x_mid),
        )?
        .value;
        let above = if x_max > x_hat {
            integrate(&upper, x_hat, x_max, &within(x_hat, x_max))?.value
        } else {
            0.0
        };
        Ok(below + above)
    }

    /// Draws one turbulence factor `H_a`, normalised so `E[H_a²] = 1`.
    pub fn sample_turbulence<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n: f64 = rng.sample(StandardNormal);
        (self.delta() + self.sigma2.sqrt() * n).exp()
    }

    /// Draws one pointing factor `κ·exp(−2R²/ŵ_z²)` with Rayleigh `R`.
    pub fn sample_pointing<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        let r = self.jitter_sigma * (-2.0 * u.ln()).sqrt();
        self.pointing.kappa * (-2.0 * r * r / self.wz_hat_sq).exp()
    }

    /// Draws one composite gain `h_l·h_g·H_a·H_p`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let h_a = self.sample_turbulence(rng);
        self.fixed_gain * h_a * self.sample_pointing(rng)
    }
}

/// M-PAM order, a power of two no smaller than 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModulationOrder(u32);

impl ModulationOrder {
    pub fn new(m: u32) -> Result<Self> {
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::UnsupportedOrder(m));
        }
        Ok(ModulationOrder(m))
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 31 {
            return Err(Error::InvalidParameter(format!(
                "bits per symbol must be in 1..=31, got {bits}"
            )));
        }
        Self::new(1 << bits)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// `m = log2 M`
    pub fn bits(self) -> u32 {
        self.0.trailing_zeros()
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

/// Everything an average error-rate evaluation needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub geometry: LinkGeometry,
    pub fading: FadingModel,
    pub order: ModulationOrder,
    /// Average optical transmit power P (W).
    pub power: f64,
}

impl OperatingPoint {
    pub fn new(
        geometry: LinkGeometry,
        fading: FadingModel,
        order: ModulationOrder,
        power: f64,
    ) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "transmit power must be > 0 W, got {power}"
            )));
        }
        Ok(OperatingPoint {
            geometry,
            fading,
            order,
            power,
        })
    }

    /// Reference link at `(σ_s, σ_R²)` with the given order and power in dBm.
    pub fn reference(
        jitter_sigma: f64,
        rytov_variance: f64,
        order: u32,
        p_dbm: f64,
    ) -> Result<Self> {
        let geometry = LinkGeometry::reference();
        let fading = FadingModel::new(&geometry, rytov_variance, jitter_sigma)?;
        Self::new(
            geometry,
            fading,
            ModulationOrder::new(order)?,
            dbm_to_watts(p_dbm),
        )
    }

    pub fn with_power(&self, power: f64) -> Self {
        OperatingPoint { power, ..*self }
    }

    pub fn with_power_dbm(&self, p_dbm: f64) -> Self {
        self.with_power(dbm_to_watts(p_dbm))
    }

    pub fn with_order(&self, order: ModulationOrder) -> Self {
        OperatingPoint { order, ..*self }
    }

    pub fn power_dbm(&self) -> f64 {
        watts_to_dbm(self.power)
    }

    /// `u = ηP/√(2σ_n²)`
    pub fn u(&self) -> f64 {
        self.geometry.eta() * self.power / (SQRT_2 * self.geometry.noise_sigma())
    }

    /// `A = 2Pηh/σ_n`
    pub fn snr_scale(&self, h: f64) -> f64 {
        2.0 * self.power * self.geometry.eta() * h / self.geometry.noise_sigma()
    }

    /// Mean electrical symbol energy `E[X²] = 2P²(2M−1)/(3(M−1))` over
    /// equiprobable levels `j·2P/(M−1)`.
    pub fn mean_symbol_energy(&self) -> f64 {
        let m = self.order.as_f64();
        2.0 * self.power * self.power * (2.0 * m - 1.0) / (3.0 * (m - 1.0))
    }
}

/// Average electrical SNR `η²E[X²]E[H²]/σ_n²` in dB.
pub fn snr_electrical_db(op: &OperatingPoint) -> f64 {
    let eta = op.geometry.eta();
    let sn = op.geometry.noise_sigma();
    let eh2 = op.fading.fixed_gain().powi(2);
    10.0 * (eta * eta * op.mean_symbol_energy() * eh2 / (sn * sn)).log10()
}

/// Average optical SNR `ηP·h_l h_g E[H_a] E[H_p]/σ_n`, as `10·log10` of that
/// amplitude ratio.
pub fn snr_optical_db(op: &OperatingPoint) -> f64 {
    let mean_h = op.fading.moment(1).expect("order 1 is supported");
    10.0 * (op.geometry.eta() * op.power * mean_h / op.geometry.noise_sigma()).log10()
}

/// The nine `(σ_s [m], σ_R²)` operating points of the reference study.
pub const REFERENCE_GRID: [(f64, f64); 9] = [
    (0.35, 0.9),
    (0.35, 0.5),
    (0.35, 0.1),
    (0.25, 0.9),
    (0.25, 0.5),
    (0.25, 0.1),
    (0.2, 0.9),
    (0.2, 0.5),
    (0.2, 0.1),
];

/// The three headline operating points used for the error-rate curves.
pub const HEADLINE_POINTS: [(f64, f64); 3] = [(0.35, 0.1), (0.25, 0.5), (0.2, 0.9)];

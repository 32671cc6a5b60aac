//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. List-valued keys take
//! comma-separated values. Unknown keys are rejected.

use std::fmt::Write as _;

use fsolink::channel::{FadingModel, LinkGeometry, LinkParams, ModulationOrder, OperatingPoint};
use fsolink::errorrates::{Expression, BER_THRESHOLD, SER_THRESHOLD};
use fsolink::montecarlo::McConfig;

use crate::CliError;

/// How the jitter and Rytov-variance lists combine into operating points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Element-wise; a single value is broadcast.
    Zip,
    /// Every jitter value with every Rytov variance.
    Product,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub wavelength_nm: f64,
    pub link_distance_km: f64,
    pub divergence_mrad: f64,
    pub aperture_radius_m: f64,
    pub alpha_w_per_a: f64,
    pub beta_a_per_w: f64,
    pub noise_sigma_a: f64,
    pub attenuation_per_km: f64,
    pub rytov_variance: Vec<f64>,
    /// Exactly one of `jitter_sigma_m` / `jitter_angle_mrad` is set.
    pub jitter_sigma_m: Option<Vec<f64>>,
    pub jitter_angle_mrad: Option<Vec<f64>>,
    pub pairing: Pairing,
    pub p_dbm_min: f64,
    pub p_dbm_max: f64,
    pub p_dbm_step: f64,
    pub m: Vec<u32>,
    pub expressions: Vec<Expression>,
    pub ber_threshold: f64,
    pub ser_threshold: f64,
    pub mc: bool,
    pub n_symbols: u64,
    pub seed: u64,
    pub mc_batch_size: u64,
    /// 0 disables early stopping.
    pub mc_min_errors: u64,
    pub pdf_h_min: f64,
    pub pdf_h_max: f64,
    pub pdf_points: usize,
    pub m_bits_min: u32,
    pub m_bits_max: u32,
    pub target_ser: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let link = LinkParams::reference();
        RunConfig {
            wavelength_nm: link.wavelength * 1e9,
            link_distance_km: link.distance / 1e3,
            divergence_mrad: link.divergence * 1e3,
            aperture_radius_m: link.aperture_radius,
            alpha_w_per_a: link.conversion_alpha,
            beta_a_per_w: link.responsivity_beta,
            noise_sigma_a: link.noise_sigma,
            attenuation_per_km: link.attenuation_per_km,
            rytov_variance: vec![0.1, 0.5, 0.9],
            jitter_sigma_m: Some(vec![0.35, 0.25, 0.2]),
            jitter_angle_mrad: None,
            pairing: Pairing::Zip,
            p_dbm_min: -4.0,
            p_dbm_max: 20.0,
            p_dbm_step: 0.25,
            m: vec![2],
            expressions: vec![
                Expression::BerOokExact,
                Expression::BerOokPiecewise,
                Expression::BerOokSimple,
            ],
            ber_threshold: BER_THRESHOLD,
            ser_threshold: SER_THRESHOLD,
            mc: false,
            n_symbols: 1_000_000,
            seed: 1,
            mc_batch_size: McConfig::default().batch_size,
            mc_min_errors: 100,
            pdf_h_min: 1e-6,
            pdf_h_max: 1.6e-3,
            pdf_points: 200,
            m_bits_min: 2,
            m_bits_max: 10,
            target_ser: None,
        }
    }
}

/// One source (file or command line) may name only one jitter key.
fn single_jitter_key<'a>(keys: impl Iterator<Item = &'a str>) -> Result<(), CliError> {
    let mut named = keys
        .filter(|k| matches!(*k, "jitter_sigma_m" | "jitter_angle_mrad"))
        .collect::<Vec<_>>();
    named.sort_unstable();
    named.dedup();
    if named.len() > 1 {
        return Err(CliError::Config(
            "set only one of jitter_sigma_m / jitter_angle_mrad".into(),
        ));
    }
    Ok(())
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = {value}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| bad(key, value, "not a valid number"))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| bad(key, value, "not a valid list")))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, value, "empty list"));
    }
    Ok(items)
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses config text on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::parse_with_overrides(text, &[])
    }

    /// Like [`RunConfig::parse`], with `(key, value)` overrides applied after
    /// the file and before validation.
    pub fn parse_with_overrides(
        text: &str,
        overrides: &[(&str, String)],
    ) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        single_jitter_key(overrides.iter().map(|(k, _)| *k))?;
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let keys = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('=').map(|(k, _)| k.trim()));
        single_jitter_key(keys)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sets one key; later settings of the jitter keys replace earlier ones.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "wavelength_nm" => self.wavelength_nm = num(key, value)?,
            "link_distance_km" => self.link_distance_km = num(key, value)?,
            "divergence_mrad" => self.divergence_mrad = num(key, value)?,
            "aperture_radius_m" => self.aperture_radius_m = num(key, value)?,
            "alpha_w_per_a" => self.alpha_w_per_a = num(key, value)?,
            "beta_a_per_w" => self.beta_a_per_w = num(key, value)?,
            "noise_sigma_a" => self.noise_sigma_a = num(key, value)?,
            "attenuation_per_km" => self.attenuation_per_km = num(key, value)?,
            "rytov_variance" => self.rytov_variance = list(key, value)?,
            "jitter_sigma_m" => {
                self.jitter_sigma_m = Some(list(key, value)?);
                self.jitter_angle_mrad = None;
            }
            "jitter_angle_mrad" => {
                self.jitter_angle_mrad = Some(list(key, value)?);
                self.jitter_sigma_m = None;
            }
            "pairing" => {
                self.pairing = match value {
                    "zip" => Pairing::Zip,
                    "product" => Pairing::Product,
                    _ => return Err(bad(key, value, "expected zip or product")),
                }
            }
            "p_dbm_min" => self.p_dbm_min = num(key, value)?,
            "p_dbm_max" => self.p_dbm_max = num(key, value)?,
            "p_dbm_step" => self.p_dbm_step = num(key, value)?,
            "M" | "m" => self.m = list(key, value)?,
            "expressions" | "expression" => {
                self.expressions = list::<String>(key, value)?
                    .iter()
                    .map(|s| {
                        s.parse::<Expression>()
                            .map_err(|e| bad(key, value, &e.to_string()))
                    })
                    .collect::<Result<_, _>>()?
            }
            "ber_threshold" => self.ber_threshold = num(key, value)?,
            "ser_threshold" => self.ser_threshold = num(key, value)?,
            "mc" => self.mc = boolean(key, value)?,
            "n_symbols" => {
                self.n_symbols = num::<f64>(key, value).and_then(|v| whole(key, value, v))?
            }
            "seed" => self.seed = num(key, value)?,
            "mc_batch_size" => {
                self.mc_batch_size = num::<f64>(key, value).and_then(|v| whole(key, value, v))?
            }
            "mc_min_errors" => {
                self.mc_min_errors = num::<f64>(key, value).and_then(|v| whole(key, value, v))?
            }
            "pdf_h_min" => self.pdf_h_min = num(key, value)?,
            "pdf_h_max" => self.pdf_h_max = num(key, value)?,
            "pdf_points" => self.pdf_points = num(key, value)?,
            "m_bits_min" => self.m_bits_min = num(key, value)?,
            "m_bits_max" => self.m_bits_max = num(key, value)?,
            "target_ser" => self.target_ser = Some(num(key, value)?),
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::Config(m));
        match (&self.jitter_sigma_m, &self.jitter_angle_mrad) {
            (Some(_), Some(_)) | (None, None) => {
                return err("exactly one of jitter_sigma_m / jitter_angle_mrad must be set".into())
            }
            _ => {}
        }
        if !(self.p_dbm_step > 0.0) || !(self.p_dbm_max >= self.p_dbm_min) {
            return err(format!(
                "sweep range [{}, {}] step {} is empty",
                self.p_dbm_min, self.p_dbm_max, self.p_dbm_step
            ));
        }
        for &m in &self.m {
            ModulationOrder::new(m).map_err(|e| CliError::Config(format!("M = {m}: {e}")))?;
        }
        for (name, t) in [
            ("ber_threshold", self.ber_threshold),
            ("ser_threshold", self.ser_threshold),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return err(format!("{name} must lie in (0, 1), got {t}"));
            }
        }
        if let Some(t) = self.target_ser {
            if !(t > 0.0 && t < 0.5) {
                return err(format!("target_ser must lie in (0, 0.5), got {t}"));
            }
        }
        if !(self.pdf_h_min > 0.0 && self.pdf_h_max > self.pdf_h_min) || self.pdf_points < 2 {
            return err("pdf grid needs 0 < pdf_h_min < pdf_h_max and pdf_points ≥ 2".into());
        }
        if self.m_bits_min < 2 || self.m_bits_max < self.m_bits_min || self.m_bits_max > 30 {
            return err(format!(
                "power-step range needs 2 ≤ m_bits_min ≤ m_bits_max ≤ 30, got {}..{}",
                self.m_bits_min, self.m_bits_max
            ));
        }
        if self.n_symbols == 0 || self.mc_batch_size == 0 {
            return err("n_symbols and mc_batch_size must be ≥ 1".into());
        }
        self.geometry()?;
        self.operating_points()?;
        Ok(())
    }

    /// OOK-only expressions cannot be combined with M > 2.
    pub fn check_expressions(&self) -> Result<(), CliError> {
        for e in &self.expressions {
            let ook = matches!(
                e,
                Expression::BerOokExact | Expression::BerOokPiecewise | Expression::BerOokSimple
            );
            if ook && self.m.iter().any(|&m| m != 2) {
                return Err(CliError::Config(format!("expression {e} needs M = 2")));
            }
            if *e == Expression::Ber(fsolink::errorrates::BerMode::ExactGray)
                && self.m.iter().any(|&m| ![2, 8, 16].contains(&m))
            {
                return Err(CliError::Config(format!(
                    "expression {e} supports M = 2, 8, 16 only"
                )));
            }
        }
        Ok(())
    }

    pub fn link_params(&self) -> LinkParams {
        LinkParams {
            wavelength: self.wavelength_nm * 1e-9,
            distance: self.link_distance_km * 1e3,
            divergence: self.divergence_mrad * 1e-3,
            aperture_radius: self.aperture_radius_m,
            conversion_alpha: self.alpha_w_per_a,
            responsivity_beta: self.beta_a_per_w,
            noise_sigma: self.noise_sigma_a,
            attenuation_per_km: self.attenuation_per_km,
        }
    }

    pub fn geometry(&self) -> Result<LinkGeometry, CliError> {
        LinkGeometry::new(self.link_params()).map_err(|e| CliError::Config(e.to_string()))
    }

    /// `(σ_s in m, σ_R²)` pairs; angle jitter converts through `σ_s = θ_s·z`.
    pub fn jitter_rytov_pairs(&self) -> Result<Vec<(f64, f64)>, CliError> {
        let jitter: Vec<f64> = match (&self.jitter_sigma_m, &self.jitter_angle_mrad) {
            (Some(s), None) => s.clone(),
            (None, Some(a)) => a
                .iter()
                .map(|t| t * 1e-3 * self.link_distance_km * 1e3)
                .collect(),
            _ => {
                return Err(CliError::Config(
                    "exactly one jitter key must be set".into(),
                ))
            }
        };
        let r = &self.rytov_variance;
        Ok(match self.pairing {
            Pairing::Product => jitter
                .iter()
                .flat_map(|&s| r.iter().map(move |&v| (s, v)))
                .collect(),
            Pairing::Zip => {
                let n = jitter.len().max(r.len());
                let pick = |xs: &[f64], i: usize| {
                    if xs.len() == 1 {
                        Some(xs[0])
                    } else {
                        xs.get(i).copied()
                    }
                };
                (0..n)
                    .map(|i| match (pick(&jitter, i), pick(r, i)) {
                        (Some(s), Some(v)) => Ok((s, v)),
                        _ => Err(CliError::Config(format!(
                            "pairing = zip needs equal list lengths or a single value ({} jitter vs {} rytov)",
                            jitter.len(),
                            r.len()
                        ))),
                    })
                    .collect::<Result<_, _>>()?
            }
        })
    }

    /// Operating points at 0 dBm and the first configured order.
    pub fn operating_points(&self) -> Result<Vec<OperatingPoint>, CliError> {
        let geometry = self.geometry()?;
        let order = ModulationOrder::new(self.m[0]).map_err(|e| CliError::Config(e.to_string()))?;
        self.jitter_rytov_pairs()?
            .into_iter()
            .map(|(s, r)| {
                let fading = FadingModel::new(&geometry, r, s)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                OperatingPoint::new(geometry, fading, order, 1e-3)
                    .map_err(|e| CliError::Config(e.to_string()))
            })
            .collect()
    }

    pub fn orders(&self) -> Vec<ModulationOrder> {
        self.m
            .iter()
            .map(|&m| ModulationOrder::new(m).expect("validated"))
            .collect()
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig {
            n_symbols: self.n_symbols,
            seed: self.seed,
            batch_size: self.mc_batch_size,
            min_errors: (self.mc_min_errors > 0).then_some(self.mc_min_errors),
        }
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("wavelength_nm", self.wavelength_nm.to_string());
        kv("link_distance_km", self.link_distance_km.to_string());
        kv("divergence_mrad", self.divergence_mrad.to_string());
        kv("aperture_radius_m", self.aperture_radius_m.to_string());
        kv("alpha_w_per_a", self.alpha_w_per_a.to_string());
        kv("beta_a_per_w", self.beta_a_per_w.to_string());
        kv("noise_sigma_a", self.noise_sigma_a.to_string());
        kv("attenuation_per_km", self.attenuation_per_km.to_string());
        kv("rytov_variance", join(&self.rytov_variance));
        if let Some(s) = &self.jitter_sigma_m {
            kv("jitter_sigma_m", join(s));
        }
        if let Some(a) = &self.jitter_angle_mrad {
            kv("jitter_angle_mrad", join(a));
        }
        kv(
            "pairing",
            match self.pairing {
                Pairing::Zip => "zip",
                Pairing::Product => "product",
            }
            .into(),
        );
        kv("p_dbm_min", self.p_dbm_min.to_string());
        kv("p_dbm_max", self.p_dbm_max.to_string());
        kv("p_dbm_step", self.p_dbm_step.to_string());
        kv("M", join(&self.m));
        kv("expressions", join(&self.expressions));
        kv("ber_threshold", self.ber_threshold.to_string());
        kv("ser_threshold", self.ser_threshold.to_string());
        kv("mc", self.mc.to_string());
        kv("n_symbols", self.n_symbols.to_string());
        kv("seed", self.seed.to_string());
        kv("mc_batch_size", self.mc_batch_size.to_string());
        kv("mc_min_errors", self.mc_min_errors.to_string());
        kv("pdf_h_min", self.pdf_h_min.to_string());
        kv("pdf_h_max", self.pdf_h_max.to_string());
        kv("pdf_points", self.pdf_points.to_string());
        kv("m_bits_min", self.m_bits_min.to_string());
        kv("m_bits_max", self.m_bits_max.to_string());
        if let Some(t) = self.target_ser {
            kv("target_ser", t.to_string());
        }
        out
    }
}

/// Counts may be written as `1e7`; they must still be whole and non-negative.
fn whole(key: &str, value: &str, v: f64) -> Result<u64, CliError> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(63) {
        Ok(v as u64)
    } else {
        Err(bad(key, value, "expected a non-negative whole number"))
    }
}

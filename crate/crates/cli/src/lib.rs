//! Batch front end for the `fsolink` library: configuration, the five
//! report commands and CSV output.

pub mod config;

use std::io::Write;

use fsolink::channel::{snr_electrical_db, snr_optical_db, OperatingPoint};
use fsolink::errorrates::{
    crossing_power_dbm, power_grid, power_increase_for_next_bit, sweep_points, PowerStepVariant,
};
use fsolink::montecarlo::simulate;
use rayon::prelude::*;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

/// Exit code when any row failed numerically.
pub const EXIT_NUMERIC: i32 = 3;

/// C-style `%.12e`: twelve mantissa decimals and a signed, two-digit exponent.
pub fn fmt_sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// `%.4f`
pub fn fmt_db(x: f64) -> String {
    format!("{x:.4}")
}

/// A rectangular CSV report with a count of rows that failed numerically.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub failures: usize,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Table::default()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures > 0 {
            EXIT_NUMERIC
        } else {
            0
        }
    }

    /// Index of a header column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn point_cols(op: &OperatingPoint) -> [String; 2] {
    [
        op.fading.jitter_sigma().to_string(),
        op.fading.rytov_variance().to_string(),
    ]
}

/// Composite PDF on a logarithmic gain grid, one block per operating point.
pub fn cmd_pdf(cfg: &RunConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["sigma_s", "rytov_variance", "h", "density"]);
    let n = cfg.pdf_points;
    let (lo, hi) = (cfg.pdf_h_min.ln(), cfg.pdf_h_max.ln());
    for op in cfg.operating_points()? {
        for i in 0..n {
            let h = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
            let [s, r] = point_cols(&op);
            let density = match op.fading.pdf(h) {
                Ok(d) => fmt_sci(d),
                Err(e) => {
                    t.failures += 1;
                    e.to_string()
                }
            };
            t.rows.push(vec![s, r, fmt_sci(h), density]);
        }
    }
    Ok(t)
}

/// Error-rate curves over the configured power grid, optionally with Monte
/// Carlo columns.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Table, CliError> {
    cfg.check_expressions()?;
    let powers = power_grid(cfg.p_dbm_min, cfg.p_dbm_max, cfg.p_dbm_step)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut header = vec![
        "sigma_s",
        "rytov_variance",
        "M",
        "p_dbm",
        "snr_opt_db",
        "snr_elec_db",
    ];
    let names: Vec<&str> = cfg.expressions.iter().map(|e| e.name()).collect();
    header.extend(&names);
    if cfg.mc {
        header.extend([
            "mc_n_symbols",
            "mc_ser",
            "mc_ser_ci95",
            "mc_ber",
            "mc_ber_ci95",
        ]);
    }
    header.push("errors");
    let mut t = Table::new(&header);
    let mc = cfg.mc_config();
    for base in cfg.operating_points()? {
        for order in cfg.orders() {
            let op = base.with_order(order);
            let columns: Vec<_> = cfg
                .expressions
                .iter()
                .map(|&e| sweep_points(e, &op, &powers))
                .collect();
            let estimates: Vec<_> = if cfg.mc {
                powers
                    .par_iter()
                    .map(|&p| Some(simulate(&op.with_power_dbm(p), &mc)))
                    .collect()
            } else {
                vec![None; powers.len()]
            };
            for (i, &p) in powers.iter().enumerate() {
                let at = op.with_power_dbm(p);
                let [s, r] = point_cols(&op);
                let mut row = vec![
                    s,
                    r,
                    order.get().to_string(),
                    fmt_db(p),
                    fmt_db(snr_optical_db(&at)),
                    fmt_db(snr_electrical_db(&at)),
                ];
                let mut errors = Vec::new();
                for (name, col) in names.iter().zip(&columns) {
                    match &col[i] {
                        Ok(v) => row.push(fmt_sci(*v)),
                        Err(e) => {
                            row.push(String::new());
                            errors.push(format!("{name}: {e}"));
                        }
                    }
                }
                match &estimates[i] {
                    Some(Ok(est)) => row.extend([
                        est.n_symbols.to_string(),
                        fmt_sci(est.ser_hat),
                        fmt_sci(est.ci95_ser),
                        fmt_sci(est.ber_hat),
                        fmt_sci(est.ci95_ber),
                    ]),
                    Some(Err(e)) => {
                        row.extend(std::iter::repeat_n(String::new(), 5));
                        errors.push(format!("mc: {e}"));
                    }
                    None => {}
                }
                if !errors.is_empty() {
                    t.failures += 1;
                }
                row.push(errors.join("; "));
                t.rows.push(row);
            }
        }
    }
    Ok(t)
}

/// Δ gaps of every selected approximation against its exact reference.
pub fn cmd_delta(cfg: &RunConfig) -> Result<Table, CliError> {
    cfg.check_expressions()?;
    let mut t = Table::new(&[
        "sigma_s",
        "rytov_variance",
        "M",
        "expression",
        "reference",
        "threshold",
        "p_reference_dbm",
        "p_expression_dbm",
        "delta_db",
        "error",
    ]);
    let (lo, hi) = (cfg.p_dbm_min, cfg.p_dbm_max);
    for base in cfg.operating_points()? {
        for order in cfg.orders() {
            let op = base.with_order(order);
            for &expr in cfg.expressions.iter().filter(|e| e.reference() != **e) {
                let threshold = if expr.is_ber() {
                    cfg.ber_threshold
                } else {
                    cfg.ser_threshold
                };
                let reference = crossing_power_dbm(expr.reference(), &op, threshold, lo, hi);
                let approx = crossing_power_dbm(expr, &op, threshold, lo, hi);
                let [s, r] = point_cols(&op);
                let mut row = vec![
                    s,
                    r,
                    order.get().to_string(),
                    expr.name().to_string(),
                    expr.reference().name().to_string(),
                    fmt_sci(threshold),
                ];
                match (&reference, &approx) {
                    (Ok(a), Ok(b)) => {
                        row.extend([fmt_db(*a), fmt_db(*b), fmt_db(b - a), String::new()])
                    }
                    _ => {
                        t.failures += 1;
                        let cell = |x: &fsolink::Result<f64>| {
                            x.as_ref().map(|v| fmt_db(*v)).unwrap_or_default()
                        };
                        let msg = [&reference, &approx]
                            .iter()
                            .filter_map(|x| x.as_ref().err().map(|e| e.to_string()))
                            .collect::<Vec<_>>()
                            .join("; ");
                        row.extend([cell(&reference), cell(&approx), String::new(), msg]);
                    }
                }
                t.rows.push(row);
            }
        }
    }
    Ok(t)
}

/// Power increase from `2^{m−1}`-PAM to `2^m`-PAM at a target SER, exact and
/// dense-constellation variants.
pub fn cmd_power_step(cfg: &RunConfig) -> Result<Table, CliError> {
    let target = cfg.target_ser.ok_or_else(|| {
        CliError::Config("power-step requires target_ser (for example --target-ser 1e-3)".into())
    })?;
    let mut t = Table::new(&[
        "m",
        "sigma_s",
        "rytov_variance",
        "variant",
        "target_ser",
        "delta_p_db",
        "error",
    ]);
    for op in cfg.operating_points()? {
        let rows: Vec<Vec<String>> = (cfg.m_bits_min..=cfg.m_bits_max)
            .into_par_iter()
            .flat_map_iter(|m| {
                [
                    (PowerStepVariant::Exact, "exact"),
                    (PowerStepVariant::Dense, "dense"),
                ]
                .into_iter()
                .map(move |(variant, label)| {
                    let [s, r] = point_cols(&op);
                    let mut row = vec![m.to_string(), s, r, label.to_string(), fmt_sci(target)];
                    match power_increase_for_next_bit(&op, m, target, variant) {
                        Ok(d) => row.extend([fmt_db(d), String::new()]),
                        Err(e) => row.extend([String::new(), e.to_string()]),
                    }
                    row
                })
            })
            .collect();
        t.failures += rows.iter().filter(|r| !r[6].is_empty()).count();
        t.rows.extend(rows);
    }
    Ok(t)
}

/// Monte Carlo estimates over the configured power grid.
pub fn cmd_mc(cfg: &RunConfig) -> Result<Table, CliError> {
    let powers = power_grid(cfg.p_dbm_min, cfg.p_dbm_max, cfg.p_dbm_step)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut t = Table::new(&[
        "sigma_s",
        "rytov_variance",
        "M",
        "p_dbm",
        "n_symbols",
        "symbol_errors",
        "bit_errors",
        "ser_hat",
        "ci95_ser",
        "ber_hat",
        "ci95_ber",
        "seed",
    ]);
    let mc = cfg.mc_config();
    for base in cfg.operating_points()? {
        for order in cfg.orders() {
            let op = base.with_order(order);
            for &p in &powers {
                let est = simulate(&op.with_power_dbm(p), &mc)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let [s, r] = point_cols(&op);
                t.rows.push(vec![
                    s,
                    r,
                    order.get().to_string(),
                    fmt_db(p),
                    est.n_symbols.to_string(),
                    est.symbol_errors.to_string(),
                    est.bit_errors.to_string(),
                    fmt_sci(est.ser_hat),
                    fmt_sci(est.ci95_ser),
                    fmt_sci(est.ber_hat),
                    fmt_sci(est.ci95_ber),
                    est.seed.to_string(),
                ]);
            }
        }
    }
    Ok(t)
}

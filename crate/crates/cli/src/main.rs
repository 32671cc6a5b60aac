use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fsolink_cli::{
    cmd_delta, cmd_mc, cmd_pdf, cmd_power_step, cmd_sweep, CliError, RunConfig, Table,
};

#[derive(Parser)]
#[command(
    name = "fsolink",
    version,
    about = "Error-rate analysis of M-PAM free-space optical links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Composite channel PDF on a logarithmic gain grid.
    Pdf(Args),
    /// Error-rate curves over a transmit-power sweep.
    Sweep(Args),
    /// Power gaps between approximations and the exact expressions.
    Delta(Args),
    /// Power needed per extra bit/symbol at a target SER.
    PowerStep(Args),
    /// Monte Carlo SER/BER estimates.
    Mc(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Configuration file (key = value per line).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Every configuration key, settable from the command line.
#[derive(clap::Args)]
#[command(rename_all = "snake_case")]
struct Overrides {
    #[arg(long)]
    wavelength_nm: Option<String>,
    #[arg(long)]
    link_distance_km: Option<String>,
    #[arg(long)]
    divergence_mrad: Option<String>,
    #[arg(long)]
    aperture_radius_m: Option<String>,
    #[arg(long)]
    alpha_w_per_a: Option<String>,
    #[arg(long)]
    beta_a_per_w: Option<String>,
    #[arg(long)]
    noise_sigma_a: Option<String>,
    #[arg(long)]
    attenuation_per_km: Option<String>,
    #[arg(long)]
    rytov_variance: Option<String>,
    #[arg(long)]
    jitter_sigma_m: Option<String>,
    #[arg(long)]
    jitter_angle_mrad: Option<String>,
    #[arg(long)]
    pairing: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p_dbm_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p_dbm_max: Option<String>,
    #[arg(long)]
    p_dbm_step: Option<String>,
    #[arg(long = "M", visible_alias = "m")]
    m: Option<String>,
    #[arg(long)]
    expressions: Option<String>,
    #[arg(long)]
    ber_threshold: Option<String>,
    #[arg(long)]
    ser_threshold: Option<String>,
    #[arg(long)]
    mc: Option<String>,
    #[arg(long)]
    n_symbols: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    mc_batch_size: Option<String>,
    #[arg(long)]
    mc_min_errors: Option<String>,
    #[arg(long)]
    pdf_h_min: Option<String>,
    #[arg(long)]
    pdf_h_max: Option<String>,
    #[arg(long)]
    pdf_points: Option<String>,
    #[arg(long)]
    m_bits_min: Option<String>,
    #[arg(long)]
    m_bits_max: Option<String>,
    /// Target SER for power-step (required there; no default).
    #[arg(long, visible_alias = "target-ser")]
    target_ser: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        [
            ("wavelength_nm", &self.wavelength_nm),
            ("link_distance_km", &self.link_distance_km),
            ("divergence_mrad", &self.divergence_mrad),
            ("aperture_radius_m", &self.aperture_radius_m),
            ("alpha_w_per_a", &self.alpha_w_per_a),
            ("beta_a_per_w", &self.beta_a_per_w),
            ("noise_sigma_a", &self.noise_sigma_a),
            ("attenuation_per_km", &self.attenuation_per_km),
            ("rytov_variance", &self.rytov_variance),
            ("jitter_sigma_m", &self.jitter_sigma_m),
            ("jitter_angle_mrad", &self.jitter_angle_mrad),
            ("pairing", &self.pairing),
            ("p_dbm_min", &self.p_dbm_min),
            ("p_dbm_max", &self.p_dbm_max),
            ("p_dbm_step", &self.p_dbm_step),
            ("M", &self.m),
            ("expressions", &self.expressions),
            ("ber_threshold", &self.ber_threshold),
            ("ser_threshold", &self.ser_threshold),
            ("mc", &self.mc),
            ("n_symbols", &self.n_symbols),
            ("seed", &self.seed),
            ("mc_batch_size", &self.mc_batch_size),
            ("mc_min_errors", &self.mc_min_errors),
            ("pdf_h_min", &self.pdf_h_min),
            ("pdf_h_max", &self.pdf_h_max),
            ("pdf_points", &self.pdf_points),
            ("m_bits_min", &self.m_bits_min),
            ("m_bits_max", &self.m_bits_max),
            ("target_ser", &self.target_ser),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (args, command): (&Args, fn(&RunConfig) -> Result<Table, CliError>) = match &cli.command {
        Command::Pdf(a) => (a, cmd_pdf),
        Command::Sweep(a) => (a, cmd_sweep),
        Command::Delta(a) => (a, cmd_delta),
        Command::PowerStep(a) => (a, cmd_power_step),
        Command::Mc(a) => (a, cmd_mc),
    };
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let cfg = RunConfig::parse_with_overrides(&text, &args.overrides.pairs())?;
    let table = command(&cfg)?;
    match &args.out {
        Some(path) => table.write_csv(fs::File::create(path)?)?,
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(table.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("fsolink: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

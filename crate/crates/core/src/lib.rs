//! Error-rate analysis for M-PAM intensity-modulated free-space-optical links.
//!
//! The channel gain is the product of a deterministic atmospheric loss, a
//! deterministic geometric-spread loss, a log-normal turbulence gain and a
//! pointing-error gain driven by Rayleigh-distributed jitter. On top of that
//! composite model this crate evaluates exact and approximate average bit and
//! symbol error rates, finds threshold crossings on power sweeps, and provides
//! a symbol-level Monte Carlo simulator used as an independent oracle.
//!
//! Modules:
//! - [`specfun`]: `erfc`, the Gaussian Q-function and the two `erfc`
//!   approximations used by the closed-form-ish expressions.
//! - [`quadrature`]: adaptive Gauss-Kronrod integration and a bracketing root
//!   finder.
//! - [`channel`]: link geometry, fading statistics, PDFs, moments, SNRs and
//!   random sampling of the composite gain.
//! - [`errorrates`]: conditional and average BER/SER expressions, Δ-gap and
//!   power-step analyses.
//! - [`montecarlo`]: Gray-mapped M-PAM simulation with ML detection.

pub mod channel;
pub mod errorrates;
pub mod montecarlo;
pub mod quadrature;
pub mod specfun;

mod error;

pub use error::{Error, Result};

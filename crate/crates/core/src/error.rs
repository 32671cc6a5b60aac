use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a function or density.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter violates its invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Adaptive quadrature ran out of subdivisions.
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error bound {error_bound:e})"
    )]
    NonConvergence {
        estimate: f64,
        error_bound: f64,
        subdivisions: usize,
    },

    /// The integrand or curve returned NaN or an infinity.
    #[error("non-finite value encountered at x = {at}")]
    NonFinite { at: f64 },

    /// The root finder was handed an interval that does not bracket the target.
    #[error("target {target:e} is not bracketed on [{lo}, {hi}] (values {f_lo:e}, {f_hi:e})")]
    Bracket {
        target: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// A sampled curve never reaches the requested threshold.
    #[error("curve does not cross {threshold:e} within its sampled range")]
    NoCrossing { threshold: f64 },

    /// The requested modulation order is not supported by this expression.
    #[error("unsupported modulation order M = {0}")]
    UnsupportedOrder(u32),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A time that does not belong to the time domain, or a negative time
    /// where only forward motion is defined.
    #[error("time domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Lookup in a tabulated driving system that has no matching entry.
    #[error("no tabulated transition for t = {t} from {from:?}")]
    NotTabulated { t: f64, from: Vec<f64> },

    #[error("vector is not in the kernel fiber (residual {residual:e})")]
    NotInKernel { residual: f64 },

    #[error("restricted map is numerically singular (margin {margin:e})")]
    Singular { margin: f64 },

    #[error(
        "cocycle factor law violated at t = {t}, s = {s}, omega = {omega:?} (relative residual {residual:e})"
    )]
    FactorLaw {
        t: f64,
        s: f64,
        omega: Vec<f64>,
        residual: f64,
    },

    /// The declared Lipschitz constant is beaten by a sampled difference quotient.
    #[error("declared Lip {declared} violated by quotient {quotient} at x = {x:?}, y = {y:?}")]
    LipschitzViolated {
        declared: f64,
        quotient: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    #[error("inadmissible constants: sigma = {sigma}, tau = {tau} (need sigma + tau < 1/2)")]
    Inadmissible { sigma: f64, tau: f64 },

    #[error("no geometric decay detected in the tail of the tau series at truncation {truncation}")]
    NoDecay { truncation: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Measured contraction ratio exceeded the theoretical factor.
    #[error("contraction violated at step {step}: ratio {ratio} > q = {q}")]
    ContractionViolated { step: usize, ratio: f64, q: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

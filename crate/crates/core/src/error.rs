use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MwipError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CFL violation: dt = {dt:.6e} exceeds {limit:.6e}; need nt >= {min_nt}")]
    Cfl { dt: f64, limit: f64, min_nt: usize },

    #[error("transport-augmented scheme unstable: amplification {amplification:.6e} > 1 (dt = {dt:.6e}, h = {h:.6e})")]
    TransportCfl { amplification: f64, dt: f64, h: f64 },

    #[error("resolution rule violated: h = {h} < 8 dx = {min_h}")]
    Resolution { h: f64, min_h: f64 },

    #[error("boundary partition rejected: {0}")]
    Partition(String),

    #[error("node {0} is not a boundary node")]
    InteriorNode(usize),

    #[error("off-grid query at t = {t}, x = {x:?} on a grid-sampled potential")]
    OffGrid { t: f64, x: Vec<f64> },

    #[error("compatibility f(0,x) = phi(x) violated by {mismatch:.3e}")]
    Compatibility { mismatch: f64 },

    #[error("representation mismatch: {0}")]
    Representation(String),

    #[error("non-finite value encountered at time level {level}")]
    NonFinite { level: usize },

    #[error("inadmissible test field: {0}")]
    Inadmissible(String),

    #[error("compact support mask required: {0}")]
    MissingSupport(String),

    #[error("stability violation: zero data produced a response of norm {lhs:.3e}")]
    StabilityViolation { lhs: f64 },
}

pub type Result<T> = std::result::Result<T, MwipError>;

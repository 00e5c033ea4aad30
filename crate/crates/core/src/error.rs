use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZooError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown symbol `{name}` at byte {pos}")]
    UnknownSymbol { pos: usize, name: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// A nested exponent argument left the guarded range.
    #[error("overflow risk at level {level}: exponent argument {argument:.6e} exceeds guard {limit}")]
    OverflowRisk {
        level: usize,
        argument: f64,
        limit: f64,
    },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("quadrature failed to converge (error estimate {estimate:.3e})")]
    QuadratureFailure { estimate: f64 },

    #[error("step failure at t = {t}: {msg}")]
    StepFailure { t: f64, msg: String },

    /// Integration aborted because the guard fired mid-flight.
    #[error("overflow risk during integration at t = {t}: {source}")]
    IntegrationOverflow {
        t: f64,
        #[source]
        source: Box<ZooError>,
    },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("config error: {0}")]
    Config(String),
}

impl ZooError {
    /// True for guard violations, including ones raised mid-integration.
    pub fn is_overflow_risk(&self) -> bool {
        matches!(
            self,
            ZooError::OverflowRisk { .. } | ZooError::IntegrationOverflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, ZooError>;

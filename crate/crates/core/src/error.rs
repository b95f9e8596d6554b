use thiserror::Error;

/// Errors surfaced by the engine. Numerical routines are total functions of
/// their inputs wherever possible; errors are reserved for domain violations
/// and genuinely degenerate inputs.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("state index {state} out of range for a model with {m} states")]
    StateOutOfRange { state: usize, m: usize },

    #[error("negative duration s = {s}")]
    NegativeDuration { s: f64 },

    #[error("interval [{t}, {end}] not covered by the grid (term n = {n})")]
    OutsideGrid { t: f64, end: f64, n: f64 },

    #[error("evaluation at t = {t} outside the grid domain [0, {n}]")]
    OutOfDomain { t: f64, n: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: term n = {n}, step h = {h} (n/h must be a positive integer)")]
    InvalidGrid { n: f64, h: f64 },

    #[error("premium pattern has zero shape-annuity EPV; the equation of value cannot determine the scale")]
    DegeneratePattern,

    #[error("non-finite value in quadrature: {0}")]
    NonFinite(String),

    #[error("occupancy matrix P(0, {t}) is singular (pivot {pivot:e}); cannot form the matrix retrospective value")]
    SingularOccupancy { t: f64, pivot: f64 },

    #[error("state-1 occupancy P_11(0, {t}) = {value:e} vanished; retrospective correction undefined")]
    VanishingOccupancy { t: f64, value: f64 },

    #[error("intensity out of state {state} is unbounded or non-finite on [{a}, {b}]")]
    UnboundedIntensity { state: usize, a: f64, b: f64 },

    #[error("intensity function is negative at t = {t}: {value}")]
    NegativeIntensity { t: f64, value: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EngineError>;

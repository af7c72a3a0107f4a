use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point lies on a wire segment (distance {distance:.3e} m)")]
    PointOnWire { distance: f64 },
    #[error("no trap minimum found: {0}")]
    NoTrapFound(String),
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("Padé denominator vanishes inside the fit domain near z = {at:.6e}")]
    PolesInDomain { at: f64 },
    #[error("ill-conditioned least-squares system: {0}")]
    IllConditioned(String),
    #[error("time {t:.6e} s outside trajectory domain [0, {t_f:.6e}] s")]
    OutOfDomain { t: f64, t_f: f64 },
    #[error("negative discriminant at t = {t:.6e} s: trajectory too aggressive for this trap")]
    NegativeDiscriminant { t: f64 },
    #[error("no admissible trap position within the continuity window at t = {t:.6e} s")]
    RootJump { t: f64 },
    #[error("integration step too large: frozen-trap energy drift {drift:.3e} per period")]
    StepTooLarge { drift: f64 },
    #[error("perturbation outside first-order regime: {0}")]
    PerturbationTooLarge(String),
    #[error("trap frequency must be positive, got {0:.6e} rad/s")]
    NonPositiveFrequency(f64),
    #[error("scaling factor collapsed (lambda = {lambda:.3e}) at t = {t:.6e} s")]
    CollapseDetected { t: f64, lambda: f64 },
    #[error("did not converge after {iterations} iterations ({detail})")]
    NotConverged { iterations: usize, detail: String },
    #[error("wave packet reached the grid boundary at t = {t:.6e} s (edge/peak density {ratio:.3e})")]
    GridOverflow { t: f64, ratio: f64 },
    #[error("series too short: {0}")]
    SeriesTooShort(String),
    #[error("no oscillation detected in series")]
    NoOscillation,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

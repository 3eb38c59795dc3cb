use thiserror::Error;

/// Failure modes of the simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{field}` must be positive (got {value})")]
    NonPositiveParameter { field: &'static str, value: f64 },

    #[error("at least one coupling omega12/omega13/omega23 must be positive")]
    NoCoupling,

    #[error("`times` is empty")]
    EmptyTimeGrid,

    #[error("time {time} in `times` is not after t0 = {t0}")]
    TimeNotAfterT0 { time: f64, t0: f64 },

    #[error("`{field}` is invalid: {reason}")]
    InvalidGrid { field: &'static str, reason: String },

    #[error("`{field}` span too small: {detail}")]
    QuadratureSpanTooSmall { field: &'static str, detail: String },

    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error(
        "degenerate coupling omega12={omega12}, omega13={omega13}, omega23={omega23}: \
         eigenvector determinant vanishes; perturb one coupling by at least 1e-6 relative"
    )]
    DegenerateCoupling { omega12: f64, omega13: f64, omega23: f64 },

    #[error("caustic at t={t} on {mode}: nearest singular time {nearest}")]
    CausticSingularity { t: f64, mode: &'static str, nearest: f64 },

    #[error("Gaussian kernel determinant |Delta(t)| = {magnitude:e} is singular at t={t}")]
    SingularKernel { t: f64, magnitude: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetricInput(f64),

    #[error("oracle box too small on axis {axis}: {detail}")]
    BoxTooSmall { axis: usize, detail: String },

    #[error("oracle time step too large: {0}")]
    StepTooLarge(String),
}

impl Error {
    /// Stable variant name, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveParameter { .. } => "NonPositiveParameter",
            Error::NoCoupling => "NoCoupling",
            Error::EmptyTimeGrid => "EmptyTimeGrid",
            Error::TimeNotAfterT0 { .. } => "TimeNotAfterT0",
            Error::InvalidGrid { .. } => "InvalidGrid",
            Error::QuadratureSpanTooSmall { .. } => "QuadratureSpanTooSmall",
            Error::Parse { .. } => "Parse",
            Error::UnknownKey(_) => "UnknownKey",
            Error::DegenerateCoupling { .. } => "DegenerateCoupling",
            Error::CausticSingularity { .. } => "CausticSingularity",
            Error::SingularKernel { .. } => "SingularKernel",
            Error::NonSymmetricInput(_) => "NonSymmetricInput",
            Error::BoxTooSmall { .. } => "BoxTooSmall",
            Error::StepTooLarge(_) => "StepTooLarge",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

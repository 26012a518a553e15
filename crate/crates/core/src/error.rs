use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite derivative at x = {point:?}")]
    NonFiniteDerivative { point: Vec<f64> },

    #[error("activation `{activation}` is not twice differentiable; second-order derivatives are unavailable")]
    UnsupportedSecondOrder { activation: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter count mismatch: expected {expected}, found {found}")]
    ParamCountMismatch { expected: usize, found: usize },

    #[error("loss is not finite ({value})")]
    NonFiniteLoss { value: f64 },

    #[error("layer widths must be positive")]
    ZeroWidth,

    #[error("sampling scheme `{scheme}` is not supported on {domain}")]
    UnsupportedScheme { scheme: String, domain: String },

    #[error("L^p exponent must satisfy p >= 1, got {0}")]
    InvalidExponent(f64),

    #[error("boundary collocation set is empty")]
    EmptyBoundary,

    #[error("gradient norm {norm:e} is below 1e-12; ratio undefined")]
    DegenerateGradient { norm: f64 },

    #[error("test function support (center {center:?}, radius {radius}) is not strictly inside the domain")]
    SupportOutsideDomain { center: Vec<f64>, radius: f64 },

    #[error("adaptive quadrature on [{a}, {b}] did not converge (error estimate {error_estimate:e})")]
    QuadratureFailure {
        a: f64,
        b: f64,
        error_estimate: f64,
    },

    #[error("training diverged at iteration {iter}")]
    DivergedTraining {
        iter: u64,
        /// Checkpoints recorded before the failure.
        report: Box<crate::train::MonitorReport>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

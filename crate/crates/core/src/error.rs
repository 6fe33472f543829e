use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration text failed to parse or validate. `path` names the offending field.
    #[error("invalid config at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("invalid argument `{name}`: {msg}")]
    InvalidArgument { name: &'static str, msg: String },

    #[error("integration failed at t = {t_reached}: {msg}")]
    Integration { t_reached: f64, msg: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty post-burn-in window (burn-in {burn_in}, horizon {horizon})")]
    EmptyWindow { burn_in: f64, horizon: f64 },

    #[error("degenerate decay fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }

    pub(crate) fn arg(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument { name, msg: msg.into() }
    }

    /// True for errors caused by user input (config or arguments) rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidArgument { .. } | Error::Json(_))
    }
}

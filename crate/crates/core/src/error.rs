use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{factor} level {level} out of range 1..={cardinality}")]
    CardinalityMismatch {
        factor: &'static str,
        level: usize,
        cardinality: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("data error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<u64>, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "adaptation failed in chain {chain}: every proposal rejected during warmup window \
         ending at iteration {iteration} (step size {step_size:.3e}, log density {log_density})"
    )]
    AdaptationFailure {
        chain: usize,
        iteration: usize,
        step_size: f64,
        log_density: f64,
    },

    #[error("trajectory never reaches the failure threshold (slope sum {slope_sum})")]
    NonFailingTrajectory { slope_sum: f64 },

    #[error("{failed} of {total} posterior draws failed ({reason})")]
    TooManyFailedDraws {
        failed: usize,
        total: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::Data {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn data_at(line: u64, message: impl Into<String>) -> Self {
        Error::Data {
            line: Some(line),
            message: message.into(),
        }
    }

    /// True for errors caused by malformed user input rather than by the statistics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::CardinalityMismatch { .. }
                | Error::Data { .. }
                | Error::Config(_)
                | Error::InvalidParams(_)
                | Error::Json(_)
                | Error::Io(_)
                | Error::Domain(_)
        )
    }
}

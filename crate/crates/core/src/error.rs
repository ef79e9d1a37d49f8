use thiserror::Error;

/// Errors raised anywhere in the navigation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("latitude {latitude_rad:.9} rad is too close to a pole for the local-level frame")]
    NearPole { latitude_rad: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("timestamps must be strictly increasing (got {current} after {previous})")]
    NonMonotonicTime { previous: f64, current: f64 },

    #[error("ill-posed trajectory segment #{index}: {reason}")]
    IllPosedSegment { index: usize, reason: String },

    #[error("negative odometer pulse increment {increment} at t = {t}")]
    NegativePulseIncrement { t: f64, increment: f64 },

    #[error("vehicle motion detected during stationary alignment ({0})")]
    MotionDetected(String),

    #[error("no stationary window at the start of the data (found {found_s:.1} s, need {required_s:.1} s)")]
    MissingStationaryWindow { found_s: f64, required_s: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("missing history: {0}")]
    MissingHistory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by the numerical content of the data rather than
    /// malformed inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::Numerical(_) | Error::NearPole { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

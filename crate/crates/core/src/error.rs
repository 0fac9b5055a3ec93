use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("schema error: missing or invalid field `{field}`")]
    Schema { field: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("rotation aliasing in interval {interval}: increment angle {angle_rad:.6} rad reaches pi")]
    Aliasing { interval: usize, angle_rad: f64 },

    #[error("no periodicity: {0}")]
    NoPeriodicity(String),

    #[error("integration became non-finite at t = {time} s")]
    Unstable { time: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn schema(field: impl Into<String>) -> Self {
        Error::Schema { field: field.into() }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

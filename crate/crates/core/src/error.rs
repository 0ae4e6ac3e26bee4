use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite objective at iteration {iteration}, coordinate {coordinate}")]
    NonFinite { iteration: usize, coordinate: usize },

    #[error("solver did not converge after {iterations} iterations (kkt residual {kkt_residual:e})")]
    NotConverged { iterations: usize, kkt_residual: f64 },

    #[error("no sign change found within +/-{limit} of {init}")]
    NoSignChange { init: f64, limit: f64 },

    #[error("pathological nuisance: {0}")]
    Pathological(String),

    #[error("slope not identified: |I| = {0:e}")]
    NotIdentified(f64),

    #[error("all cross-validation folds are degenerate")]
    DegenerateFolds,

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

/// Attach a stage label to the error side of a result.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate supervision: {0}")]
    DegenerateSupervision(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("graph construction error: {0}")]
    Graph(String),

    #[error("config key '{key}': {message}")]
    Config { key: String, message: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(expected: impl ToString, found: impl ToString) -> Error {
    Error::Shape {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

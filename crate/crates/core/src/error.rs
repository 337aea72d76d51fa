use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: String },

    #[error("line {line}: field `{field}` has the wrong type: {message}")]
    FieldType {
        line: usize,
        field: String,
        message: String,
    },

    #[error("line {line}: `{field}` value {value} is outside {bounds}")]
    Range {
        line: usize,
        field: String,
        value: String,
        bounds: &'static str,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("HTTP transport error ({status}): {message}")]
    Transport { status: u16, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("expected exactly {expected} items, got {actual}")]
    Arity { expected: usize, actual: usize },

    #[error("unknown report ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),

    #[error("report `{id}` is missing `{field}`")]
    MissingLabel { id: String, field: &'static str },

    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("schema mismatch: expected {expected}, got {actual}")]
    SchemaMismatch { expected: String, actual: String },

    #[error("unsupported artifact format version {found} (supported: {supported})")]
    Version { found: i64, supported: i64 },

    #[error("artifact invariant violated in `{section}`: {message}")]
    Invariant { section: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(section: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            section: section.into(),
            message: message.into(),
        }
    }

    /// True for failures of the filesystem or network rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Transport { .. })
    }
}

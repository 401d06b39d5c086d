use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("schema mismatch: model fingerprint {expected}, data fingerprint {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("model integrity error: {0}")]
    ModelIntegrity(String),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by invalid configuration, usage or schema,
    /// as opposed to runtime failures on the data itself.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Schema(_)
            | Error::SchemaMismatch { .. }
            | Error::Argument(_)
            | Error::Config(_)
            | Error::TomlDe(_) => true,
            Error::Scenario { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}

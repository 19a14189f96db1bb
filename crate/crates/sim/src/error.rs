use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] ed_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("report: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn field(field: &str, message: impl Into<String>) -> SimError {
    SimError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: &std::path::Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &std::path::Path) -> Result<T> {
        self.map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

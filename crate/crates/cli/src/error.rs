use serde::Serialize;

/// Failure classes of the command-line tool, each with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("ingestion error in {path}: {message}")]
    Ingestion { path: String, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    kind: &'a str,
    exit_code: i32,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    key: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn ingestion(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Ingestion {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 3,
            CliError::Ingestion { .. } => 4,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> String {
        let (kind, key, path) = match self {
            CliError::Config { key, .. } => ("config", Some(key.as_str()), None),
            CliError::Numerical(_) => ("numerical", None, None),
            CliError::Ingestion { path, .. } => ("ingestion", None, Some(path.as_str())),
            CliError::Io { path, .. } => ("io", None, Some(path.as_str())),
        };
        let record = ErrorRecord {
            kind,
            exit_code: self.exit_code(),
            message: self.to_string(),
            key,
            path,
        };
        serde_json::to_string(&serde_json::json!({ "error": record })).expect("error record serializes")
    }
}

/// Errors from the model: invalid inputs are configuration problems, the
/// rest are numerical failures.
impl From<mimcavity::Error> for CliError {
    fn from(e: mimcavity::Error) -> Self {
        use mimcavity::Error as E;
        match e {
            E::Geometry(m) => CliError::config("geometry", m),
            E::Membrane(m) => CliError::config("membrane", m),
            E::ModeSet(m) => CliError::config("modes", m),
            E::InvalidArgument(m) => CliError::config("sweep", m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

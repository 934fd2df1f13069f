//! CLI error type with process exit-code mapping.

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration (exit code 2).
    Config(String),
    /// File system problems (exit code 3).
    Io(String),
    /// Numerical or data failure inside the pipeline (exit code 4).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Maps core errors onto exit-code categories: file problems are i/o, the
/// rest are numerical/data failures.
impl From<tubetrack_core::Error> for CliError {
    fn from(e: tubetrack_core::Error) -> Self {
        use tubetrack_core::Error as E;
        match e {
            E::Io { .. } | E::Header { .. } | E::SizeMismatch { .. } => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

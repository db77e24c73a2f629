use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for bad input, 3 for an infeasible problem.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) | Self::Io { .. } => 2,
            Self::Infeasible(_) => 3,
        }
    }

    /// Prefixes the message with `ctx`, typically a file name.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            Self::Input(m) => Self::Input(format!("{ctx}: {m}")),
            Self::Infeasible(m) => Self::Infeasible(format!("{ctx}: {m}")),
            io => io,
        }
    }
}

impl From<vendingrd_core::Error> for CliError {
    fn from(e: vendingrd_core::Error) -> Self {
        match e {
            vendingrd_core::Error::Infeasible(m) => Self::Infeasible(m),
            other => Self::Input(other.to_string()),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Fit {
        context: String,
        #[source]
        source: fsvi::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration errors, 3 for data and file errors, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        use fsvi::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Fit { source, .. } => match source {
                E::Config(_) => 2,
                E::InvalidLabel { .. }
                | E::LengthMismatch { .. }
                | E::ZeroNorm
                | E::InsufficientData(_)
                | E::Rank(_)
                | E::Dimension { .. } => 3,
                _ => 4,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attach context to core errors.
pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, fsvi::Error> {
    fn context(self, what: impl Into<String>) -> Result<T> {
        self.map_err(|source| CliError::Fit {
            context: what.into(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let fit = |source| CliError::Fit {
            context: "fit".into(),
            source,
        };
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Data("x".into()).exit_code(), 3);
        assert_eq!(CliError::io("a", std::io::Error::other("gone")).exit_code(), 3);
        assert_eq!(fit(fsvi::Error::Config("x".into())).exit_code(), 2);
        assert_eq!(fit(fsvi::Error::InsufficientData("x".into())).exit_code(), 3);
        let numerical = fsvi::Error::NumericalFailure {
            iteration: 3,
            what: "bound is NaN".into(),
        };
        assert_eq!(fit(numerical).exit_code(), 4);
        assert_eq!(fit(fsvi::Error::Optimizer("x".into())).exit_code(), 4);
    }
}

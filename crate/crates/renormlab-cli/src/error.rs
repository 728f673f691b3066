use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing artifact {name} (looked in {})", path.display())]
    MissingArtifact { name: String, path: PathBuf },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown plot kind {0:?}")]
    UnknownKind(String),
    #[error("gate failed: {0}")]
    Gate(String),
    #[error(transparent)]
    Numerics(#[from] renormlab::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("malformed artifact {name}: {source}")]
    Json { name: String, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for a failed check of the mathematics, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use renormlab::Error as E;
        match self {
            CliError::Gate(_) => 2,
            CliError::Numerics(
                E::NestingViolation { .. }
                | E::DisjointnessViolation { .. }
                | E::PermutationViolation { .. }
                | E::ContainmentFailed(_)
                | E::ConditionViolated { .. },
            ) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Gate("x".into()).exit_code(), 2);
        assert_eq!(CliError::ConfigInvalid("x".into()).exit_code(), 1);
        assert_eq!(CliError::UnknownKind("x".into()).exit_code(), 1);
        assert_eq!(CliError::MissingArtifact { name: "a".into(), path: "b".into() }.exit_code(), 1);
        let nest = renormlab::Error::NestingViolation { word: "01".into() };
        assert_eq!(CliError::from(nest).exit_code(), 2);
        assert_eq!(CliError::from(renormlab::Error::ConditionViolated { lhs: 1.0, rhs: 0.5 }).exit_code(), 2);
        assert_eq!(CliError::from(renormlab::Error::NoPeriod2).exit_code(), 1);
    }
}

use std::path::{Path, PathBuf};

use crate::io::ParseErrors;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(ParseErrors),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
    #[error("invariant check failed: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] thor_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 usage, 2 data, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        use thor_core::Error as C;
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. } | Error::Parse(_) | Error::Data(_) => 2,
            Error::Invariant(_) => 3,
            Error::Core(c) => match c {
                C::Config(_) => 1,
                C::Vocabulary { .. }
                | C::Data(_)
                | C::SplitInfeasible(_)
                | C::FilterInfeasible(_)
                | C::Checkpoint(_) => 2,
                C::Shape { .. } | C::Index { .. } | C::Contract(_) => 3,
            },
        }
    }
}

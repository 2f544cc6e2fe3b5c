use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("index {index} out of range for {what} of size {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown {kind} id `{id}`")]
    Vocabulary { kind: &'static str, id: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("split infeasible: {0}")]
    SplitInfeasible(String),
    #[error("filter infeasible: {0}")]
    FilterInfeasible(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

use std::io;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by table, trie, codec and reader operations.
///
/// Contract violations (out-of-range indices, stale traversal indexes, dead
/// node handles) are programming errors and panic instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A table or trie ran out of room, or a requested size does not fit the
    /// arithmetic width.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Deleting or querying a key that is not present.
    #[error("not found: {0}")]
    NotFound(String),

    /// Malformed input data; `line` is 1-based (lines for FIMI/plain text,
    /// records for FASTQ).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// A bit-level code could not be decoded (e.g. truncated gamma code).
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub(crate) fn not_found(msg: impl Into<String>) -> Self {
        Error::NotFound(msg.into())
    }

    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

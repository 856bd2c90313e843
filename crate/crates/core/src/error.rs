use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range (valid range is 0..{count})")]
    Range { index: usize, count: usize },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("state error: {0}")]
    State(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parse error at line {line}, column {column} (byte offset {offset}): {msg}")]
    Parse {
        msg: String,
        line: usize,
        column: usize,
        offset: usize,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unsupported format version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Builds a [`Error::Parse`] from a byte offset inside `text`.
    pub fn parse_at_offset(text: &str, offset: usize, msg: impl Into<String>) -> Self {
        let offset = offset.min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
        Error::Parse {
            msg: msg.into(),
            line,
            column,
            offset,
        }
    }

    /// Builds a [`Error::Parse`] from a 1-based line/column position inside `text`.
    pub fn parse_at(text: &str, line: usize, column: usize, msg: impl Into<String>) -> Self {
        let offset = text
            .split_inclusive('\n')
            .take(line.saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + column.saturating_sub(1);
        Error::Parse {
            msg: msg.into(),
            line,
            column,
            offset,
        }
    }
}

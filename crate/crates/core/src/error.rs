use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (negative age,
    /// empty roster, non-positive observed count, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are valid individually but the computation has no meaningful answer.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A structural invariant of a domain value was violated.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    /// The regressor has no variance.
    #[error("singular design: {0}")]
    Singular(String),

    /// A CSV input was rejected. The report carries every diagnostic.
    #[error("{0}")]
    Parse(ParseReport),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One rejected input row.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    /// 1-based physical line number in the source file.
    pub line: u64,
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(col) => write!(f, "line {}, column `{}`: {}", self.line, col, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

/// Outcome of parsing one CSV input.
///
/// A fatal report never accompanies a usable value: loaders return it inside
/// [`Error::Parse`] instead.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    pub accepted: usize,
    pub rejections: Vec<Rejection>,
    pub warnings: Vec<String>,
    pub fatal: bool,
}

impl ParseReport {
    pub(crate) fn reject(&mut self, line: u64, column: Option<&str>, message: impl Into<String>) {
        self.rejections.push(Rejection {
            line,
            column: column.map(str::to_owned),
            message: message.into(),
        });
    }
}

impl fmt::Display for ParseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.fatal {
            write!(f, "input rejected")?;
        } else {
            write!(f, "input accepted ({} rows)", self.accepted)?;
        }
        for r in &self.rejections {
            write!(f, "\n  {r}")?;
        }
        for w in &self.warnings {
            write!(f, "\n  warning: {w}")?;
        }
        Ok(())
    }
}

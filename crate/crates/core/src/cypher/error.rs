use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CypherError {
    #[error("lex error at {pos}: {message}")]
    Lex { pos: Pos, message: String },
    #[error("parse error at {pos}: {message}")]
    Parse {
        pos: Pos,
        message: String,
        /// Sorted, deduplicated.
        expected: Vec<String>,
        found: String,
    },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("missing parameter ${0}")]
    MissingParam(String),
    #[error("page_size {requested} exceeds the maximum of {max}")]
    PageSizeTooLarge { requested: usize, max: usize },
    #[error("page_size must be at least 1")]
    PageSizeZero,
}

impl CypherError {
    pub(crate) fn lex(pos: Pos, message: impl Into<String>) -> Self {
        CypherError::Lex {
            pos,
            message: message.into(),
        }
    }

    pub fn pos(&self) -> Option<Pos> {
        match self {
            CypherError::Lex { pos, .. } | CypherError::Parse { pos, .. } => Some(*pos),
            _ => None,
        }
    }

    pub fn expected(&self) -> &[String] {
        match self {
            CypherError::Parse { expected, .. } => expected,
            _ => &[],
        }
    }

    /// Lex, parse and semantic errors describe the query text itself.
    pub fn is_syntax(&self) -> bool {
        matches!(
            self,
            CypherError::Lex { .. } | CypherError::Parse { .. } | CypherError::Semantic(_)
        )
    }
}

use thiserror::Error;

/// Errors raised anywhere in the dispatch pipeline.
///
/// Variants are grouped by the stage that produced them; [`Error::category`]
/// maps each one onto the CLI exit-code partition.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid field `{path}`: {message}")]
    Semantic { path: String, message: String },

    #[error("dimension mismatch for `{what}`: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("`{what}` = {value} is out of range ({range})")]
    Range {
        what: String,
        value: f64,
        range: String,
    },

    #[error("network error: {0}")]
    Network(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("variable x[{index}] has no finite bound; McCormick rows need [l, u]")]
    UnboundedVariable { index: usize },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("certification failed: max violation {max_violation:.3e} at {worst}")]
    Certification { max_violation: f64, worst: String },

    #[error("{0}")]
    Usage(String),
}

/// Coarse error category; each maps onto a distinct process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    Usage,
    Parse,
    Assembly,
    Solver,
    Certification,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::Parse => 3,
            ErrorCategory::Assembly => 4,
            ErrorCategory::Solver => 5,
            ErrorCategory::Certification => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Parse => "parse",
            ErrorCategory::Assembly => "assembly",
            ErrorCategory::Solver => "solver",
            ErrorCategory::Certification => "certification",
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. }
            | Error::Syntax { .. }
            | Error::Semantic { .. }
            | Error::Dimension { .. }
            | Error::Range { .. } => ErrorCategory::Parse,
            Error::Network(_) | Error::Assembly(_) | Error::UnboundedVariable { .. } => {
                ErrorCategory::Assembly
            }
            Error::Solver(_) => ErrorCategory::Solver,
            Error::Certification { .. } => ErrorCategory::Certification,
            Error::Usage(_) => ErrorCategory::Usage,
        }
    }

    pub(crate) fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Semantic {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn range(what: impl Into<String>, value: f64, range: impl Into<String>) -> Self {
        Error::Range {
            what: what.into(),
            value,
            range: range.into(),
        }
    }

    pub(crate) fn dimension(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            found,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("expected {expected} output(s) for the {setting} setting, got {got}")]
    Arity {
        setting: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown {kind} `{id}` referenced by {context}")]
    DanglingReference {
        kind: &'static str,
        id: String,
        context: String,
    },
    #[error("duplicate {kind} `{key}`")]
    Duplicate { kind: &'static str, key: String },
    #[error("total vote weight is zero for sample {0}")]
    ZeroWeight(String),
    #[error("no reviewer passed the qualification exam")]
    NoPassedReviewers,
    #[error("records mix settings: expected {expected}, found {found}")]
    SettingMismatch {
        expected: &'static str,
        found: &'static str,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

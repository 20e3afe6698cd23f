//! Errors raised by the process-calculus layer.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound variable `{0}` in value expression")]
    UnboundVariable(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("branch probability {0} outside (0,1]")]
    BranchProbability(f64),
    #[error("probabilities of action group `{prefix}` sum to {total}, expected 1")]
    ProbabilitySum { prefix: String, total: f64 },
    #[error("duplicate action prefix `{0}` in one summation")]
    DuplicatePrefix(String),
    #[error("identifier `{0}` defined twice")]
    DuplicateDefinition(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}, column {col}: {source}")]
    Invalid {
        line: usize,
        col: usize,
        source: ProcessError,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("undefined process identifier `{0}`")]
    UndefinedIdentifier(String),
    #[error("identifier `{name}` expects {expected} arguments, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("call arguments of `{0}` are not closed at unfolding time")]
    OpenCallArgument(String),
    #[error("recursion depth {0} exceeded while unfolding definitions")]
    UnfoldDepthExceeded(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

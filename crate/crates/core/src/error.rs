use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {from}-{to}: bus index out of range 1..={n}")]
    Topology { from: usize, to: usize, n: usize },
    #[error("line {from}-{to}: endpoints must differ")]
    SelfLoop { from: usize, to: usize },
    #[error("duplicate line between buses {0} and {1}")]
    DuplicateLine(usize, usize),
    #[error("line {from}-{to} has zero impedance")]
    SingularLine { from: usize, to: usize },
    #[error("line {from}-{to}: resistance must be non-negative and finite")]
    InvalidLine { from: usize, to: usize },
    #[error("line number {index} out of range 1..={count}")]
    LineIndex { index: usize, count: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("node type `{0}` is already registered")]
    DuplicateNodeType(String),
    #[error("unknown node type `{0}`")]
    UnknownNodeType(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("state access: {0}")]
    Selector(String),
    #[error("non-finite value in state at index {0}")]
    NonFinite(usize),
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("inconsistent initial condition: algebraic residual {0:e}")]
    Inconsistent(f64),
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
    #[error("grid is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

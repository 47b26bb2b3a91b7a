use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("code has precision {have}, need at least {need}")]
    Precision { have: usize, need: usize },

    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("graph parse error at line {line}: {msg}")]
    GraphParse { line: usize, msg: String },

    #[error("operation requires a symmetric adjacency matrix with zero diagonal")]
    Asymmetric,

    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("syntax error at position {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("division by zero during evaluation")]
    DivisionByZero,

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("state ({u}, {v}) lies outside the validity box")]
    OutsideBox { u: f64, v: f64 },

    #[error("missing sample for site {0}")]
    MissingSite(usize),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("degenerate fit window: {0}")]
    DegenerateFit(String),

    #[error("Picard iteration diverges: increment grew from {prev:e} to {next:e}")]
    PicardDiverges { prev: f64, next: f64 },
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NoConvergence { .. }
                | Error::Integration { .. }
                | Error::DegenerateFit(_)
                | Error::PicardDiverges { .. }
                | Error::DivisionByZero
        )
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the library.
///
/// Variants split into two families: model/argument validation problems and
/// numerical solver failures. [`Error::is_solver_failure`] tells them apart,
/// which the CLI uses to pick its exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ragged model: {0}")]
    Ragged(String),
    #[error("transition row ({state}, {action}) sums to {sum}, not 1")]
    RowSum { state: usize, action: usize, sum: f64 },
    #[error("transition p[{state}][{action}][{next}] = {value} is not a positive probability")]
    NonPositive {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    #[error("reward r[{state}][{action}] is not finite")]
    NonFiniteReward { state: usize, action: usize },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{what} index {index} out of range (bound {bound})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("count table must be empty before rigging")]
    NonEmptyCounts,
    #[error("i/o: {0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("relative value iteration did not converge after {iterations} iterations (span {span:e})")]
    NoConvergence { iterations: usize, span: f64 },
    #[error("root bracket failure: {0}")]
    Bracket(String),
    #[error("reference solver did not converge: {0}")]
    ReferenceNoConvergence(String),
}

impl Error {
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Bracket(_) | Error::ReferenceNoConvergence(_)
        )
    }
}

use alloc::string::String;

/// Errors raised by the solvers and checkers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid game specification: {0}")]
    InvalidSpec(String),
    #[error("invalid mixed action: weights must be >= 0 and sum to 1 (sum {sum}, min {min})")]
    InvalidMixedAction { sum: f64, min: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("set {0} does not fit inside the truncated domain")]
    DomainTooSmall(&'static str),
    #[error("generator loses monotonicity at node {node}: non-diagonal diffusion in d = 2 is unsupported")]
    MonotonicityViolation { node: usize },
    #[error("time step {dt} exceeds the chain stability bound {bound}")]
    TimeStepTooLarge { dt: f64, bound: f64 },
    #[error("policy iteration did not settle at theta level {level} (node {node}) after {iterations} sweeps")]
    PolicyIteration { level: usize, node: usize, iterations: usize },
    #[error("value bound violated at theta level {level}, node {node}: {value} outside [{lower}, {upper}]; refine the theta grid")]
    BoundViolation { level: usize, node: usize, value: f64, lower: f64, upper: f64 },
    #[error("linear system is not a nonsingular M-matrix (pivot {pivot} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },
    #[error("eigenvalue iteration stagnated after {iterations} steps (bracket width {gap})")]
    EigenStagnation { iterations: usize, gap: f64 },
    #[error("transition chain is reducible")]
    ReducibleChain,
    #[error("C0 is empty on this grid; enlarge the domain")]
    EmptyC0,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = core::result::Result<T, Error>;

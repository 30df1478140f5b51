use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("B must divide n (B = {blocks}, n = {cells})")]
    BlocksDoNotDivide { blocks: usize, cells: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid reference parameter: coefficient {index} is {value}, must be > 0")]
    InvalidReference { index: usize, value: f64 },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("parameter reference mu[{index}] is out of bounds for p = {p}")]
    IndexOutOfBounds { index: usize, p: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator A[{index}] is not symmetric (max asymmetry {asymmetry:e}, max entry {scale:e})")]
    Asymmetric { index: usize, asymmetry: f64, scale: f64 },

    #[error("coefficient {which}[{index}] evaluated to non-finite value {value}")]
    Evaluation { which: &'static str, index: usize, value: f64 },

    #[error("truth solver breakdown at mu = {mu:?}: {detail}")]
    SolverBreakdown { mu: Vec<f64>, detail: String },

    #[error("truth solver stalled at relative residual {residual:e} after {iterations} iterations (mu = {mu:?})")]
    NotConverged { mu: Vec<f64>, residual: f64, iterations: usize },

    #[error("dense eigensolve refused: dimension {dim} exceeds the desk-scale limit {limit}; use sampled stability bounds instead")]
    TooLarge { dim: usize, limit: usize },

    #[error("requested N = {requested} exceeds the numerical rank; achievable N = {rank}")]
    Rank { requested: usize, rank: usize },

    #[error("quadratic form is negative ({value:e}) beyond round-off; operator is not symmetric positive semidefinite")]
    NegativeForm { value: f64 },

    #[error("fingerprint mismatch: expected {expected:016x}, found {found:016x}")]
    Fingerprint { expected: u64, found: u64 },

    #[error("singular reduced system (theta_a = {theta:?})")]
    SingularReduced { theta: Vec<f64> },

    #[error("no rigorous coercivity lower bound: the problem is not parametrically coercive; build the basis with POD instead")]
    NotCoercive,
}

impl Error {
    /// True for errors caused by user input rather than numerical failure.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::BlocksDoNotDivide { .. }
                | Error::Config(_)
                | Error::InvalidReference { .. }
                | Error::Syntax { .. }
                | Error::IndexOutOfBounds { .. }
                | Error::Dimension(_)
                | Error::Asymmetric { .. }
                | Error::Rank { .. }
                | Error::TooLarge { .. }
                | Error::NotCoercive
                | Error::Fingerprint { .. }
        )
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("variable `{name}` at {pos} is out of scope")]
    VariableOutOfScope { name: String, pos: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible domain: {0}")]
    InfeasibleDomain(String),

    #[error("bound order violation at index {index}: lower {lower} > upper {upper} (prefix {prefix:?})")]
    BoundOrderViolation {
        index: usize,
        lower: f64,
        upper: f64,
        prefix: Vec<f64>,
    },

    #[error("gap budget violation at index {index}: upper - lower = {gap} exceeds c = {budget}")]
    GapBudgetViolation { index: usize, gap: f64, budget: f64 },

    #[error("method unsupported: {0}")]
    MethodUnsupported(String),

    #[error("method infeasible: {0}")]
    MethodInfeasible(String),

    #[error("no truncation level certifies tail mass below {epsilon}")]
    NoSuchN { epsilon: f64 },

    #[error("monotonicity violated at m = {m}, state {state}")]
    MonotonicityViolated { m: usize, state: usize },

    #[error("domination violated at m = {m}, state {state}")]
    DominationViolated { m: usize, state: usize },

    #[error("non-convergence: {0}")]
    NonConvergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, used in CLI error objects and FFI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::VariableOutOfScope { .. } => "VariableOutOfScope",
            Error::Domain(_) => "DomainError",
            Error::InfeasibleDomain(_) => "InfeasibleDomain",
            Error::BoundOrderViolation { .. } => "BoundOrderViolation",
            Error::GapBudgetViolation { .. } => "GapBudgetViolation",
            Error::MethodUnsupported(_) => "MethodUnsupported",
            Error::MethodInfeasible(_) => "MethodInfeasible",
            Error::NoSuchN { .. } => "NoSuchN",
            Error::MonotonicityViolated { .. } => "MonotonicityViolated",
            Error::DominationViolated { .. } => "DominationViolated",
            Error::NonConvergence(_) => "NonConvergence",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Io(_) => "IoError",
        }
    }

    /// CLI exit status: 2 for spec and I/O problems, 3 for numerical
    /// failures, 4 for failed convergence-harness contracts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::VariableOutOfScope { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidSpec(_)
            | Error::Io(_) => 2,
            Error::Domain(_)
            | Error::InfeasibleDomain(_)
            | Error::BoundOrderViolation { .. }
            | Error::GapBudgetViolation { .. }
            | Error::MethodUnsupported(_)
            | Error::MethodInfeasible(_)
            | Error::NoSuchN { .. } => 3,
            Error::MonotonicityViolated { .. } | Error::DominationViolated { .. } | Error::NonConvergence(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidSpec(e.to_string())
    }
}

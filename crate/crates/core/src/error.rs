use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),

    #[error("invalid fork point: L_a = {fork_point} must lie in 1..={authentic_length}")]
    InvalidFork {
        fork_point: usize,
        authentic_length: usize,
    },

    #[error("invalid device partition: {0}")]
    InvalidPartition(String),

    #[error("outcome space too large: {required} outcomes needed, cap is {cap}")]
    OutcomeSpaceTooLarge { required: u128, cap: u64 },

    #[error("partial derivatives unavailable: {0}")]
    PartialsUnavailable(String),

    #[error("singular weight: phi_a vanishes on outcome #{outcome} where phi_0 > 0")]
    SingularWeight { outcome: u64 },

    #[error("singular Fisher information block J_xi (condition number {condition:e})")]
    SingularFim { condition: f64 },

    #[error("alignment residual unavailable: {0}")]
    ResidualUnavailable(String),

    #[error("optimization failed: every start failed ({} starts)", trace.len())]
    OptimizationFailed { trace: Vec<String> },

    #[error("unsupported attack-parameter dimension {0}")]
    UnsupportedDimension(usize),

    #[error("relaxation infeasible: total weight {total} < 1")]
    InfeasibleRelaxation { total: f64 },

    #[error("degenerate information: {0}")]
    DegenerateInformation(String),

    #[error("certificate check failed: {0}")]
    CertificateFailed(String),

    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::InvalidParameter(_)
            | Error::InvalidFork { .. }
            | Error::InvalidPartition(_)
            | Error::UnsupportedDimension(_) => 2,
            Error::OutcomeSpaceTooLarge { .. } => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

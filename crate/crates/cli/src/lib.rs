//! Batch front end: configuration, subcommands and artifact emission.

pub mod commands;
pub mod config;
pub mod report;

pub use config::RunConfig;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const HYPOTHESIS: i32 = 2;
    pub const NO_SOLUTION: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("no solution: {0}")]
    NoSolution(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) => exit::CONFIG,
            Self::Hypothesis(_) => exit::HYPOTHESIS,
            Self::NoSolution(_) => exit::NO_SOLUTION,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<homoclinic::Error> for CliError {
    fn from(e: homoclinic::Error) -> Self {
        use homoclinic::Error as E;
        match e {
            E::HypothesisViolation(m) => Self::Hypothesis(m),
            E::InvalidArgument(_)
            | E::GridMismatch(_)
            | E::Parse { .. }
            | E::WindowOutOfDomain { .. } => Self::Config(e.to_string()),
            other => Self::NoSolution(other.to_string()),
        }
    }
}

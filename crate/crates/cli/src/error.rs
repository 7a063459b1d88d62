use std::fmt;

/// Failures mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input data, flags or configuration: exit code 1.
    Input(String),
    /// A fit or other computation failed: exit code 2.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<polycor::Error> for CliError {
    fn from(e: polycor::Error) -> Self {
        use polycor::Error::*;
        let message = match &e {
            EmptyCategory { margin, index } => format!("{margin} category {} has no observations", index + 1),
            NearZeroCell { row, col } => format!("model probability of cell ({}, {}) is numerically zero", row + 1, col + 1),
            other => other.to_string(),
        };
        match e {
            NoConvergence(_) | NearZeroCell { .. } | SingularM { .. } | NotPositiveDefinite => CliError::Numerical(message),
            _ => CliError::Input(message),
        }
    }
}

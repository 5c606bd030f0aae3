use thiserror::Error;

/// CLI failures, sorted into the two documented exit codes: 2 for bad input,
/// 3 for solver trouble.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<pldc::Error> for CliError {
    fn from(e: pldc::Error) -> Self {
        use pldc::Error::*;
        match e {
            NonFinite(_) | Infeasible(_) | Unbounded | NumericalFailure(_) => {
                CliError::Solver(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("malformed JSON: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("malformed CSV: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_input_from_solver() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(pldc::Error::EmptyDataset).exit_code(), 2);
        assert_eq!(CliError::from(pldc::Error::NonFinite(3)).exit_code(), 3);
        assert_eq!(CliError::from(pldc::Error::Unbounded).exit_code(), 3);
        assert_eq!(CliError::from(pldc::Error::Infeasible(0.5)).exit_code(), 3);
    }
}

use qnn_codec::CodecError;
use qnn_core::{ExecError, FormatError, QuantizeError, TensorError};

/// Exit code classes: 2 usage, 3 format, 4 numeric.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Format(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Format(_) => "format",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Format(format!("{}: {e}", path.display()))
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Format(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        CliError::Format(e.to_string())
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::Invalid(_) | ExecError::Input { .. } => CliError::Format(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<QuantizeError> for CliError {
    fn from(e: QuantizeError) -> Self {
        match e {
            QuantizeError::Exec(inner) => inner.into(),
            QuantizeError::NotIntegerWidth(_) | QuantizeError::NotFloatGraph(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::Exec(inner) => inner.into(),
            CodecError::Tensor(inner) => inner.into(),
            CodecError::BlockOutside { .. }
            | CodecError::OutOfFrame { .. }
            | CodecError::Disallowed { .. }
            | CodecError::MissingPlane(_) => CliError::Usage(e.to_string()),
            _ => CliError::Format(e.to_string()),
        }
    }
}

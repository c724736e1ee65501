use thiserror::Error;

/// Everything a command can fail with.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Domain(#[from] diffgeo::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid usage: {0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// Machine-readable code; core errors keep their own codes.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Domain(e) => e.code(),
            CliError::Config(_) => "invalid_config",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io_error",
            CliError::CheckFailed(_) => "check_failed",
        }
    }

    /// 2 for usage and configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Domain(diffgeo::Error::InvalidInput(_)) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "code": self.code(), "message": self.to_string() } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Domain(diffgeo::Error::DegenerateConfig("x".into())).exit_code(), 1);
        assert_eq!(CliError::Domain(diffgeo::Error::OrderTooLow { order: 0.5, min: 1.0 }).exit_code(), 1);
        let j = CliError::Domain(diffgeo::Error::OutOfChart("x".into())).to_json();
        assert_eq!(j["error"]["code"], "out_of_chart");
    }
}

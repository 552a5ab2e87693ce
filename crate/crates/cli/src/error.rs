use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    /// Rows of an input file that failed schema checks.
    #[error("{file}: {}", .rows.join("; "))]
    Schema { file: PathBuf, rows: Vec<String> },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] rfr_sabr::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use rfr_sabr::Error as E;
        match self {
            CliError::Model(E::NoConvergence { .. } | E::Bracket { .. } | E::NotMonotone(_)) => {
                EXIT_NUMERICAL
            }
            _ => EXIT_CONFIG,
        }
    }

    pub fn kind(&self) -> &'static str {
        use rfr_sabr::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Schema { .. } => "schema",
            CliError::Io { .. } => "io",
            CliError::Model(E::NoConvergence { .. }) => "no_convergence",
            CliError::Model(E::Bracket { .. }) => "bracket",
            CliError::Model(E::NotMonotone(_)) => "not_monotone",
            CliError::Model(E::InvalidQuote { .. }) => "invalid_quote",
            CliError::Model(_) => "domain",
        }
    }

    /// One-line JSON error object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_separate_schema_from_numerics() {
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_CONFIG);
        let bracket = CliError::Model(rfr_sabr::Error::Bracket {
            target: 1.0,
            low: 0.0,
            high: 0.5,
        });
        assert_eq!(bracket.exit_code(), EXIT_NUMERICAL);
        let quote = CliError::Model(rfr_sabr::Error::InvalidQuote {
            index: 2,
            reason: "bad".into(),
        });
        assert_eq!(quote.exit_code(), EXIT_CONFIG);
        let v: serde_json::Value = serde_json::from_str(&bracket.to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "bracket");
    }
}

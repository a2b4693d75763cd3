use std::fmt;

use subspace_core::Error;

/// A failed command with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INFEASIBLE,
            message: message.into(),
        }
    }

    /// Prefixes the message with the plan stage that failed.
    pub fn in_stage(self, index: usize, name: &str) -> Self {
        Self {
            code: self.code,
            message: format!("stage {index} ({name}): {}", self.message),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Dimension(_) | Error::Format(_) | Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
            Error::BdInfeasible { .. } => EXIT_INFEASIBLE,
            Error::NotPsd { .. }
            | Error::Singular { .. }
            | Error::DegenerateSamples
            | Error::Unbounded { .. }
            | Error::Numerical(_) => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::config(e.to_string())
    }
}

pub type Outcome<T> = Result<T, Failure>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(Failure::from(Error::Config("x".into())).code, 2);
        let bd = Error::BdInfeasible {
            cluster: 0,
            available: 1,
            required: 2,
        };
        assert_eq!(Failure::from(bd).code, 3);
        assert_eq!(Failure::from(Error::Numerical("x".into())).code, 4);
        let f = Failure::infeasible("floor").in_stage(2, "optimize");
        assert_eq!(f.message, "stage 2 (optimize): floor");
        assert_eq!(f.code, 3);
    }
}

use std::fmt;
use std::path::Path;

use srtr_core::dsl::DslError;
use srtr_core::repair::RepairError;
use srtr_core::sim::{ExperimentError, SimError};
use srtr_core::solver::SmtError;

/// An error reported as `error: <kind>: <detail>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: String,
    pub detail: String,
}

impl CliError {
    pub fn new(kind: &str, detail: impl Into<String>) -> Self {
        CliError { kind: kind.into(), detail: detail.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("IOError", format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, whatever the detail contains
        let detail = self.detail.lines().map(str::trim).collect::<Vec<_>>().join(" ");
        write!(f, "{}: {detail}", self.kind)
    }
}

impl std::error::Error for CliError {}

macro_rules! from_kinded {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(e.kind(), e.to_string())
            }
        }
    )*};
}

from_kinded!(DslError, RepairError, SimError, SmtError);

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Sim(e) => e.into(),
            ExperimentError::Repair(e) => e.into(),
        }
    }
}

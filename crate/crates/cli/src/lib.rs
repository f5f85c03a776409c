//! Command implementations and the annotation service behind the `srtr`
//! binary.

pub mod commands;
mod error;
pub mod service;

pub use error::CliError;

use std::path::Path;

use srtr_core::dsl::{parse_corrections, parse_params, parse_rsm, parse_trace, Correction, ParamMap, Trace, TransitionFn};
use srtr_core::repair::RepairResult;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// The repair report as written by `srtr repair` and returned by
/// `POST /api/repair`.
pub fn report_text(r: &RepairResult) -> String {
    let mut s = serde_json::to_string_pretty(&r.report_json()).expect("report serializes");
    s.push('\n');
    s
}

/// A state machine with its parameters, one trace and the corrections made
/// so far.
#[derive(Debug, Clone)]
pub struct Session {
    pub source: String,
    pub rsm: TransitionFn,
    pub params: ParamMap,
    pub trace: Trace,
    pub corrections: Vec<Correction>,
    pub history: Vec<RepairResult>,
}

impl Session {
    pub fn from_sources(
        source: &str,
        params: &str,
        trace: &str,
        corrections: Option<&str>,
    ) -> Result<Session, CliError> {
        let rsm = parse_rsm(source)?;
        let params = parse_params(params, &rsm)?;
        let trace = parse_trace(trace, &rsm)?;
        let corrections = match corrections {
            Some(c) => parse_corrections(c, &rsm)?,
            None => vec![],
        };
        for c in &corrections {
            if trace.get(c.t).is_none() {
                return Err(CliError::new("IndexError", format!("correction at t={} is outside the trace", c.t)));
            }
        }
        Ok(Session { source: source.to_string(), rsm, params, trace, corrections, history: vec![] })
    }

    pub fn load(rsm: &Path, params: &Path, trace: &Path, corrections: Option<&Path>) -> Result<Session, CliError> {
        let corrections = corrections.map(read_text).transpose()?;
        Session::from_sources(&read_text(rsm)?, &read_text(params)?, &read_text(trace)?, corrections.as_deref())
    }
}

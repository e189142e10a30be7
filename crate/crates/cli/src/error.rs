//! Failure classes and their exit codes.

use serde_json::{json, Value};
use superres::Error;

/// A failed command: usage problems exit with 2, numerical ones with 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical { kind: &'static str, message: String, detail: Value },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CliError::Usage(m) => json!({
                "schema_version": crate::output::SCHEMA_VERSION,
                "error": { "kind": "usage", "message": m },
            }),
            CliError::Numerical { kind, message, detail } => json!({
                "schema_version": crate::output::SCHEMA_VERSION,
                "error": { "kind": kind, "message": message, "detail": detail },
            }),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let numerical = |kind, detail| CliError::Numerical { kind, message: message.clone(), detail };
        match &e {
            Error::Singular {
                condition,
                null_direction,
                labels,
            } => numerical(
                "singular",
                json!({ "condition": condition, "null_direction": null_direction, "labels": labels }),
            ),
            Error::NoConvergence(_) => numerical("no-convergence", Value::Null),
            Error::SingularIntegrand { at } => numerical("singular-integrand", json!({ "at": at })),
            Error::IndeterminateSeries { d } => numerical("indeterminate-series", json!({ "d": d })),
            Error::InsufficientGrid { edge, tolerance } => {
                numerical("insufficient-grid", json!({ "edge": edge, "tolerance": tolerance }))
            }
            Error::GridTooNarrow { half_width, required } => numerical(
                "grid-too-narrow",
                json!({ "half_width": half_width, "required": required }),
            ),
            Error::Domain(_)
            | Error::InvalidExponents(_)
            | Error::NonMonotoneSchedule
            | Error::Parse(_)
            | Error::Io(_) => CliError::Usage(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv error: {e}"))
    }
}

//! Scheduler job events, one JSON object per line.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobEventKind {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobEvent {
    pub job_id: String,
    pub user: String,
    pub nodes: Vec<String>,
    pub event: JobEventKind,
    #[serde(rename = "ts_ns")]
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JobEventError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("job event must be a JSON object")]
    NotAnObject,
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("key {key:?} must be {expected}")]
    WrongType { key: &'static str, expected: &'static str },
    #[error("unknown event kind {0:?} (expected \"start\" or \"end\")")]
    UnknownEvent(String),
    #[error("key \"nodes\" must be non-empty on start events")]
    EmptyNodes,
}

impl JobEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("job events always serialize")
    }
}

pub fn parse_job_event(json_text: &str) -> Result<JobEvent, JobEventError> {
    let value: Value = serde_json::from_str(json_text).map_err(|e| JobEventError::Json(e.to_string()))?;
    let obj = value.as_object().ok_or(JobEventError::NotAnObject)?;

    let str_key = |key: &'static str| -> Result<String, JobEventError> {
        match obj.get(key) {
            None => Err(JobEventError::MissingKey(key)),
            Some(Value::String(s)) => Ok(s.clone()),
            // Numeric job ids are common in scheduler exports.
            Some(Value::Number(n)) if key == "job_id" => Ok(n.to_string()),
            Some(_) => Err(JobEventError::WrongType {
                key,
                expected: "a string",
            }),
        }
    };

    // The event kind is validated first so an unknown kind is reported even
    // when the rest of the object is incomplete.
    let event = match str_key("event")?.as_str() {
        "start" => JobEventKind::Start,
        "end" => JobEventKind::End,
        other => return Err(JobEventError::UnknownEvent(other.to_owned())),
    };
    let job_id = str_key("job_id")?;
    let user = str_key("user")?;
    let nodes = match obj.get("nodes") {
        None => return Err(JobEventError::MissingKey("nodes")),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_owned))
            .collect::<Option<Vec<_>>>()
            .ok_or(JobEventError::WrongType {
                key: "nodes",
                expected: "an array of strings",
            })?,
        Some(_) => {
            return Err(JobEventError::WrongType {
                key: "nodes",
                expected: "an array of strings",
            })
        }
    };
    let timestamp = match obj.get("ts_ns") {
        None => return Err(JobEventError::MissingKey("ts_ns")),
        Some(v) => v.as_i64().ok_or(JobEventError::WrongType {
            key: "ts_ns",
            expected: "an integer",
        })?,
    };
    if event == JobEventKind::Start && nodes.is_empty() {
        return Err(JobEventError::EmptyNodes);
    }
    Ok(JobEvent {
        job_id,
        user,
        nodes,
        event,
        timestamp,
    })
}

/// Parses newline-delimited job events. Blank lines are skipped; errors
/// carry 1-based line numbers.
pub fn parse_job_events(text: &str) -> (Vec<JobEvent>, Vec<(usize, JobEventError)>) {
    let mut ok = Vec::new();
    let mut errs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_job_event(line) {
            Ok(e) => ok.push(e),
            Err(e) => errs.push((i + 1, e)),
        }
    }
    (ok, errs)
}

//! Telemetry wire formats: line protocol for metrics, JSON lines for job
//! events.

mod job;
pub(crate) mod line;

pub use job::{parse_job_event, parse_job_events, JobEvent, JobEventError, JobEventKind};
pub use line::{
    parse_batch, parse_line, to_batch, write_line, BatchParse, FieldValue, MetricSample, ParseError, ParseErrorKind,
    MAX_STRING_FIELD_LEN,
};

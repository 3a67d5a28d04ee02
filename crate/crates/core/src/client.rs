//! Minimal HTTP client for the service endpoints.

use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::service::{ClusterSnapshot, IngestReport, StreamEvent};
use crate::sim::TickOutput;
use crate::wire::JobEvent;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("bad response body: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    /// `base` is e.g. `http://127.0.0.1:8086`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_owned(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn send(&self, req: reqwest::RequestBuilder) -> Result<String, ClientError> {
        let resp = req.send().await?;
        let status = resp.status();
        let body = resp.text().await?;
        if !status.is_success() {
            return Err(ClientError::Status {
                status: status.as_u16(),
                body,
            });
        }
        Ok(body)
    }

    async fn post<T: DeserializeOwned>(&self, path: &str, body: String) -> Result<T, ClientError> {
        let text = self
            .send(self.http.post(format!("{}{path}", self.base)).body(body))
            .await?;
        Ok(serde_json::from_str(&text)?)
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let text = self.send(self.http.get(format!("{}{path}", self.base))).await?;
        Ok(serde_json::from_str(&text)?)
    }

    pub async fn ingest(&self, line_protocol: String) -> Result<IngestReport, ClientError> {
        self.post("/ingest", line_protocol).await
    }

    pub async fn jobs(&self, events: &[JobEvent]) -> Result<IngestReport, ClientError> {
        let body: String = events.iter().map(|e| e.to_json_line() + "\n").collect();
        self.post("/jobs", body).await
    }

    /// Sends one simulator tick: job events first, then telemetry.
    pub async fn push_tick(&self, tick: &TickOutput) -> Result<IngestReport, ClientError> {
        if !tick.job_events.is_empty() {
            self.jobs(&tick.job_events).await?;
        }
        self.ingest(tick.telemetry.clone()).await
    }

    pub async fn snapshot(&self) -> Result<ClusterSnapshot, ClientError> {
        self.get("/snapshot").await
    }

    pub async fn healthz(&self) -> Result<serde_json::Value, ClientError> {
        self.get("/healthz").await
    }

    /// Returns the JSON response: `name`, `columns`, `rows`, `table`.
    pub async fn query(&self, text: &str, now: Option<i64>) -> Result<serde_json::Value, ClientError> {
        let path = match now {
            Some(t) => format!("/query?now={t}"),
            None => "/query".to_owned(),
        };
        self.post(&path, text.to_owned()).await
    }

    pub async fn reload(&self, thresholds_json: &str) -> Result<serde_json::Value, ClientError> {
        self.post("/reload", thresholds_json.to_owned()).await
    }

    /// Opens `GET /stream`.
    pub async fn stream(&self) -> Result<EventStream, ClientError> {
        let resp = self.http.get(format!("{}/stream", self.base)).send().await?;
        if !resp.status().is_success() {
            let status = resp.status().as_u16();
            return Err(ClientError::Status {
                status,
                body: resp.text().await.unwrap_or_default(),
            });
        }
        Ok(EventStream { resp, buf: Vec::new() })
    }
}

/// Reader over the NDJSON event stream.
pub struct EventStream {
    resp: reqwest::Response,
    buf: Vec<u8>,
}

impl EventStream {
    /// Next event, or `None` once the server closes the stream.
    pub async fn next_event(&mut self) -> Result<Option<StreamEvent>, ClientError> {
        loop {
            if let Some(pos) = self.buf.iter().position(|b| *b == b'\n') {
                let line: Vec<u8> = self.buf.drain(..=pos).collect();
                let line = &line[..line.len() - 1];
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                return Ok(Some(serde_json::from_slice(line)?));
            }
            match self.resp.chunk().await? {
                Some(chunk) => self.buf.extend_from_slice(&chunk),
                None => return Ok(None),
            }
        }
    }
}

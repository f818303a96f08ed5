//! JSON-over-HTTP client for an external model service.
//!
//! Endpoints: `POST /v1/qg`, `POST /v1/qa`, `POST /v1/embed`. Span offsets
//! on the wire count Unicode scalar values; they are converted to byte
//! offsets at this boundary.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use crate::error::{Error, Result};

use super::{
    EmbedRequest, EmbedResponse, Embedder, QaOutcome, QaRequest, QaResponse, QgRequest,
    QgResponse, QuestionGenerator, SpanAnswerer,
};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

pub struct HttpBackend {
    base_url: String,
    agent: Agent,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("base_url", &self.base_url)
            .finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct WireQaAnswer {
    answer: String,
    score: f64,
    context_index: usize,
    char_start: usize,
    char_end: usize,
}

#[derive(Serialize)]
struct WireQgRequest<'a> {
    context: &'a str,
    topic: &'a str,
    num_samples: usize,
    top_p: f64,
    seed: u64,
}

fn char_to_byte(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    s.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(s.len()))
        .nth(char_idx)
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, timeout_ms: u64) -> Self {
        let config = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .http_status_as_error(true)
            .build();
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent: Agent::new_with_config(config),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base_url);
        let payload = serde_json::to_string(body)?;
        let mut resp = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(payload.as_str())
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Protocol(format!("POST {url}: malformed response: {e}")))
    }
}

impl QuestionGenerator for HttpBackend {
    fn generate_pairs(&self, req: &QgRequest) -> Result<QgResponse> {
        req.validate()?;
        let resp: QgResponse = self.post(
            "/v1/qg",
            &WireQgRequest {
                context: &req.context,
                topic: &req.topic,
                num_samples: req.num_samples,
                top_p: req.top_p,
                seed: req.seed,
            },
        )?;
        resp.check(req)?;
        Ok(resp)
    }
}

impl SpanAnswerer for HttpBackend {
    fn answer_span(&self, req: &QaRequest) -> Result<QaOutcome> {
        req.validate()?;
        let raw: serde_json::Value = self.post("/v1/qa", req)?;
        if raw.get("no_answer").and_then(serde_json::Value::as_bool) == Some(true) {
            return Ok(QaOutcome::NoAnswer);
        }
        let wire: WireQaAnswer = serde_json::from_value(raw)
            .map_err(|e| Error::Protocol(format!("malformed /v1/qa response: {e}")))?;
        let ctx = req.contexts.get(wire.context_index).ok_or_else(|| {
            Error::Protocol(format!("context_index {} out of range", wire.context_index))
        })?;
        let (Some(start), Some(end)) = (
            char_to_byte(ctx, wire.char_start),
            char_to_byte(ctx, wire.char_end),
        ) else {
            return Err(Error::Protocol("span offsets beyond context".into()));
        };
        let resp = QaResponse {
            answer: wire.answer,
            score: wire.score,
            context_index: wire.context_index,
            start,
            end,
        };
        resp.check(req)?;
        Ok(QaOutcome::Answer(resp))
    }
}

impl Embedder for HttpBackend {
    fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse> {
        req.validate()?;
        let resp: EmbedResponse = self.post("/v1/embed", req)?;
        resp.check(req)?;
        Ok(resp)
    }
}

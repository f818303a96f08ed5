//! Inference capabilities consumed by the pipeline.
//!
//! Three contracts: question/entity generation, guided span answering, and
//! text embedding. [`reference`] implements them with a deterministic
//! template grammar; [`http`] speaks the JSON wire protocol of an external
//! model service.

pub mod http;
pub mod lexicon;
pub mod reference;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::token_count;

pub use http::HttpBackend;
pub use lexicon::{build_guidance, NeighborLexicon};
pub use reference::{HashEmbedder, TemplateAnswerer, TemplateQuestionGenerator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgRequest {
    pub context: String,
    pub topic: String,
    pub num_samples: usize,
    pub top_p: f64,
    pub seed: u64,
}

impl QgRequest {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 1 {
            return Err(Error::Precondition("num_samples must be >= 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Precondition("top_p must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QgPair {
    pub question: String,
    pub entity: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QgResponse {
    pub pairs: Vec<QgPair>,
}

impl QgResponse {
    pub fn check(&self, req: &QgRequest) -> Result<()> {
        if self.pairs.len() > req.num_samples {
            return Err(Error::Protocol(format!(
                "{} pairs returned for num_samples={}",
                self.pairs.len(),
                req.num_samples
            )));
        }
        if self
            .pairs
            .iter()
            .any(|p| p.question.trim().is_empty() || p.entity.trim().is_empty())
        {
            return Err(Error::Protocol("empty question or entity".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRequest {
    pub question: String,
    /// Source entity whose granularity the answer should match.
    pub guidance: String,
    pub contexts: Vec<String>,
    pub max_span_tokens: usize,
}

impl QaRequest {
    pub fn validate(&self) -> Result<()> {
        if self.contexts.is_empty() {
            return Err(Error::Precondition("contexts must be non-empty".into()));
        }
        if self.max_span_tokens < 1 {
            return Err(Error::Precondition("max_span_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

/// Extracted span. Offsets are byte offsets into `contexts[context_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaResponse {
    pub answer: String,
    /// Log-domain, higher is better.
    pub score: f64,
    pub context_index: usize,
    pub start: usize,
    pub end: usize,
}

impl QaResponse {
    /// Checks the span against the request it answers.
    pub fn check(&self, req: &QaRequest) -> Result<()> {
        let ctx = req.contexts.get(self.context_index).ok_or_else(|| {
            Error::Protocol(format!("context_index {} out of range", self.context_index))
        })?;
        let cited = (self.start <= self.end)
            .then(|| ctx.get(self.start..self.end))
            .flatten();
        if cited != Some(self.answer.as_str()) {
            return Err(Error::Protocol(format!(
                "answer {:?} is not the cited span [{}, {}) of context {}",
                self.answer, self.start, self.end, self.context_index
            )));
        }
        let len = token_count(&self.answer);
        if len > req.max_span_tokens {
            return Err(Error::Protocol(format!(
                "answer has {len} tokens, cap is {}",
                req.max_span_tokens
            )));
        }
        if self.score.is_nan() {
            return Err(Error::Protocol("score is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QaOutcome {
    Answer(QaResponse),
    /// No extractable span; the pipeline skips the question.
    NoAnswer,
}

impl QaOutcome {
    /// Score with `-inf` standing in for no answer.
    pub fn score(&self) -> f64 {
        match self {
            QaOutcome::Answer(r) => r.score,
            QaOutcome::NoAnswer => f64::NEG_INFINITY,
        }
    }

    pub fn into_answer(self) -> Option<QaResponse> {
        match self {
            QaOutcome::Answer(r) => Some(r),
            QaOutcome::NoAnswer => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

impl EmbedRequest {
    pub fn validate(&self) -> Result<()> {
        if self.texts.is_empty() {
            return Err(Error::Precondition("texts must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f32>>,
}

impl EmbedResponse {
    pub fn dimension(&self) -> Option<usize> {
        self.vectors.first().map(Vec::len)
    }

    pub fn check(&self, req: &EmbedRequest) -> Result<()> {
        if self.vectors.len() != req.texts.len() {
            return Err(Error::Protocol(format!(
                "{} vectors for {} texts",
                self.vectors.len(),
                req.texts.len()
            )));
        }
        let dim = self.dimension().unwrap_or(0);
        if dim == 0 || self.vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Protocol("vectors must share a dimension >= 1".into()));
        }
        if self.vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Protocol("non-finite vector component".into()));
        }
        Ok(())
    }
}

pub trait QuestionGenerator: Send + Sync {
    fn generate_pairs(&self, req: &QgRequest) -> Result<QgResponse>;
}

pub trait SpanAnswerer: Send + Sync {
    fn answer_span(&self, req: &QaRequest) -> Result<QaOutcome>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse>;
}

/// The three capabilities bundled for one pipeline run.
#[derive(Clone)]
pub struct Backends {
    pub qg: Arc<dyn QuestionGenerator>,
    pub qa: Arc<dyn SpanAnswerer>,
    pub embed: Arc<dyn Embedder>,
}

impl Backends {
    /// Deterministic template-grammar backends.
    pub fn reference() -> Self {
        Backends {
            qg: Arc::new(TemplateQuestionGenerator),
            qa: Arc::new(TemplateAnswerer),
            embed: Arc::new(HashEmbedder::default()),
        }
    }

    pub fn http(client: HttpBackend) -> Self {
        let client = Arc::new(client);
        Backends {
            qg: client.clone(),
            qa: client.clone(),
            embed: client,
        }
    }
}

impl std::fmt::Debug for Backends {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backends").finish_non_exhaustive()
    }
}

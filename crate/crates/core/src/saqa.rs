//! Answers transferred questions over retrieved facts and folds the
//! candidates into the source-entity map.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::backends::{Embedder, QaRequest, SpanAnswerer};
use crate::error::{Error, Result};
use crate::questions::{QuestionKind, TransferredQuestion};
use crate::retrieval::{retrieve, RetrievedContext, VectorIndex};
use crate::scalar::Scalar;
use crate::text::token_count;
use crate::types::{Corpus, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerCandidate {
    pub answer: String,
    pub score: f64,
    pub question: String,
    pub question_kind: QuestionKind,
    pub source_entity: String,
    pub fact_index: usize,
    /// Byte span of `answer` inside the cited fact.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMapEntry {
    pub answer: String,
    pub score: f64,
    pub provenance: AnswerCandidate,
}

/// Source entity to its best transferred answer, ordered by key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityMap {
    entries: BTreeMap<String, EntityMapEntry>,
}

impl EntityMap {
    pub fn get(&self, entity: &str) -> Option<&EntityMapEntry> {
        self.entries.get(entity)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EntityMapEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `(source_entity, answer)` pairs in key order.
    pub fn replacements(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .map(|(k, v)| (k.clone(), v.answer.clone()))
            .collect()
    }
}

/// One question's retrieval, kept for the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub question: String,
    pub context: RetrievedContext<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnswerPass {
    pub candidates: Vec<AnswerCandidate>,
    pub retrievals: Vec<Retrieval>,
    pub warnings: Vec<String>,
}

/// Retrieves facts for every question and asks the answerer for a span no
/// longer than `span_multiplier` times the source entity's token count.
///
/// Backend errors abort unless `skip_on_error` is set, in which case the
/// question is skipped with a warning.
#[allow(clippy::too_many_arguments)]
pub fn answer_all<S: Scalar>(
    questions: &[TransferredQuestion],
    index: &VectorIndex<S>,
    corpus: &Corpus,
    config: &PipelineConfig,
    embedder: &dyn Embedder,
    answerer: &dyn SpanAnswerer,
    skip_on_error: bool,
) -> Result<AnswerPass> {
    let mut pass = AnswerPass::default();
    for q in questions {
        match answer_one(q, index, corpus, config, embedder, answerer, &mut pass) {
            Ok(()) => {}
            Err(e) if skip_on_error && e.is_backend() => {
                let msg = format!("skipped question {:?}: {e}", q.question);
                warn!("{msg}");
                pass.warnings.push(msg);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(pass)
}

fn answer_one<S: Scalar>(
    q: &TransferredQuestion,
    index: &VectorIndex<S>,
    corpus: &Corpus,
    config: &PipelineConfig,
    embedder: &dyn Embedder,
    answerer: &dyn SpanAnswerer,
    pass: &mut AnswerPass,
) -> Result<()> {
    let context = retrieve(index, corpus, &q.question, config.k_retrieve, embedder)?;
    pass.retrievals.push(Retrieval {
        question: q.question.clone(),
        context: context.to_f64(),
    });
    if context.is_empty() {
        return Ok(());
    }
    let max_span_tokens = config.span_multiplier * token_count(&q.source_entity).max(1);
    let req = QaRequest {
        question: q.question.clone(),
        guidance: q.source_entity.clone(),
        contexts: context.texts.clone(),
        max_span_tokens,
    };
    let Some(resp) = answerer.answer_span(&req)?.into_answer() else {
        return Ok(());
    };
    resp.check(&req)?;
    if resp.score == f64::NEG_INFINITY {
        return Ok(());
    }
    pass.candidates.push(AnswerCandidate {
        answer: resp.answer,
        score: resp.score,
        question: q.question.clone(),
        question_kind: q.kind,
        source_entity: q.source_entity.clone(),
        fact_index: context.fact_indices[resp.context_index],
        start: resp.start,
        end: resp.end,
    });
    Ok(())
}

/// Total preference order: higher score, specific before generic, lower
/// fact index, earlier span, then lexical order of question and answer.
fn preference(a: &AnswerCandidate, b: &AnswerCandidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.question_kind.cmp(&b.question_kind))
        .then(a.fact_index.cmp(&b.fact_index))
        .then(a.start.cmp(&b.start))
        .then(a.end.cmp(&b.end))
        .then_with(|| a.question.cmp(&b.question))
        .then_with(|| a.answer.cmp(&b.answer))
}

/// Keeps the most preferred candidate per source entity.
pub fn fold_entity_map(candidates: &[AnswerCandidate]) -> EntityMap {
    let mut entries: BTreeMap<String, EntityMapEntry> = BTreeMap::new();
    for c in candidates {
        let better = entries
            .get(&c.source_entity)
            .is_none_or(|cur| preference(c, &cur.provenance) == Ordering::Less);
        if better {
            entries.insert(
                c.source_entity.clone(),
                EntityMapEntry {
                    answer: c.answer.clone(),
                    score: c.score,
                    provenance: c.clone(),
                },
            );
        }
    }
    EntityMap { entries }
}

/// Checks the per-candidate invariants against the corpus.
pub fn check_candidate(c: &AnswerCandidate, corpus: &Corpus, config: &PipelineConfig) -> Result<()> {
    let fact = corpus
        .fact(c.fact_index)
        .ok_or_else(|| Error::Protocol(format!("candidate cites missing fact {}", c.fact_index)))?;
    if fact.text.get(c.start..c.end) != Some(c.answer.as_str()) {
        return Err(Error::Protocol(format!(
            "candidate {:?} is not the cited span of fact {}",
            c.answer, c.fact_index
        )));
    }
    let cap = config.span_multiplier * token_count(&c.source_entity).max(1);
    if token_count(&c.answer) > cap {
        return Err(Error::Protocol(format!(
            "candidate {:?} exceeds the {cap}-token cap",
            c.answer
        )));
    }
    Ok(())
}

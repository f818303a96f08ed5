//! Output-similarity and model-free factuality metrics.
//!
//! All metrics count lowercased, punctuation-free tokens from
//! [`crate::text::content_tokens`]. ROUGE is F1 without stemming; BLEU is
//! sentence-level BLEU-4 with epsilon smoothing on zero-match orders.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text::content_tokens;
use crate::types::{Corpus, CorpusSet, TransferTask};

pub const BLEU_MAX_ORDER: usize = 4;
pub const BLEU_EPSILON: f64 = 1e-9;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n >= 1 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_default() += 1;
        }
    }
    counts
}

fn clipped_overlap(pred: &HashMap<&[String], usize>, reference: &HashMap<&[String], usize>) -> usize {
    pred.iter()
        .map(|(g, c)| (*c).min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

/// ROUGE-N F1. Two empty n-gram sets score 1, exactly one empty scores 0.
pub fn rouge_n<S: Scalar>(prediction: &str, reference: &str, n: usize) -> Result<S> {
    if !(1..=2).contains(&n) {
        return Err(Error::Precondition(format!("ROUGE order must be 1 or 2, got {n}")));
    }
    let p = content_tokens(prediction);
    let r = content_tokens(reference);
    let pc = ngram_counts(&p, n);
    let rc = ngram_counts(&r, n);
    let p_total: usize = pc.values().sum();
    let r_total: usize = rc.values().sum();
    match (p_total, r_total) {
        (0, 0) => return Ok(S::one()),
        (0, _) | (_, 0) => return Ok(S::zero()),
        _ => {}
    }
    let overlap = clipped_overlap(&pc, &rc);
    if overlap == 0 {
        return Ok(S::zero());
    }
    let precision = S::ratio(overlap, p_total);
    let recall = S::ratio(overlap, r_total);
    let two = S::one() + S::one();
    Ok(two * precision * recall / (precision + recall))
}

/// Sentence-level BLEU-4 with brevity penalty.
pub fn bleu<S: Scalar>(prediction: &str, reference: &str) -> S {
    let p = content_tokens(prediction);
    if p.is_empty() {
        return S::zero();
    }
    let r = content_tokens(reference);
    let eps = S::from_f64(BLEU_EPSILON).unwrap();
    let mut log_sum = S::zero();
    for n in 1..=BLEU_MAX_ORDER {
        let pc = ngram_counts(&p, n);
        let rc = ngram_counts(&r, n);
        let total = S::from_usize(pc.values().sum()).unwrap();
        let matched = S::from_usize(clipped_overlap(&pc, &rc)).unwrap();
        let precision = if matched == S::zero() {
            (matched + eps) / (total + eps)
        } else {
            matched / total
        };
        log_sum += precision.ln();
    }
    let order = S::from_usize(BLEU_MAX_ORDER).unwrap();
    let bp = if p.len() < r.len() {
        (S::one() - S::ratio(r.len(), p.len())).exp()
    } else {
        S::one()
    };
    bp * (log_sum / order).exp()
}

/// Percentage of prediction tokens found in neither the corpus nor the
/// source text. Token occurrences are counted.
pub fn halluc<S: Scalar>(prediction: &str, source_text: &str, corpus: &Corpus) -> S {
    halluc_with_vocabulary(prediction, source_text, corpus.vocabulary())
}

pub fn halluc_with_vocabulary<S: Scalar>(
    prediction: &str,
    source_text: &str,
    corpus_vocabulary: &BTreeSet<String>,
) -> S {
    let p = content_tokens(prediction);
    if p.is_empty() {
        return S::zero();
    }
    let source: HashSet<String> = content_tokens(source_text).into_iter().collect();
    let novel = p
        .iter()
        .filter(|t| !source.contains(*t) && !corpus_vocabulary.contains(*t))
        .count();
    S::from_f64(100.0).unwrap() * S::ratio(novel, p.len())
}

/// Token count of the prediction over that of the reference.
pub fn length_ratio<S: Scalar>(prediction: &str, reference: &str) -> Result<S> {
    let r = content_tokens(reference).len();
    if r == 0 {
        return Err(Error::Precondition("reference has no tokens".into()));
    }
    Ok(S::ratio(content_tokens(prediction).len(), r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleMetrics<S> {
    pub task_id: String,
    pub r1: S,
    pub r2: S,
    pub bleu: S,
    pub halluc_pct: S,
    pub length_ratio: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateMetrics<S> {
    pub r1: S,
    pub r2: S,
    pub bleu: S,
    pub halluc_pct: S,
    pub length_ratio: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport<S> {
    pub aggregate: AggregateMetrics<S>,
    pub per_example: Vec<ExampleMetrics<S>>,
}

/// Scores one prediction against its task's reference text.
pub fn score_example<S: Scalar>(
    prediction: &str,
    task: &TransferTask,
    corpus: &Corpus,
) -> Result<ExampleMetrics<S>> {
    let reference = task
        .reference_text
        .as_deref()
        .ok_or_else(|| Error::MissingReference(vec![task.task_id.clone()]))?;
    Ok(ExampleMetrics {
        task_id: task.task_id.clone(),
        r1: rouge_n(prediction, reference, 1)?,
        r2: rouge_n(prediction, reference, 2)?,
        bleu: bleu(prediction, reference),
        halluc_pct: halluc(prediction, &task.source_text, corpus),
        length_ratio: length_ratio(prediction, reference)?,
    })
}

/// Per-example metrics and their arithmetic means, summed in input order.
pub fn evaluate<S: Scalar>(
    predictions: &[(String, String)],
    tasks: &[TransferTask],
    corpora: &CorpusSet,
) -> Result<MetricsReport<S>> {
    if predictions.is_empty() {
        return Err(Error::Precondition("no predictions to evaluate".into()));
    }
    let by_id: HashMap<&str, &TransferTask> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let missing: Vec<String> = predictions
        .iter()
        .filter(|(id, _)| by_id.get(id.as_str()).is_none_or(|t| t.reference_text.is_none()))
        .map(|(id, _)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingReference(missing));
    }
    let per_example = predictions
        .iter()
        .map(|(id, text)| {
            let task = by_id[id.as_str()];
            score_example(text, task, corpora.require(&task.corpus_ref)?)
        })
        .collect::<Result<Vec<ExampleMetrics<S>>>>()?;
    let n = S::from_usize(per_example.len()).unwrap();
    let mean = |f: fn(&ExampleMetrics<S>) -> S| {
        per_example.iter().fold(S::zero(), |acc, m| acc + f(m)) / n
    };
    Ok(MetricsReport {
        aggregate: AggregateMetrics {
            r1: mean(|m| m.r1),
            r2: mean(|m| m.r2),
            bleu: mean(|m| m.bleu),
            halluc_pct: mean(|m| m.halluc_pct),
            length_ratio: mean(|m| m.length_ratio),
        },
        per_example,
    })
}

//! Domain types shared across the pipeline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{contains_ci, tokenize};

/// One unit of transfer work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferTask {
    pub task_id: String,
    pub source_text: String,
    pub source_topic: String,
    pub target_topic: String,
    pub corpus_ref: String,
    /// Gold target text, only consulted by evaluation.
    #[serde(default)]
    pub reference_text: Option<String>,
}

impl TransferTask {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidTask {
                task_id: self.task_id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.source_text.trim().is_empty() {
            return fail("source_text is empty");
        }
        if self.source_topic.is_empty() || self.target_topic.is_empty() {
            return fail("topics must be non-empty");
        }
        if !contains_ci(&self.source_text, &self.source_topic) {
            return fail("source_topic does not occur in source_text");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub index: usize,
    pub text: String,
}

/// Ordered factual sentences about (usually) one target topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    corpus_ref: String,
    facts: Vec<Fact>,
    vocabulary: BTreeSet<String>,
}

impl Corpus {
    pub fn new<I, T>(corpus_ref: impl Into<String>, texts: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let corpus_ref = corpus_ref.into();
        let mut facts = Vec::new();
        let mut vocabulary = BTreeSet::new();
        for (index, text) in texts.into_iter().enumerate() {
            let text = text.into();
            if text.trim().is_empty() {
                return Err(Error::InvalidCorpus {
                    corpus_ref,
                    reason: format!("fact {index} is blank"),
                });
            }
            vocabulary.extend(tokenize(&text).content().map(str::to_string));
            facts.push(Fact { index, text });
        }
        Ok(Corpus {
            corpus_ref,
            facts,
            vocabulary,
        })
    }

    pub fn corpus_ref(&self) -> &str {
        &self.corpus_ref
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact(&self, index: usize) -> Option<&Fact> {
        self.facts.get(index)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Normalized non-punctuation tokens over all facts.
    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.facts.iter().map(|f| f.text.as_str())
    }
}

/// Corpora keyed by `corpus_ref`.
#[derive(Debug, Clone, Default)]
pub struct CorpusSet {
    corpora: BTreeMap<String, Corpus>,
}

impl CorpusSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, corpus: Corpus) -> Option<Corpus> {
        self.corpora.insert(corpus.corpus_ref().to_string(), corpus)
    }

    pub fn get(&self, corpus_ref: &str) -> Option<&Corpus> {
        self.corpora.get(corpus_ref)
    }

    pub fn require(&self, corpus_ref: &str) -> Result<&Corpus> {
        self.get(corpus_ref)
            .ok_or_else(|| Error::UnknownCorpus(corpus_ref.to_string()))
    }

    pub fn len(&self) -> usize {
        self.corpora.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpora.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Corpus> {
        self.corpora.values()
    }
}

impl FromIterator<Corpus> for CorpusSet {
    fn from_iter<I: IntoIterator<Item = Corpus>>(iter: I) -> Self {
        let mut set = CorpusSet::new();
        for c in iter {
            set.insert(c);
        }
        set
    }
}

/// Inference hyperparameters for one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Question/entity pairs to collect per document.
    pub n_pairs: usize,
    /// Nucleus sampling mass forwarded to the question generator.
    pub top_p: f64,
    /// Facts retrieved per question.
    pub k_retrieve: usize,
    /// Answer span cap, in multiples of the source entity's token count.
    pub span_multiplier: usize,
    pub max_generation_rounds: usize,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_pairs: 10,
            top_p: 0.75,
            k_retrieve: 5,
            span_multiplier: 2,
            max_generation_rounds: 5,
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs < 1 {
            return Err(Error::Config("n_pairs must be >= 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config("top_p must lie in (0, 1]".into()));
        }
        if self.k_retrieve < 1 {
            return Err(Error::Config("k_retrieve must be >= 1".into()));
        }
        if self.span_multiplier < 1 {
            return Err(Error::Config("span_multiplier must be >= 1".into()));
        }
        if self.max_generation_rounds < 1 {
            return Err(Error::Config("max_generation_rounds must be >= 1".into()));
        }
        Ok(())
    }
}

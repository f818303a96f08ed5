//! Dataset adapters that turn raw collections into transfer tasks.

use std::collections::HashMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::contains_ci;
use crate::types::TransferTask;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl RelationTriple {
    pub fn is_valid(&self) -> bool {
        [&self.subject, &self.relation, &self.object]
            .iter()
            .all(|f| !f.trim().is_empty())
    }

    /// Single-space concatenation `subject relation object`.
    pub fn sentence(&self) -> String {
        format!("{} {} {}", self.subject, self.relation, self.object)
    }
}

/// One document of a grouped collection (for example colleges grouped by
/// public/private type).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDocument {
    #[serde(default)]
    pub id: Option<String>,
    pub text: String,
    pub topic: String,
    pub group: String,
    /// Corpus for this document's topic; defaults to the topic itself.
    #[serde(default)]
    pub corpus_ref: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairingOutput {
    pub tasks: Vec<TransferTask>,
    pub warnings: Vec<String>,
}

impl PairingOutput {
    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }
}

/// Groups item indices by key in first-appearance order.
fn group_by<'a, T>(items: &'a [T], key: impl Fn(&T) -> &str) -> Vec<(&'a str, Vec<usize>)>
where
    T: 'a,
{
    let mut order: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for (i, item) in items.iter().enumerate() {
        let k = key(item);
        let at = *slot.entry(k).or_insert_with(|| {
            order.push((k, Vec::new()));
            order.len() - 1
        });
        order[at].1.push(i);
    }
    order
}

/// Pairs triples that share a relation: each triple is the source exactly
/// once per call, and its partner is drawn by a seeded shuffle of the
/// relation's triples (each triple's successor in the shuffled cycle).
pub fn pair_triples(triples: &[RelationTriple], rng_seed: u64) -> PairingOutput {
    let mut out = PairingOutput::default();
    let valid: Vec<&RelationTriple> = triples.iter().filter(|t| t.is_valid()).collect();
    if valid.len() < triples.len() {
        out.warn(format!("skipped {} triple(s) with empty fields", triples.len() - valid.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut shareable = false;
    for (relation, mut members) in group_by(&valid, |t| t.relation.as_str()) {
        if members.len() < 2 {
            continue;
        }
        shareable = true;
        members.shuffle(&mut rng);
        for (pos, &src) in members.iter().enumerate() {
            let (s, t) = (valid[src], valid[members[(pos + 1) % members.len()]]);
            out.tasks.push(TransferTask {
                task_id: format!("triple-{:06}", out.tasks.len()),
                source_text: s.sentence(),
                source_topic: s.subject.clone(),
                target_topic: t.subject.clone(),
                corpus_ref: t.subject.clone(),
                reference_text: Some(t.sentence()),
            });
        }
        log::debug!("paired {} triples for relation {relation:?}", members.len());
    }
    if !shareable {
        out.warn("no relation is shared by two or more triples".into());
    }
    out
}

/// Makes every document a reference text whose source is a seeded random
/// other document of the same group.
pub fn pair_by_group(documents: &[GroupDocument], rng_seed: u64) -> PairingOutput {
    let mut out = PairingOutput::default();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for (group, members) in group_by(documents, |d| d.group.as_str()) {
        if members.len() < 2 {
            out.warn(format!("group {group:?} has a single document; skipped"));
            continue;
        }
        for (pos, &target) in members.iter().enumerate() {
            let mut pick = rng.random_range(0..members.len() - 1);
            if pick >= pos {
                pick += 1;
            }
            let (s, t) = (&documents[members[pick]], &documents[target]);
            let task_id = t.id.clone().unwrap_or_else(|| format!("doc-{target:06}"));
            if !contains_ci(&s.text, &s.topic) {
                out.warn(format!(
                    "task {task_id}: source topic {:?} does not occur in its text; skipped",
                    s.topic
                ));
                continue;
            }
            out.tasks.push(TransferTask {
                task_id,
                source_text: s.text.clone(),
                source_topic: s.topic.clone(),
                target_topic: t.topic.clone(),
                corpus_ref: t.corpus_ref.clone().unwrap_or_else(|| t.topic.clone()),
                reference_text: Some(t.text.clone()),
            });
        }
    }
    out
}

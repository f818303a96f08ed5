//! Question/entity collection over the source text and transfer of the
//! questions to the target topic.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::backends::{QgRequest, QuestionGenerator};
use crate::error::{Error, Result};
use crate::seed;
use crate::text::{contains_ci, normalize_phrase, replace_all_ci, sentence_split, tokenize};
use crate::types::{PipelineConfig, TransferTask};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionEntityPair {
    pub question: String,
    pub entity: String,
    pub sentence_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionKind {
    Specific,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferredQuestion {
    pub question: String,
    pub kind: QuestionKind,
    pub source_entity: String,
}

/// Samples question/entity pairs sentence by sentence until `n_pairs`
/// survive filtering or the round budget runs out.
///
/// `seed` is the per-task seed; each backend call receives a seed mixed
/// with its round and sentence index.
pub fn collect_pairs(
    task: &TransferTask,
    config: &PipelineConfig,
    seed: u64,
    qg: &dyn QuestionGenerator,
) -> Result<Vec<QuestionEntityPair>> {
    task.validate()?;
    let sentences = sentence_split(&task.source_text);
    let mut pool = Vec::new();
    let mut survivors = Vec::new();
    for round in 0..config.max_generation_rounds {
        if survivors.len() >= config.n_pairs {
            break;
        }
        for (si, sentence) in sentences.iter().enumerate() {
            let req = QgRequest {
                context: sentence.clone(),
                topic: task.source_topic.clone(),
                num_samples: config.n_pairs,
                top_p: config.top_p,
                seed: seed::mix(seed, &[round as u64, si as u64]),
            };
            for pair in qg.generate_pairs(&req)?.pairs {
                pool.push(QuestionEntityPair {
                    question: pair.question,
                    entity: pair.entity,
                    sentence_index: si,
                });
            }
        }
        survivors = filter_pairs(&pool, &task.source_text, &task.source_topic);
    }
    Ok(survivors)
}

/// Post-filters, in order: entity must occur in the source text; question
/// must contain the source topic; an entity that is a strict substring of
/// another surviving entity is dropped; exact duplicates are removed.
pub fn filter_pairs(
    pool: &[QuestionEntityPair],
    source_text: &str,
    source_topic: &str,
) -> Vec<QuestionEntityPair> {
    let grounded: Vec<&QuestionEntityPair> = pool
        .iter()
        .filter(|p| !p.entity.trim().is_empty() && contains_ci(source_text, p.entity.trim()))
        .filter(|p| contains_ci(&p.question, source_topic))
        .collect();

    let entities: HashSet<String> = grounded.iter().map(|p| normalize_phrase(&p.entity)).collect();
    let mut seen = HashSet::new();
    grounded
        .into_iter()
        .filter(|p| {
            let e = normalize_phrase(&p.entity);
            !entities.iter().any(|o| o.len() > e.len() && o.contains(&e))
        })
        .filter(|p| seen.insert((p.question.clone(), p.entity.clone())))
        .cloned()
        .collect()
}

/// Swaps every occurrence of the source topic for the target topic.
pub fn transfer_specific(question: &str, source_topic: &str, target_topic: &str) -> Result<String> {
    if !contains_ci(question, source_topic) {
        return Err(Error::Untransferable {
            question: question.to_string(),
            topic: source_topic.to_string(),
        });
    }
    replace_all_ci(question, source_topic, target_topic)
}

/// Token multiset intersection of a question and its transferred form, in
/// the original question's order. Tokens unique to either topic drop out.
pub fn make_generic(question: &str, specific: &str) -> String {
    let spec = tokenize(specific);
    let mut budget: HashMap<&str, usize> = HashMap::new();
    for t in spec.tokens() {
        *budget.entry(t.match_key()).or_default() += 1;
    }
    let q = tokenize(question);
    let mut kept = Vec::new();
    for t in q.tokens() {
        if let Some(n) = budget.get_mut(t.match_key()).filter(|n| **n > 0) {
            *n -= 1;
            kept.push(t.surface.as_str());
        }
    }
    kept.join(" ")
}

/// Specific and generic variants of every pair. Generic variants without
/// any content token are omitted; identical (question, entity) entries
/// collapse.
pub fn build_transferred_set(
    pairs: &[QuestionEntityPair],
    task: &TransferTask,
) -> Result<Vec<TransferredQuestion>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |question: String, kind, entity: &str| {
        if seen.insert((question.clone(), entity.to_string())) {
            out.push(TransferredQuestion {
                question,
                kind,
                source_entity: entity.to_string(),
            });
        }
    };
    for pair in pairs {
        let specific = transfer_specific(&pair.question, &task.source_topic, &task.target_topic)?;
        let generic = make_generic(&pair.question, &specific);
        push(specific, QuestionKind::Specific, &pair.entity);
        if tokenize(&generic).content().next().is_some() {
            push(generic, QuestionKind::Generic, &pair.entity);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{QgPair, QgResponse, TemplateQuestionGenerator};
    use std::sync::Mutex;

    fn pair(q: &str, e: &str) -> QuestionEntityPair {
        QuestionEntityPair {
            question: q.into(),
            entity: e.into(),
            sentence_index: 0,
        }
    }

    fn task(source: &str, ts: &str, tt: &str) -> TransferTask {
        TransferTask {
            task_id: "t".into(),
            source_text: source.into(),
            source_topic: ts.into(),
            target_topic: tt.into(),
            corpus_ref: "c".into(),
            reference_text: None,
        }
    }

    /// Replays canned responses round-robin and records requests.
    struct Scripted {
        responses: Vec<Vec<(&'static str, &'static str)>>,
        calls: Mutex<Vec<QgRequest>>,
    }

    impl QuestionGenerator for Scripted {
        fn generate_pairs(&self, req: &QgRequest) -> Result<QgResponse> {
            let mut calls = self.calls.lock().unwrap();
            let canned = &self.responses[calls.len() % self.responses.len()];
            calls.push(req.clone());
            Ok(QgResponse {
                pairs: canned
                    .iter()
                    .map(|(q, e)| QgPair {
                        question: q.to_string(),
                        entity: e.to_string(),
                    })
                    .collect(),
            })
        }
    }

    const STALIN: &str = "the party of joseph stalin is communist party .";

    #[test]
    fn grounded_pair_is_kept() {
        let kept = filter_pairs(
            &[pair("what is the party of joseph stalin ?", "communist party")],
            STALIN,
            "joseph stalin",
        );
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn hallucinated_entity_is_dropped() {
        let kept = filter_pairs(&[pair("what is the party of joseph stalin ?", "xyz")], STALIN, "joseph stalin");
        assert!(kept.is_empty());
    }

    #[test]
    fn topicless_question_is_dropped() {
        let kept = filter_pairs(&[pair("what is the party ?", "communist party")], STALIN, "joseph stalin");
        assert!(kept.is_empty());
    }

    #[test]
    fn shorter_substring_entity_is_dropped() {
        let kept = filter_pairs(
            &[
                pair("what is the party of joseph stalin ?", "party"),
                pair("which party did joseph stalin lead ?", "Communist Party"),
            ],
            STALIN,
            "joseph stalin",
        );
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].entity, "Communist Party");
    }

    #[test]
    fn duplicates_collapse_but_equal_entities_survive() {
        let kept = filter_pairs(
            &[
                pair("what is the party of joseph stalin ?", "communist party"),
                pair("what is the party of joseph stalin ?", "communist party"),
                pair("which party had joseph stalin ?", "communist party"),
            ],
            STALIN,
            "joseph stalin",
        );
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn collect_stops_at_quota() {
        let qg = Scripted {
            responses: vec![vec![
                ("what is the party of joseph stalin ?", "communist party"),
                ("who is joseph stalin ?", "joseph stalin"),
            ]],
            calls: Mutex::new(Vec::new()),
        };
        let cfg = PipelineConfig {
            n_pairs: 2,
            ..PipelineConfig::default()
        };
        let pairs = collect_pairs(&task(STALIN, "joseph stalin", "nelson mandela"), &cfg, 1, &qg).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(qg.calls.lock().unwrap().len(), 1);
    }

    #[test]
    fn collect_is_bounded_by_rounds() {
        let qg = Scripted {
            responses: vec![vec![("what is the party of joseph stalin ?", "communist party")]],
            calls: Mutex::new(Vec::new()),
        };
        let cfg = PipelineConfig::default();
        let t = task("Joseph Stalin led. The party of joseph stalin is communist party .", "joseph stalin", "x");
        let pairs = collect_pairs(&t, &cfg, 1, &qg).unwrap();
        assert_eq!(pairs.len(), 1);
        let calls = qg.calls.lock().unwrap();
        // two sentences per round, five rounds
        assert_eq!(calls.len(), 10);
        let seeds: HashSet<u64> = calls.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 10);
        assert!(calls.iter().all(|r| r.num_samples == 10 && r.top_p == 0.75));
    }

    #[test]
    fn collect_with_reference_backend() {
        let t = task(
            "the party of joseph stalin is communist party . the birthplace of joseph stalin is gori .",
            "joseph stalin",
            "nelson mandela",
        );
        let pairs = collect_pairs(&t, &PipelineConfig::default(), 0, &TemplateQuestionGenerator).unwrap();
        let entities: Vec<&str> = pairs.iter().map(|p| p.entity.as_str()).collect();
        assert_eq!(entities, ["communist party", "gori"]);
    }

    #[test]
    fn transfer_examples() {
        assert_eq!(
            transfer_specific("What is Joseph Stalin's party?", "Joseph Stalin", "Nelson Mandela").unwrap(),
            "What is Nelson Mandela's party?"
        );
        assert_eq!(transfer_specific("who is ada ?", "ada", "ada").unwrap(), "who is ada ?");
        assert!(matches!(
            transfer_specific("who is he ?", "ada", "bob"),
            Err(Error::Untransferable { .. })
        ));
    }

    #[test]
    fn generic_examples() {
        assert_eq!(
            make_generic(
                "where is stanford university located ?",
                "where is florida state university located ?"
            ),
            "where is university located ?"
        );
        assert_eq!(make_generic("who is ada ?", "who is ada ?"), "who is ada ?");
        assert_eq!(
            make_generic("what is the hub of cathay pacific ?", "what is the hub of delta ?"),
            "what is the hub of ?"
        );
    }

    #[test]
    fn transferred_set_counts() {
        let t = task(STALIN, "joseph stalin", "nelson mandela");
        let one = build_transferred_set(&[pair("what is the party of joseph stalin ?", "communist party")], &t).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(one[0].question, "what is the party of nelson mandela ?");
        assert_eq!(one[0].kind, QuestionKind::Specific);
        assert_eq!(one[1].question, "what is the party of ?");
        assert_eq!(one[1].kind, QuestionKind::Generic);

        let collapsed = build_transferred_set(&[pair("joseph stalin ?", "communist party")], &t).unwrap();
        assert_eq!(collapsed.len(), 1);

        let shared = build_transferred_set(
            &[
                pair("what is the party of joseph stalin ?", "communist party"),
                pair("what is the party of joseph stalin ?", "party"),
            ],
            &t,
        )
        .unwrap();
        assert_eq!(shared.len(), 4);
    }
}

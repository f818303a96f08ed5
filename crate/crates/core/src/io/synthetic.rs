//! Seeded synthetic benchmark over the reference template grammar.
//!
//! Every task has a source text `the <a> of <t_s> is <v> .` repeated over
//! its attributes, a corpus of `the <a> of <t_t> is <w> .` facts plus two
//! distractor facts about other attributes of the target topic, and a gold
//! target with the topic and every value swapped. All words of one task are
//! distinct pseudo-words of equal length, so no word can match inside
//! another and every substitution is unambiguous.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backends::HashEmbedder;
use crate::error::{Error, Result};
use crate::scalar::dot;
use crate::types::{Corpus, CorpusSet, TransferTask};

use super::{corpus_file_name, save_corpus, save_predictions, save_tasks, Prediction};

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SYLLABLES_PER_WORD: usize = 3;
const DISTRACTOR_FACTS: usize = 2;
const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub num_tasks: usize,
    pub attrs_per_topic: usize,
    pub vocab_size: usize,
    pub rng_seed: u64,
}

impl SyntheticSpec {
    /// Distinct words one task may consume.
    pub fn words_per_task(attrs: usize) -> usize {
        // two 2-word topics, one attr word plus up to four value words per
        // attribute, and one attr plus one value per distractor
        4 + 5 * attrs + 2 * DISTRACTOR_FACTS
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 || self.attrs_per_topic == 0 || self.vocab_size == 0 {
            return Err(Error::Precondition("synthetic spec fields must be positive".into()));
        }
        let need = Self::words_per_task(self.attrs_per_topic);
        if self.vocab_size < need {
            return Err(Error::Precondition(format!(
                "vocab_size {} is too small; {need} distinct words are needed per task",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub tasks: Vec<TransferTask>,
    pub corpora: CorpusSet,
    /// Gold target text per task id.
    pub gold: BTreeMap<String, String>,
}

impl SyntheticBenchmark {
    /// Writes `tasks.jsonl`, `gold.jsonl` and `corpora/<ref>.json`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        save_tasks(&dir.join("tasks.jsonl"), &self.tasks)?;
        let gold: Vec<Prediction> = self
            .tasks
            .iter()
            .map(|t| Prediction {
                task_id: t.task_id.clone(),
                prediction: self.gold[&t.task_id].clone(),
            })
            .collect();
        save_predictions(&dir.join("gold.jsonl"), &gold)?;
        for corpus in self.corpora.iter() {
            save_corpus(
                &dir.join("corpora").join(corpus_file_name(corpus.corpus_ref())),
                corpus,
            )?;
        }
        Ok(())
    }
}

fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut words = Vec::with_capacity(size);
    let mut seen = std::collections::HashSet::new();
    while words.len() < size {
        let w: String = (0..SYLLABLES_PER_WORD)
            .flat_map(|_| {
                [
                    *CONSONANTS.choose(rng).unwrap() as char,
                    *VOWELS.choose(rng).unwrap() as char,
                ]
            })
            .collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn fact(attr: &str, topic: &str, value: &str) -> String {
    format!("the {attr} of {topic} is {value} .")
}

struct WordPool(std::vec::IntoIter<String>);

impl WordPool {
    fn word(&mut self) -> String {
        self.0.next().expect("word budget covers every draw")
    }

    /// One or two words.
    fn phrase(&mut self, rng: &mut ChaCha8Rng) -> String {
        let n = rng.random_range(1..=2);
        (0..n).map(|_| self.word()).collect::<Vec<_>>().join(" ")
    }
}

struct Draft {
    source_topic: String,
    target_topic: String,
    attrs: Vec<String>,
    source_values: Vec<String>,
    target_values: Vec<String>,
    distractors: Vec<(String, String)>,
}

impl Draft {
    fn draw(rng: &mut ChaCha8Rng, vocab: &[String], attrs: usize) -> Self {
        let words: Vec<String> = vocab
            .choose_multiple(rng, SyntheticSpec::words_per_task(attrs))
            .cloned()
            .collect();
        let mut pool = WordPool(words.into_iter());
        let source_topic = pool.phrase(rng);
        let target_topic = pool.phrase(rng);
        let mut d = Draft {
            source_topic,
            target_topic,
            attrs: Vec::with_capacity(attrs),
            source_values: Vec::with_capacity(attrs),
            target_values: Vec::with_capacity(attrs),
            distractors: Vec::with_capacity(DISTRACTOR_FACTS),
        };
        for _ in 0..attrs {
            d.attrs.push(pool.word());
            d.source_values.push(pool.phrase(rng));
            d.target_values.push(pool.phrase(rng));
        }
        for _ in 0..DISTRACTOR_FACTS {
            d.distractors.push((pool.word(), pool.word()));
        }
        d
    }

    fn source_text(&self) -> String {
        self.attrs
            .iter()
            .zip(&self.source_values)
            .map(|(a, v)| fact(a, &self.source_topic, v))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn gold_text(&self) -> String {
        self.attrs
            .iter()
            .zip(&self.target_values)
            .map(|(a, v)| fact(a, &self.target_topic, v))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn facts(&self) -> Vec<String> {
        self.attrs
            .iter()
            .zip(&self.target_values)
            .chain(self.distractors.iter().map(|(a, v)| (a, v)))
            .map(|(a, v)| fact(a, &self.target_topic, v))
            .collect()
    }

    /// The fact answering each attribute must rank strictly first under
    /// the reference embedder for both the specific and the generic query,
    /// so top-k retrieval finds it for every k >= 1.
    fn retrievable(&self, facts: &[String]) -> bool {
        let e = HashEmbedder::default();
        let vecs: Vec<Vec<f32>> = facts.iter().map(|f| e.vector(f)).collect();
        self.attrs.iter().all(|attr| {
            let prefix = format!("the {attr} of ");
            let want = facts.iter().position(|f| f.starts_with(&prefix)).unwrap();
            [
                format!("what is the {attr} of {} ?", self.target_topic),
                format!("what is the {attr} of ?"),
            ]
            .iter()
            .all(|q| {
                let qv = e.vector(q);
                let best = dot(&vecs[want], &qv);
                vecs.iter()
                    .enumerate()
                    .all(|(i, v)| i == want || dot(v, &qv) < best)
            })
        })
    }
}

/// Generates a benchmark solvable exactly by the reference backends under
/// the default pipeline configuration.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticBenchmark> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let vocab = vocabulary(&mut rng, spec.vocab_size);
    let mut tasks = Vec::with_capacity(spec.num_tasks);
    let mut corpora = CorpusSet::new();
    let mut gold = BTreeMap::new();
    for i in 0..spec.num_tasks {
        let id = format!("synth-{i:05}");
        let mut attempt = 0;
        let (draft, facts) = loop {
            let d = Draft::draw(&mut rng, &vocab, spec.attrs_per_topic);
            let mut facts = d.facts();
            facts.shuffle(&mut rng);
            if d.retrievable(&facts) {
                break (d, facts);
            }
            attempt += 1;
            if attempt >= MAX_ATTEMPTS {
                return Err(Error::Precondition(format!(
                    "could not draw a retrievable task {id} in {MAX_ATTEMPTS} attempts"
                )));
            }
        };
        tasks.push(TransferTask {
            task_id: id.clone(),
            source_text: draft.source_text(),
            source_topic: draft.source_topic.clone(),
            target_topic: draft.target_topic.clone(),
            corpus_ref: id.clone(),
            reference_text: Some(draft.gold_text()),
        });
        corpora.insert(Corpus::new(id.clone(), facts)?);
        gold.insert(id, draft.gold_text());
    }
    Ok(SyntheticBenchmark {
        tasks,
        corpora,
        gold,
    })
}

//! Distributional neighbor lexicon and specificity-guidance perturbation.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Neighbors kept per head word.
pub const MAX_NEIGHBORS: usize = 20;

/// Head word to its nearest distributional neighbors, best first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeighborLexicon {
    entries: HashMap<String, Vec<String>>,
}

impl NeighborLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a head word, deduplicating and truncating its neighbor list.
    pub fn insert<I, S>(&mut self, word: &str, neighbors: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let head = word.to_lowercase();
        let mut list: Vec<String> = Vec::new();
        for n in neighbors {
            let n = n.into();
            if !n.is_empty() && !list.contains(&n) {
                list.push(n);
            }
        }
        list.truncate(MAX_NEIGHBORS);
        if list.is_empty() || (list.len() == 1 && list[0].to_lowercase() == head) {
            return Err(Error::Precondition(format!(
                "lexicon entry {head:?} needs a neighbor other than itself"
            )));
        }
        self.entries.insert(head, list);
        Ok(())
    }

    pub fn neighbors(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `word<TAB>n1<TAB>n2...` lines. Blank lines are ignored.
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut lex = NeighborLexicon::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let head = fields.next().unwrap_or_default().trim();
            let parse_err = |message: String| Error::Parse {
                path: source.to_path_buf(),
                line: i + 1,
                message,
            };
            if head.is_empty() {
                return Err(parse_err("empty head word".into()));
            }
            lex.insert(head, fields.map(str::trim))
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }
}

/// Replaces every whitespace-separated word of `answer` with a uniformly
/// drawn neighbor. Words missing from the lexicon pass through unchanged.
pub fn build_guidance(answer: &str, lexicon: &NeighborLexicon, rng_seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    answer
        .split_whitespace()
        .map(|w| match lexicon.neighbors(w) {
            Some(list) => list[rng.random_range(0..list.len())].as_str(),
            None => w,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

//! Exact maximum inner-product search over embedded corpus facts.
//!
//! The index is a flat row-major matrix scanned in full for every query.
//! Results are ordered by descending score, then ascending fact index.

use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::backends::{EmbedRequest, Embedder};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use crate::types::Corpus;

pub const INDEX_MAGIC: &[u8; 5] = b"FWIX1";

/// Texts sent to the embedder per request while building.
pub const EMBED_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<S> {
    corpus_ref: String,
    dimension: usize,
    fact_indices: Vec<usize>,
    data: Vec<S>,
}

/// Facts retrieved for one query, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedContext<S> {
    pub fact_indices: Vec<usize>,
    pub texts: Vec<String>,
    pub scores: Vec<S>,
}

impl<S: Scalar> RetrievedContext<S> {
    pub fn len(&self) -> usize {
        self.fact_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fact_indices.is_empty()
    }

    pub fn to_f64(&self) -> RetrievedContext<f64> {
        RetrievedContext {
            fact_indices: self.fact_indices.clone(),
            texts: self.texts.clone(),
            scores: self.scores.iter().map(|s| s.to_f64_lossy()).collect(),
        }
    }
}

/// Descending score, ascending fact index.
fn rank<S: Scalar>(a: &(S, usize), b: &(S, usize)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

impl<S: Scalar> VectorIndex<S> {
    /// Assembles an index from `(fact_index, vector)` entries.
    pub fn from_entries<I>(corpus_ref: impl Into<String>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, Vec<S>)>,
    {
        let mut dimension = 0;
        let mut fact_indices = Vec::new();
        let mut data = Vec::new();
        for (fact, vector) in entries {
            if fact_indices.is_empty() {
                dimension = vector.len();
                if dimension == 0 {
                    return Err(Error::Precondition("vector dimension must be >= 1".into()));
                }
            } else if vector.len() != dimension {
                return Err(Error::Protocol(format!(
                    "vector for fact {fact} has dimension {}, expected {dimension}",
                    vector.len()
                )));
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Protocol(format!("vector for fact {fact} is not finite")));
            }
            fact_indices.push(fact);
            data.extend(vector);
        }
        let mut sorted = fact_indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Precondition("duplicate fact index in index".into()));
        }
        Ok(VectorIndex {
            corpus_ref: corpus_ref.into(),
            dimension,
            fact_indices,
            data,
        })
    }

    pub fn corpus_ref(&self) -> &str {
        &self.corpus_ref
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.fact_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fact_indices.is_empty()
    }

    pub fn fact_indices(&self) -> &[usize] {
        &self.fact_indices
    }

    pub fn vector(&self, row: usize) -> &[S] {
        &self.data[row * self.dimension..(row + 1) * self.dimension]
    }

    /// Exact top-k by inner product as `(fact_index, score)`.
    pub fn search(&self, query: &[S], k: usize) -> Result<Vec<(usize, S)>> {
        if k < 1 {
            return Err(Error::Precondition("k must be >= 1".into()));
        }
        if query.len() != self.dimension {
            return Err(Error::Protocol(format!(
                "query dimension {} does not match index dimension {}",
                query.len(),
                self.dimension
            )));
        }
        let mut scored: Vec<(S, usize)> = self
            .data
            .chunks_exact(self.dimension)
            .zip(&self.fact_indices)
            .map(|(row, &fact)| (dot(row, query), fact))
            .collect();
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(rank);
        Ok(scored.into_iter().map(|(s, f)| (f, s)).collect())
    }

    /// Writes the `FWIX1` little-endian layout: magic, `u32` dimension,
    /// `u64` count, then per entry a `u64` fact index and `f32` components.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = u32::try_from(self.dimension)
            .map_err(|_| Error::IndexFormat("dimension exceeds u32".into()))?;
        w.write_all(INDEX_MAGIC)?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for (row, &fact) in self.fact_indices.iter().enumerate() {
            w.write_all(&(fact as u64).to_le_bytes())?;
            for x in self.vector(row) {
                w.write_all(&x.to_f32_lossy().to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R, corpus_ref: impl Into<String>) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(Error::IndexFormat("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let dimension = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8);
        if dimension == 0 && count > 0 {
            return Err(Error::IndexFormat("zero dimension".into()));
        }
        let mut entries = Vec::new();
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            let fact = u64::from_le_bytes(b8) as usize;
            let mut v = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                r.read_exact(&mut b4)?;
                v.push(S::from_f32_lossy(f32::from_le_bytes(b4)));
            }
            entries.push((fact, v));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::IndexFormat(format!("{} trailing bytes", rest.len())));
        }
        if count == 0 {
            return Ok(VectorIndex {
                corpus_ref: corpus_ref.into(),
                dimension,
                fact_indices: Vec::new(),
                data: Vec::new(),
            });
        }
        Self::from_entries(corpus_ref, entries)
    }
}

fn embed_vectors<S: Scalar>(embedder: &dyn Embedder, texts: Vec<String>) -> Result<Vec<Vec<S>>> {
    let req = EmbedRequest { texts };
    let resp = embedder.embed(&req)?;
    resp.check(&req)?;
    Ok(resp
        .vectors
        .into_iter()
        .map(|v| v.into_iter().map(S::from_f32_lossy).collect())
        .collect())
}

/// Embeds every fact of `corpus` in batches.
pub fn build_index<S: Scalar>(corpus: &Corpus, embedder: &dyn Embedder) -> Result<VectorIndex<S>> {
    if corpus.is_empty() {
        return Err(Error::Precondition(format!(
            "corpus {} is empty",
            corpus.corpus_ref()
        )));
    }
    let mut entries = Vec::with_capacity(corpus.len());
    for batch in corpus.facts().chunks(EMBED_BATCH) {
        let texts = batch.iter().map(|f| f.text.clone()).collect();
        let vectors = embed_vectors::<S>(embedder, texts)?;
        entries.extend(batch.iter().map(|f| f.index).zip(vectors));
    }
    VectorIndex::from_entries(corpus.corpus_ref(), entries)
}

/// Embeds `query` and returns the `min(k, |index|)` best facts.
pub fn retrieve<S: Scalar>(
    index: &VectorIndex<S>,
    corpus: &Corpus,
    query: &str,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<RetrievedContext<S>> {
    if index.corpus_ref() != corpus.corpus_ref() {
        return Err(Error::Precondition(format!(
            "index built over {:?}, corpus is {:?}",
            index.corpus_ref(),
            corpus.corpus_ref()
        )));
    }
    let q = embed_vectors::<S>(embedder, vec![query.to_string()])?.remove(0);
    let hits = index.search(&q, k)?;
    let mut ctx = RetrievedContext {
        fact_indices: Vec::with_capacity(hits.len()),
        texts: Vec::with_capacity(hits.len()),
        scores: Vec::with_capacity(hits.len()),
    };
    for (fact, score) in hits {
        let text = corpus
            .fact(fact)
            .ok_or_else(|| Error::Precondition(format!("fact {fact} missing from corpus")))?;
        ctx.fact_indices.push(fact);
        ctx.texts.push(text.text.clone());
        ctx.scores.push(score);
    }
    Ok(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::HashEmbedder;
    use proptest::prelude::*;

    fn corpus3() -> Corpus {
        Corpus::new(
            "c",
            [
                "the party of nelson mandela is anc .",
                "the birthplace of nelson mandela is mvezo .",
                "the hub of delta is atlanta .",
            ],
        )
        .unwrap()
    }

    #[test]
    fn build_cardinality_and_determinism() {
        let c = corpus3();
        let e = HashEmbedder::default();
        let a: VectorIndex<f32> = build_index(&c, &e).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.dimension(), 256);
        assert_eq!(a, build_index(&c, &e).unwrap());
    }

    #[test]
    fn empty_corpus_rejected() {
        let c = Corpus::new("c", Vec::<String>::new()).unwrap();
        assert!(matches!(
            build_index::<f32>(&c, &HashEmbedder::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn exhaustive_k_returns_everything_sorted() {
        let c = corpus3();
        let e = HashEmbedder::default();
        let idx: VectorIndex<f64> = build_index(&c, &e).unwrap();
        let got = retrieve(&idx, &c, "what is the party of nelson mandela ?", 10, &e).unwrap();
        assert_eq!(got.len(), 3);
        assert_eq!(got.fact_indices[0], 0);
        assert!(got.scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn single_fact_always_returned() {
        let c = Corpus::new("one", ["only fact here"]).unwrap();
        let e = HashEmbedder::default();
        let idx: VectorIndex<f32> = build_index(&c, &e).unwrap();
        let got = retrieve(&idx, &c, "unrelated words", 5, &e).unwrap();
        assert_eq!(got.fact_indices, [0]);
        assert_eq!(got.scores, [0.0]);
    }

    #[test]
    fn ties_break_by_fact_index() {
        let idx = VectorIndex::from_entries(
            "c",
            vec![(3, vec![1.0f32]), (1, vec![1.0]), (2, vec![2.0]), (0, vec![1.0])],
        )
        .unwrap();
        let hits = idx.search(&[1.0], 3).unwrap();
        assert_eq!(hits, [(2, 2.0), (0, 1.0), (1, 1.0)]);
    }

    #[test]
    fn search_preconditions() {
        let idx = VectorIndex::from_entries("c", vec![(0, vec![1.0f32, 0.0])]).unwrap();
        assert!(idx.search(&[1.0, 0.0], 0).is_err());
        assert!(idx.search(&[1.0], 1).is_err());
        assert!(VectorIndex::from_entries("c", vec![(0, vec![1.0f32]), (1, vec![1.0, 2.0])]).is_err());
        assert!(VectorIndex::from_entries("c", vec![(0, vec![1.0f32]), (0, vec![2.0])]).is_err());
        assert!(VectorIndex::from_entries("c", vec![(0, vec![f32::NAN])]).is_err());
    }

    #[test]
    fn persistence_layout() {
        let idx = VectorIndex::from_entries("c", vec![(7, vec![1.5f32, -2.0])]).unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        let mut expected = b"FWIX1".to_vec();
        expected.extend(2u32.to_le_bytes());
        expected.extend(1u64.to_le_bytes());
        expected.extend(7u64.to_le_bytes());
        expected.extend(1.5f32.to_le_bytes());
        expected.extend((-2.0f32).to_le_bytes());
        assert_eq!(buf, expected);
        assert_eq!(VectorIndex::<f32>::read_from(&buf[..], "c").unwrap(), idx);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(VectorIndex::<f32>::read_from(&bad[..], "c"), Err(Error::IndexFormat(_))));
        assert!(VectorIndex::<f32>::read_from(&buf[..buf.len() - 1], "c").is_err());
    }

    proptest! {
        #[test]
        fn top_k_is_prefix_of_top_k_plus_one(
            rows in prop::collection::vec(prop::collection::vec(-3i8..3, 4), 1..30),
            q in prop::collection::vec(-3i8..3, 4),
            k in 1usize..30,
        ) {
            let idx = VectorIndex::from_entries(
                "c",
                rows.iter().enumerate().map(|(i, r)| (i, r.iter().map(|&x| x as f64).collect())),
            ).unwrap();
            let q: Vec<f64> = q.iter().map(|&x| x as f64).collect();
            let a = idx.search(&q, k).unwrap();
            let b = idx.search(&q, k + 1).unwrap();
            prop_assert_eq!(a.len(), k.min(rows.len()));
            prop_assert_eq!(&b[..a.len()], &a[..]);
            for (fact, score) in a {
                prop_assert_eq!(score, dot(idx.vector(fact), &q));
            }
        }

        #[test]
        fn persistence_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 3), 1..10)) {
            let idx = VectorIndex::from_entries("c", rows.into_iter().enumerate()).unwrap();
            let mut buf = Vec::new();
            idx.write_to(&mut buf).unwrap();
            prop_assert_eq!(VectorIndex::<f32>::read_from(&buf[..], "c").unwrap(), idx);
        }
    }
}

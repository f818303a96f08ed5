//! Deterministic reference backends over the template grammar
//! `the <attr> of <topic> is <value> .`
//!
//! Question generation turns every template sentence about the requested
//! topic into `what is the <attr> of <topic> ?` paired with `<value>`.
//! Answering matches the question's attribute (and topic, when present)
//! against template sentences in the contexts. Embedding is a hashed bag of
//! normalized tokens. Together they make the whole pipeline exactly
//! checkable on synthetic data.

use crate::error::Result;
use crate::seed::fnv1a;
use crate::text::{token_count, tokenize, Token};

use super::{
    EmbedRequest, EmbedResponse, Embedder, QaOutcome, QaRequest, QaResponse, QgPair, QgRequest,
    QgResponse, QuestionGenerator, SpanAnswerer,
};

/// Dimension of [`HashEmbedder`] vectors unless configured otherwise.
pub const REFERENCE_DIMENSION: usize = 256;

/// Match quality when the question names no topic (or only part of one)
/// and the attribute alone identifies the fact.
pub const PARTIAL_MATCH_PENALTY: f64 = -1.0;

fn is_terminator(t: &Token) -> bool {
    matches!(t.surface.as_str(), "." | "!" | "?")
}

/// Splits a token sequence into terminator-free runs.
fn segments(tokens: &[Token]) -> impl Iterator<Item = &[Token]> {
    tokens
        .split(is_terminator)
        .filter(|seg| !seg.is_empty())
}

fn keys(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(Token::match_key).collect()
}

/// `a` is a (not necessarily contiguous) subsequence of `b`.
fn is_subsequence(a: &[&str], b: &[&str]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateQuestionGenerator;

impl TemplateQuestionGenerator {
    fn pairs_for(context: &str, topic: &str) -> Vec<QgPair> {
        let topic_seq = tokenize(topic);
        let topic_keys = keys(topic_seq.tokens());
        if topic_keys.is_empty() {
            return Vec::new();
        }
        let ctx = tokenize(context);
        let tl = topic_keys.len();
        let mut out = Vec::new();
        for seg in segments(ctx.tokens()) {
            let k = keys(seg);
            if k.first() != Some(&"the") {
                continue;
            }
            // the <attr> of <topic> is <value>
            let hit = (3..k.len()).find(|&p| {
                p + tl + 1 < k.len()
                    && k[p - 1] == "of"
                    && k[p..p + tl] == topic_keys[..]
                    && k[p + tl] == "is"
            });
            let Some(p) = hit else { continue };
            let attr = &context[seg[1].start..seg[p - 2].end];
            let topic_surface = &context[seg[p].start..seg[p + tl - 1].end];
            let value = &context[seg[p + tl + 1].start..seg[seg.len() - 1].end];
            out.push(QgPair {
                question: format!("what is the {attr} of {topic_surface} ?"),
                entity: value.to_string(),
            });
        }
        out
    }
}

impl QuestionGenerator for TemplateQuestionGenerator {
    fn generate_pairs(&self, req: &QgRequest) -> Result<QgResponse> {
        req.validate()?;
        let mut pairs = Self::pairs_for(&req.context, &req.topic);
        pairs.truncate(req.num_samples);
        Ok(QgResponse { pairs })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateAnswerer;

/// `what is the <attr> of <rest> ?` read at one particular `of`.
struct QuestionReading<'a> {
    attr: Vec<&'a str>,
    rest: Vec<&'a str>,
}

fn read_question(question: &[Token]) -> Vec<QuestionReading<'_>> {
    let mut k = keys(question);
    while k.last().is_some_and(|s| s.chars().all(crate::text::is_punct)) {
        k.pop();
    }
    if k.len() < 5 || k[..3] != ["what", "is", "the"] {
        return Vec::new();
    }
    (4..k.len())
        .filter(|&j| k[j] == "of")
        .map(|j| QuestionReading {
            attr: k[3..j].to_vec(),
            rest: k[j + 1..].to_vec(),
        })
        .collect()
}

impl TemplateAnswerer {
    /// Score of one template sentence against one reading, with the value
    /// span, or `None` when the sentence does not answer the reading.
    fn match_segment(
        reading: &QuestionReading<'_>,
        seg: &[Token],
        max_span_tokens: usize,
        guidance_len: usize,
    ) -> Option<(f64, usize, usize)> {
        let k = keys(seg);
        let al = reading.attr.len();
        if k.len() < al + 5 || k[0] != "the" || k[1..1 + al] != reading.attr[..] || k[1 + al] != "of"
        {
            return None;
        }
        let topic_start = 2 + al;
        let is_pos = (topic_start + 1..k.len() - 1).find(|&r| k[r] == "is")?;
        let fact_topic = &k[topic_start..is_pos];
        let quality = if reading.rest == fact_topic {
            0.0
        } else if is_subsequence(&reading.rest, fact_topic) {
            PARTIAL_MATCH_PENALTY
        } else {
            return None;
        };
        let value = &seg[is_pos + 1..];
        if value.len() > max_span_tokens {
            return None;
        }
        let bonus = -(value.len() as f64 - guidance_len as f64).abs();
        Some((quality + bonus, value[0].start, value[value.len() - 1].end))
    }
}

impl SpanAnswerer for TemplateAnswerer {
    fn answer_span(&self, req: &QaRequest) -> Result<QaOutcome> {
        req.validate()?;
        let q = tokenize(&req.question);
        let readings = read_question(q.tokens());
        let guidance_len = token_count(&req.guidance);
        let mut best: Option<QaResponse> = None;
        for (ci, context) in req.contexts.iter().enumerate() {
            let ctx = tokenize(context);
            for seg in segments(ctx.tokens()) {
                for reading in &readings {
                    let Some((score, start, end)) =
                        Self::match_segment(reading, seg, req.max_span_tokens, guidance_len)
                    else {
                        continue;
                    };
                    // strict improvement keeps the earliest context and span on ties
                    if best.as_ref().is_none_or(|b| score > b.score) {
                        best = Some(QaResponse {
                            answer: context[start..end].to_string(),
                            score,
                            context_index: ci,
                            start,
                            end,
                        });
                    }
                }
            }
        }
        Ok(best.map_or(QaOutcome::NoAnswer, QaOutcome::Answer))
    }
}

/// Feature-hashed token counts. Vectors are not length-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    pub dimension: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dimension: REFERENCE_DIMENSION,
        }
    }
}

impl HashEmbedder {
    pub fn vector(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0; self.dimension];
        for tok in tokenize(text).content() {
            v[(fnv1a(tok.as_bytes()) % self.dimension as u64) as usize] += 1.0;
        }
        v
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse> {
        req.validate()?;
        Ok(EmbedResponse {
            vectors: req.texts.iter().map(|t| self.vector(t)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::scalar::dot;
    use proptest::prelude::*;

    fn qg(context: &str, topic: &str, n: usize) -> Result<QgResponse> {
        TemplateQuestionGenerator.generate_pairs(&QgRequest {
            context: context.into(),
            topic: topic.into(),
            num_samples: n,
            top_p: 0.75,
            seed: 7,
        })
    }

    fn qa(question: &str, guidance: &str, contexts: &[&str], cap: usize) -> Result<QaOutcome> {
        TemplateAnswerer.answer_span(&QaRequest {
            question: question.into(),
            guidance: guidance.into(),
            contexts: contexts.iter().map(|s| s.to_string()).collect(),
            max_span_tokens: cap,
        })
    }

    #[test]
    fn qg_template_rule() {
        let resp = qg("the party of joseph stalin is communist party .", "joseph stalin", 10).unwrap();
        assert_eq!(resp.pairs, [QgPair {
            question: "what is the party of joseph stalin ?".into(),
            entity: "communist party".into(),
        }]);
    }

    #[test]
    fn qg_multiple_templates_and_truncation() {
        let ctx = "The birthplace of Ada Lovelace is London. the field of ada lovelace is mathematics .";
        let all = qg(ctx, "ada lovelace", 10).unwrap().pairs;
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].question, "what is the birthplace of Ada Lovelace ?");
        assert_eq!(all[0].entity, "London");
        assert_eq!(all[1].entity, "mathematics");
        assert_eq!(qg(ctx, "ada lovelace", 1).unwrap().pairs.len(), 1);
    }

    #[test]
    fn qg_without_template_is_empty() {
        assert!(qg("stalin was a leader", "stalin", 3).unwrap().pairs.is_empty());
        assert!(qg("the party of lenin is bolshevik .", "stalin", 3).unwrap().pairs.is_empty());
    }

    #[test]
    fn qg_preconditions() {
        assert!(matches!(qg("x", "x", 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn qa_template_rule() {
        let out = qa(
            "what is the party of nelson mandela ?",
            "communist party",
            &["the party of nelson mandela is anc ."],
            4,
        )
        .unwrap()
        .into_answer()
        .unwrap();
        assert_eq!(out.answer, "anc");
        assert_eq!((out.context_index, out.start, out.end), (0, 31, 34));
        // exact topic match, |1 - 2| specificity gap
        assert_eq!(out.score, -1.0);
    }

    #[test]
    fn qa_specificity_tie_breaks_on_context_order() {
        let contexts = [
            "the party of nelson mandela is anc .",
            "the party of nelson mandela is african national congress .",
        ];
        let out = qa("what is the party of nelson mandela ?", "communist party", &contexts, 4)
            .unwrap()
            .into_answer()
            .unwrap();
        assert_eq!(out.answer, "anc");
        assert_eq!(out.context_index, 0);

        let swapped = [contexts[1], contexts[0]];
        let out = qa("what is the party of nelson mandela ?", "communist party", &swapped, 4)
            .unwrap()
            .into_answer()
            .unwrap();
        assert_eq!(out.answer, "african national congress");
    }

    #[test]
    fn qa_prefers_matching_specificity() {
        let contexts = [
            "the party of nelson mandela is anc .",
            "the party of nelson mandela is african national .",
        ];
        let out = qa("what is the party of nelson mandela ?", "communist party", &contexts, 4)
            .unwrap()
            .into_answer()
            .unwrap();
        assert_eq!(out.answer, "african national");
        assert_eq!(out.score, 0.0);
    }

    #[test]
    fn qa_generic_question_matches_with_penalty() {
        let out = qa(
            "what is the party of ?",
            "communist party",
            &["the hub of delta is atlanta .", "the party of nelson mandela is anc ."],
            4,
        )
        .unwrap()
        .into_answer()
        .unwrap();
        assert_eq!(out.answer, "anc");
        assert_eq!(out.score, PARTIAL_MATCH_PENALTY - 1.0);
    }

    #[test]
    fn qa_respects_span_cap() {
        let out = qa(
            "what is the party of nelson mandela ?",
            "x",
            &["the party of nelson mandela is african national congress ."],
            2,
        )
        .unwrap();
        assert_eq!(out, QaOutcome::NoAnswer);
    }

    #[test]
    fn qa_no_match_and_preconditions() {
        assert_eq!(
            qa("who is he ?", "x", &["the party of a is b ."], 2).unwrap(),
            QaOutcome::NoAnswer
        );
        assert!(matches!(qa("q", "g", &[], 2), Err(Error::Precondition(_))));
        assert!(matches!(qa("q", "g", &["c"], 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn qa_attribute_containing_of() {
        let out = qa(
            "what is the place of birth of ada ?",
            "paris",
            &["the place of birth of ada is london ."],
            2,
        )
        .unwrap()
        .into_answer()
        .unwrap();
        assert_eq!(out.answer, "london");
    }

    #[test]
    fn embed_is_deterministic_count_vector() {
        let e = HashEmbedder::default();
        let resp = e
            .embed(&EmbedRequest {
                texts: vec!["a a b".into(), "a b".into(), "a a b".into()],
            })
            .unwrap();
        assert_eq!(resp.vectors[0], resp.vectors[2]);
        assert_eq!(resp.vectors[0].len(), REFERENCE_DIMENSION);
        let ia = (fnv1a(b"a") % 256) as usize;
        let ib = (fnv1a(b"b") % 256) as usize;
        assert_ne!(ia, ib);
        assert_eq!(resp.vectors[0][ia], 2.0);
        assert_eq!(resp.vectors[0][ib], 1.0);
        // 2^2 + 1^2 against 1^2 + 1^2
        assert_eq!(dot(&resp.vectors[0], &resp.vectors[0]), 5.0);
        assert_eq!(dot(&resp.vectors[1], &resp.vectors[1]), 2.0);
        assert!(e.embed(&EmbedRequest { texts: vec![] }).is_err());
    }

    proptest! {
        #[test]
        fn self_similarity_dominates_subsets(words in prop::collection::vec("[a-e]{1,3}", 1..12), mask in prop::collection::vec(any::<bool>(), 12)) {
            let e = HashEmbedder::default();
            let full = words.join(" ");
            let sub: Vec<&str> = words.iter().zip(&mask).filter(|(_, m)| **m).map(|(w, _)| w.as_str()).collect();
            let vf = e.vector(&full);
            let vs = e.vector(&sub.join(" "));
            prop_assert!(dot(&vf, &vf) >= dot(&vs, &vs));
            prop_assert!(dot(&vf, &vf) >= dot(&vf, &vs));
        }
    }
}

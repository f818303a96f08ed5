//! Deterministic text processing: tokenization, sentence splitting, and
//! case-insensitive substring search.
//!
//! All offsets are UTF-8 byte offsets into the original string, so
//! `&text[start..end]` is always the matched or tokenized surface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Lowercased surface with surrounding punctuation stripped. Empty for
    /// pure-punctuation tokens.
    pub normalized: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_punctuation(&self) -> bool {
        self.normalized.is_empty()
    }

    /// Key used for multiset comparisons: the normalized form, or the raw
    /// surface for punctuation so that `?` and `.` stay distinct.
    pub fn match_key(&self) -> &str {
        if self.normalized.is_empty() {
            &self.surface
        } else {
            &self.normalized
        }
    }
}

/// Tokenization of one string, keeping the source for exact reconstruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    text: String,
    tokens: Vec<Token>,
}

impl TokenSeq {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    /// Normalized forms of the non-punctuation tokens.
    pub fn content(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .filter(|t| !t.is_punctuation())
            .map(|t| t.normalized.as_str())
    }

    /// Rebuilds the source string from token surfaces and the whitespace
    /// gaps between their recorded spans.
    pub fn detokenize(&self) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut cursor = 0;
        for tok in &self.tokens {
            out.push_str(&self.text[cursor..tok.start]);
            out.push_str(&tok.surface);
            cursor = tok.end;
        }
        out.push_str(&self.text[cursor..]);
        out
    }
}

pub(crate) fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

fn push_token(tokens: &mut Vec<Token>, text: &str, start: usize, end: usize) {
    let surface = &text[start..end];
    tokens.push(Token {
        surface: surface.to_string(),
        normalized: surface.trim_matches(is_punct).to_lowercase(),
        start,
        end,
    });
}

/// Splits on whitespace and detaches boundary punctuation, one token per
/// punctuation character.
///
/// A trailing period stays attached when the remaining word already contains
/// a period, so abbreviations such as `U.S.` and `e.g.` survive intact.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut chunk_start = None;
    let boundaries = text
        .char_indices()
        .map(|(i, c)| (i, Some(c)))
        .chain(std::iter::once((text.len(), None)));
    for (i, c) in boundaries {
        match (c.is_none_or(char::is_whitespace), chunk_start) {
            (true, Some(s)) => {
                tokenize_chunk(&mut tokens, text, s, i);
                chunk_start = None;
            }
            (false, None) => chunk_start = Some(i),
            _ => {}
        }
    }
    TokenSeq {
        text: text.to_string(),
        tokens,
    }
}

fn tokenize_chunk(tokens: &mut Vec<Token>, text: &str, start: usize, end: usize) {
    let chunk = &text[start..end];
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();

    let lead = chars.iter().take_while(|(_, c)| is_punct(*c)).count();
    if lead == chars.len() {
        for (off, c) in &chars {
            push_token(tokens, text, start + off, start + off + c.len_utf8());
        }
        return;
    }
    let trail = chars.iter().rev().take_while(|(_, c)| is_punct(*c)).count();
    let mut core_end_idx = chars.len() - trail;
    let core_start = start + chars[lead].0;
    let core_has_period = chars[lead..core_end_idx].iter().any(|(_, c)| *c == '.');
    if trail > 0 && core_has_period && chars[core_end_idx].1 == '.' {
        core_end_idx += 1;
    }
    let core_end = chars
        .get(core_end_idx)
        .map_or(end, |(off, _)| start + off);

    for (off, c) in &chars[..lead] {
        push_token(tokens, text, start + off, start + off + c.len_utf8());
    }
    push_token(tokens, text, core_start, core_end);
    for (off, c) in &chars[core_end_idx..] {
        push_token(tokens, text, start + off, start + off + c.len_utf8());
    }
}

/// Number of tokens, punctuation included. This is the unit for span caps
/// and specificity comparisons.
pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}

/// Normalized non-punctuation tokens, the unit all metrics count in.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text).content().map(str::to_string).collect()
}

/// Rule-based sentence splitter.
///
/// Splits after `.`, `!` or `?` when followed by whitespace and then an
/// uppercase letter, or by the end of the string. A period directly after a
/// lone uppercase letter (an initial) never splits.
pub fn sentence_split(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut seg_start = 0;
    for (pos, &(byte, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        if c == '.' && is_initial(&chars, pos) {
            continue;
        }
        let rest = &chars[pos + 1..];
        let splits = match rest.first() {
            None => true,
            Some((_, n)) if n.is_whitespace() => rest
                .iter()
                .find(|(_, ch)| !ch.is_whitespace())
                .is_none_or(|(_, ch)| ch.is_uppercase()),
            Some(_) => false,
        };
        if splits {
            let cut = byte + c.len_utf8();
            push_sentence(&mut out, &text[seg_start..cut]);
            seg_start = cut;
        }
    }
    push_sentence(&mut out, &text[seg_start..]);
    out
}

fn is_initial(chars: &[(usize, char)], pos: usize) -> bool {
    match pos.checked_sub(1).map(|p| chars[p].1) {
        Some(prev) if prev.is_uppercase() => {
            pos < 2 || !chars[pos - 2].1.is_alphanumeric()
        }
        _ => false,
    }
}

fn push_sentence(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn chars_eq_ci(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// All case-insensitive, non-overlapping occurrences of `needle`,
/// leftmost first. No token boundaries are required.
pub fn find_occurrences(haystack: &str, needle: &str) -> Result<Vec<(usize, usize)>> {
    if needle.is_empty() {
        return Err(Error::InvalidEntity("empty search string".into()));
    }
    let needle: Vec<char> = needle.chars().collect();
    let hay: Vec<(usize, char)> = haystack.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i + needle.len() <= hay.len() {
        let hit = needle
            .iter()
            .zip(&hay[i..])
            .all(|(n, (_, h))| chars_eq_ci(*n, *h));
        if hit {
            let j = i + needle.len();
            let end = hay.get(j).map_or(haystack.len(), |(b, _)| *b);
            out.push((hay[i].0, end));
            i = j;
        } else {
            i += 1;
        }
    }
    Ok(out)
}

pub fn contains_ci(haystack: &str, needle: &str) -> bool {
    matches!(find_occurrences(haystack, needle), Ok(v) if !v.is_empty())
}

/// Replaces every case-insensitive occurrence of `needle` with
/// `replacement`, inserted verbatim.
pub fn replace_all_ci(haystack: &str, needle: &str, replacement: &str) -> Result<String> {
    let mut out = String::with_capacity(haystack.len());
    let mut cursor = 0;
    for (s, e) in find_occurrences(haystack, needle)? {
        out.push_str(&haystack[cursor..s]);
        out.push_str(replacement);
        cursor = e;
    }
    out.push_str(&haystack[cursor..]);
    Ok(out)
}

/// Lowercased, trimmed form used for entity comparisons.
pub fn normalize_phrase(s: &str) -> String {
    s.trim().to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(s: &str) -> Vec<String> {
        tokenize(s).surfaces().map(str::to_string).collect()
    }

    fn normalized(s: &str) -> Vec<String> {
        tokenize(s).tokens().iter().map(|t| t.normalized.clone()).collect()
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t").is_empty());
    }

    #[test]
    fn tokenize_detaches_final_period() {
        assert_eq!(surfaces("Melatonin is used."), ["Melatonin", "is", "used", "."]);
        assert_eq!(normalized("Melatonin is used."), ["melatonin", "is", "used", ""]);
    }

    #[test]
    fn tokenize_keeps_abbreviation() {
        assert_eq!(surfaces("U.S. News"), ["U.S.", "News"]);
        assert_eq!(normalized("U.S. News"), ["u.s", "news"]);
        assert_eq!(surfaces("the U.S.,"), ["the", "U.S.", ","]);
    }

    #[test]
    fn tokenize_punctuation_runs() {
        assert_eq!(surfaces("(hello)?!"), ["(", "hello", ")", "?", "!"]);
        assert_eq!(surfaces("..."), [".", ".", "."]);
        assert_eq!(surfaces("$21,090 stalin's"), ["$", "21,090", "stalin's"]);
    }

    #[test]
    fn tokenize_offsets_are_exact() {
        let s = "  Héllo,  wörld! ";
        let seq = tokenize(s);
        for t in seq.tokens() {
            assert_eq!(&s[t.start..t.end], t.surface);
        }
        assert_eq!(seq.detokenize(), s);
    }

    #[test]
    fn split_examples() {
        assert_eq!(sentence_split("A. B."), ["A. B."]);
        assert_eq!(sentence_split("It works. It helps."), ["It works.", "It helps."]);
        assert_eq!(sentence_split("one sentence"), ["one sentence"]);
        assert!(sentence_split("").is_empty());
    }

    #[test]
    fn split_requires_uppercase_continuation() {
        assert_eq!(sentence_split("the a of b is c . the d of b is e ."), [
            "the a of b is c . the d of b is e ."
        ]);
        assert_eq!(sentence_split("Why? Because!"), ["Why?", "Because!"]);
        assert_eq!(sentence_split("John F. Kennedy was here. Yes."), [
            "John F. Kennedy was here.",
            "Yes."
        ]);
    }

    #[test]
    fn occurrences_examples() {
        assert_eq!(find_occurrences("aaa", "aa").unwrap(), [(0, 2)]);
        assert_eq!(
            find_occurrences("Joseph Stalin belongs to", "joseph stalin").unwrap(),
            [(0, 13)]
        );
        assert!(find_occurrences("abc", "z").unwrap().is_empty());
        assert!(matches!(find_occurrences("abc", ""), Err(Error::InvalidEntity(_))));
    }

    #[test]
    fn occurrences_multibyte() {
        let s = "Ärger und ärger";
        let occ = find_occurrences(s, "ärger").unwrap();
        assert_eq!(occ.len(), 2);
        for (a, b) in occ {
            assert_eq!(s[a..b].to_lowercase(), "ärger");
        }
    }

    #[test]
    fn replace_is_verbatim() {
        assert_eq!(
            replace_all_ci("What is Joseph Stalin's party?", "joseph stalin", "Nelson Mandela")
                .unwrap(),
            "What is Nelson Mandela's party?"
        );
    }

    proptest! {
        #[test]
        fn tokenize_round_trip(s in "\\PC{0,60}") {
            let seq = tokenize(&s);
            prop_assert_eq!(seq.detokenize(), s.clone());
            let mut last_end = 0;
            for t in seq.tokens() {
                prop_assert!(t.start >= last_end && t.start < t.end);
                prop_assert_eq!(&s[t.start..t.end], t.surface.as_str());
                prop_assert!(s[last_end..t.start].chars().all(char::is_whitespace));
                prop_assert!(!t.normalized.is_empty() || t.surface.chars().all(is_punct));
                last_end = t.end;
            }
            prop_assert!(s[last_end..].chars().all(char::is_whitespace));
        }

        #[test]
        fn split_covers_input(s in "[A-Za-z .!?\\n]{0,80}") {
            let parts = sentence_split(&s);
            let joined: String = parts.join(" ").chars().filter(|c| !c.is_whitespace()).collect();
            let orig: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, orig);
        }

        #[test]
        fn occurrences_sorted_disjoint(h in "[abAB ]{0,40}", n in "[abAB]{1,3}") {
            let occ = find_occurrences(&h, &n).unwrap();
            for w in occ.windows(2) {
                prop_assert!(w[0].1 <= w[1].0);
            }
            for (a, b) in occ {
                prop_assert_eq!(h[a..b].to_lowercase(), n.to_lowercase());
            }
        }
    }
}

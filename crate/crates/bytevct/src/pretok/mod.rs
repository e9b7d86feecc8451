//! Pretokenization: rule-based splitting, added-token matching, and the
//! incremental split state used while bytes stream in.

mod chars;
mod rules;
pub(crate) mod scan;
mod stream;

pub(crate) use chars::{class_of, decode};
pub use chars::Ch;
pub use rules::{Align, Lead, Rule, RuleSet, CL100K_PATTERN, GPT2_PATTERN, QWEN2_PATTERN, RIGHT_ALIGNED_PATTERN};
pub use scan::{Outcome, SegKind};
pub use stream::{advance, scan_added_tokens, AddedMatch, AddedTokenMatcher, SplitDecision, SplitState};

use scan::{split_known, AddedSet, AddedTok, Reps, Scanner};

use crate::TokenId;

/// A piece of text after added-token extraction and rule splitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Piece<'t> {
    Text(&'t [u8]),
    Added(TokenId),
}

/// Rules plus the added-token registry of one tokenizer.
pub struct Pretokenizer {
    rules: RuleSet,
    added: AddedSet,
    reps: Reps,
    horizon: usize,
}

impl std::fmt::Debug for Pretokenizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pretokenizer").field("rules", &self.rules).field("added", &self.added.toks.len()).finish()
    }
}

/// Unknown characters considered past the end of a prefix. Enough for the
/// longest contraction, digit residues and whitespace look-ahead.
const BASE_HORIZON: usize = 4;

impl Pretokenizer {
    /// `added`: non-special added tokens as (id, content). `alphabet`: bytes
    /// that have a base token.
    pub fn new(rules: RuleSet, added: &[(TokenId, Vec<u8>)], alphabet: &[u8]) -> Self {
        let toks: Vec<AddedTok> = added
            .iter()
            .map(|(id, b)| AddedTok {
                id: *id,
                chars: String::from_utf8_lossy(b).chars().collect(),
                bytes: b.clone(),
            })
            .collect();
        let added = AddedSet::new(toks);
        let chars: Vec<Vec<char>> = added.toks.iter().map(|t| t.chars.clone()).collect();
        let reps = Reps::new(alphabet, &rules, &chars);
        let horizon = BASE_HORIZON.max(added.max_chars() + 1);
        Pretokenizer { rules, added, reps, horizon }
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn has_added(&self) -> bool {
        !self.added.is_empty()
    }

    /// Added-token extraction followed by rule splitting, in text order.
    pub fn pieces<'t>(&self, text: &'t [u8]) -> Vec<Piece<'t>> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let (gap_end, hit) = match self.added.find(text, pos) {
                Some((s, t)) => (s, Some(t)),
                None => (text.len(), None),
            };
            self.split_into(&text[pos..gap_end], &mut out);
            pos = gap_end;
            if let Some(t) = hit {
                out.push(Piece::Added(t.id));
                pos += t.bytes.len();
            }
        }
        out
    }

    fn split_into<'t>(&self, gap: &'t [u8], out: &mut Vec<Piece<'t>>) {
        if gap.is_empty() {
            return;
        }
        let d = decode(gap, false);
        let mut starts = Vec::new();
        split_known(&d.chars, &self.rules, &self.reps, 0, d.chars.len(), &mut starts);
        for (k, &c) in starts.iter().enumerate() {
            let a = d.chars[c].start;
            let b = starts.get(k + 1).map_or(gap.len(), |&n| d.chars[n].start);
            out.push(Piece::Text(&gap[a..b]));
        }
    }

    pub(crate) fn scanner(&self) -> Scanner<'_> {
        Scanner { rules: &self.rules, added: &self.added, reps: &self.reps, horizon: self.horizon }
    }

    /// Every pretoken structure of `prefix` over all possible continuations.
    pub fn outcomes(&self, prefix: &[u8]) -> Vec<Outcome> {
        self.scanner().project(prefix)
    }

    pub(crate) fn added_tokens(&self) -> impl Iterator<Item = (TokenId, &[u8])> {
        self.added.toks.iter().map(|t| (t.id, t.bytes.as_slice()))
    }
}

/// Rule splitting alone (no added tokens). Empty text gives no pretokens.
pub fn pretokenize<'t>(text: &'t [u8], rules: &RuleSet) -> Vec<&'t [u8]> {
    let alphabet: Vec<u8> = (0..=255).collect();
    let p = Pretokenizer::new(rules.clone(), &[], &alphabet);
    p.pieces(text)
        .into_iter()
        .map(|x| match x {
            Piece::Text(t) => t,
            Piece::Added(_) => unreachable!(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(rules: &RuleSet, s: &str) -> Vec<String> {
        pretokenize(s.as_bytes(), rules).iter().map(|b| String::from_utf8_lossy(b).into_owned()).collect()
    }

    #[test]
    fn gpt2_examples() {
        let r = RuleSet::gpt2();
        assert_eq!(split(&r, "hello world"), ["hello", " world"]);
        assert_eq!(split(&r, "   a"), ["  ", " a"]);
        assert_eq!(split(&r, "don't"), ["don", "'t"]);
        assert_eq!(split(&r, "x  "), ["x", "  "]);
        assert!(split(&r, "").is_empty());
    }

    #[test]
    fn cl100k_examples() {
        let r = RuleSet::cl100k();
        assert_eq!(split(&r, "it'ſ IT'S x'ſa"), ["it", "'ſ", " IT", "'S", " x", "'ſ", "a"]);
        assert_eq!(split(&r, "   a  \n\n  b \r\n x"), ["  ", " a", "  \n\n", " ", " b", " \r\n", " x"]);
        assert_eq!(split(&r, "12345"), ["123", "45"]);
        assert_eq!(split(&r, "  0"), [" ", " ", "0"]);
    }

    #[test]
    fn right_aligned_digits() {
        let r = RuleSet::right_aligned_digits();
        assert_eq!(split(&r, "1234567 12 1234a"), ["1", "234", "567", " ", "12", " ", "1", "234", "a"]);
    }

    #[test]
    fn added_tokens_cut_gaps() {
        let alphabet: Vec<u8> = (0..=255).collect();
        let p = Pretokenizer::new(RuleSet::gpt2(), &[(7, b"http".to_vec())], &alphabet);
        let pieces = p.pieces(b"xhttpy  http");
        assert_eq!(
            pieces,
            vec![Piece::Text(b"x"), Piece::Added(7), Piece::Text(b"y"), Piece::Text(b"  "), Piece::Added(7)]
        );
    }

    #[test]
    fn outcomes_cover_continuations() {
        let alphabet: Vec<u8> = (0..=255).collect();
        let p = Pretokenizer::new(RuleSet::cl100k(), &[], &alphabet);
        // "a " can end here, continue as " b", or grow a whitespace run
        let o = p.outcomes(b"a ");
        let exact: Vec<bool> = o.iter().map(|x| x.end_exact).collect();
        assert!(exact.contains(&true) && exact.contains(&false));
        // a lone apostrophe after a letter: contraction or punctuation
        let o = p.outcomes(b"x'");
        assert!(o.iter().all(|x| x.starts == vec![(0, SegKind::Text), (1, SegKind::Text)]));
        // a pending lead byte: completes into one char, or stays invalid
        let o = p.outcomes(&"é".as_bytes()[..1]);
        assert!(!o.is_empty());
    }
}

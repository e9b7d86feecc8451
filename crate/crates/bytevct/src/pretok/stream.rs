use super::scan::{Outcome, SegKind};
use super::{Piece, Pretokenizer};
use crate::TokenId;

/// Incremental split state: the bytes since the last settled boundary.
#[derive(Clone, Debug, Default)]
pub struct SplitState {
    buf: Vec<u8>,
    base: usize,
    decided: usize,
    resolved: Vec<usize>,
    live: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SplitDecision {
    NoSplit,
    ForcedSplit,
    /// The boundary depends on bytes not seen yet; one outcome per class of
    /// continuation.
    Ambiguous(Vec<Outcome>),
}

impl SplitState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Settled boundaries (absolute byte offsets) since the last call.
    pub fn take_resolved(&mut self) -> Vec<usize> {
        std::mem::take(&mut self.resolved)
    }

    /// Number of distinct pretoken structures still possible.
    pub fn live_hypotheses(&self) -> usize {
        self.live
    }

    pub fn consumed(&self) -> usize {
        self.base + self.buf.len()
    }

    /// Ends the stream: the remaining boundaries, assuming no more bytes.
    pub fn finish(mut self, pt: &Pretokenizer) -> Vec<usize> {
        let mut out = self.take_resolved();
        let mut off = self.base;
        for p in pt.pieces(&self.buf) {
            if off >= self.decided {
                out.push(off);
            }
            off += match p {
                Piece::Text(t) => t.len(),
                Piece::Added(id) => pt.added_tokens().find(|(i, _)| *i == id).map_or(0, |(_, b)| b.len()),
            };
        }
        out
    }
}

fn has(o: &Outcome, x: usize) -> Option<SegKind> {
    o.starts.iter().find(|s| s.0 == x).map(|s| s.1)
}

/// Feeds one byte. The decision is about the boundary right before `byte`.
pub fn advance(pt: &Pretokenizer, mut st: SplitState, byte: u8) -> (SplitState, SplitDecision) {
    st.buf.push(byte);
    let outs = pt.outcomes(&st.buf);
    st.live = outs.len();
    let n = st.buf.len();
    let agree = |x: usize| -> Option<Option<SegKind>> {
        let first = has(&outs[0], x);
        outs.iter().all(|o| has(o, x) == first).then_some(first)
    };
    let mut root = None;
    let mut x = st.decided - st.base;
    while x < n {
        match agree(x) {
            Some(Some(_)) => {
                st.resolved.push(st.base + x);
                root = Some(x);
            }
            Some(None) => {}
            None => break,
        }
        x += 1;
    }
    st.decided = st.base + x;
    let p = n - 1;
    let decision = match agree(p) {
        Some(Some(_)) => SplitDecision::ForcedSplit,
        Some(None) => SplitDecision::NoSplit,
        None => SplitDecision::Ambiguous(outs),
    };
    if let Some(r) = root {
        if r > 0 {
            st.buf.drain(..r);
            st.base += r;
        }
    }
    (st, decision)
}

/// Streaming matcher over added and special token strings. Tracks every
/// partial match so overlapping candidates are all visible at the frontier.
#[derive(Clone, Debug)]
pub struct AddedTokenMatcher {
    pats: Vec<(TokenId, Vec<u8>, bool)>,
    active: Vec<(usize, usize, usize)>,
    pos: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddedMatch {
    pub id: TokenId,
    pub start: usize,
    pub matched: usize,
    pub len: usize,
    pub special: bool,
}

impl AddedTokenMatcher {
    pub fn new(pats: Vec<(TokenId, Vec<u8>, bool)>) -> Self {
        AddedTokenMatcher { pats: pats.into_iter().filter(|p| !p.1.is_empty()).collect(), active: Vec::new(), pos: 0 }
    }
}

/// Advances the matcher by one byte: (full matches ending here, live partials).
pub fn scan_added_tokens(m: &mut AddedTokenMatcher, byte: u8) -> (Vec<AddedMatch>, Vec<AddedMatch>) {
    let pos = m.pos;
    m.pos += 1;
    for k in 0..m.pats.len() {
        m.active.push((k, pos, 0));
    }
    let mut full = Vec::new();
    let mut partial = Vec::new();
    let pats = &m.pats;
    m.active.retain_mut(|(k, start, matched)| {
        let p = &pats[*k].1;
        if p[*matched] != byte {
            return false;
        }
        *matched += 1;
        let rec = AddedMatch { id: pats[*k].0, start: *start, matched: *matched, len: p.len(), special: pats[*k].2 };
        if *matched == p.len() {
            full.push(rec);
            false
        } else {
            partial.push(rec);
            true
        }
    });
    (full, partial)
}

#[cfg(test)]
mod tests {
    use super::super::RuleSet;
    use super::*;

    fn boundaries(pt: &Pretokenizer, text: &[u8]) -> Vec<usize> {
        let mut off = 0;
        pt.pieces(text)
            .into_iter()
            .map(|p| {
                let b = off;
                off += match p {
                    Piece::Text(t) => t.len(),
                    Piece::Added(_) => 4,
                };
                b
            })
            .collect()
    }

    fn streamed(pt: &Pretokenizer, text: &[u8]) -> Vec<usize> {
        let mut st = SplitState::new();
        let mut out = Vec::new();
        for &b in text {
            let (s, _) = advance(pt, st, b);
            st = s;
            out.extend(st.take_resolved());
        }
        out.extend(st.finish(pt));
        out
    }

    #[test]
    fn streaming_matches_batch() {
        let alphabet: Vec<u8> = (0..=255).collect();
        for rules in [RuleSet::gpt2(), RuleSet::cl100k(), RuleSet::right_aligned_digits(), RuleSet::qwen2()] {
            let pt = Pretokenizer::new(rules, &[(9, b"http".to_vec())], &alphabet);
            for text in [
                "Hello   world's 12345 ok\r\n\n  x",
                "don'T  'll 'LL 'ſ? é€😀 \u{a0}\u{2028}y",
                "1234567 12 1234a  htt http  httpx",
            ] {
                assert_eq!(streamed(&pt, text.as_bytes()), boundaries(&pt, text.as_bytes()), "{text:?}");
            }
            let bad = b"ab\xe2\x82 \xf0\x9f\x98cd\xff  ";
            assert_eq!(streamed(&pt, bad), boundaries(&pt, bad));
        }
    }

    #[test]
    fn decisions() {
        let alphabet: Vec<u8> = (0..=255).collect();
        let pt = Pretokenizer::new(RuleSet::gpt2(), &[], &alphabet);
        let mut st = SplitState::new();
        for &b in b"don" {
            st = advance(&pt, st, b).0;
        }
        let (st, d) = advance(&pt, st, b'\'');
        assert_eq!(d, SplitDecision::ForcedSplit);
        let (_, d) = advance(&pt, st, b'v');
        assert!(matches!(d, SplitDecision::Ambiguous(_)));
        let mut st = SplitState::new();
        st = advance(&pt, st, b'x').0;
        assert_eq!(advance(&pt, st, b'y').1, SplitDecision::NoSplit);
    }

    #[test]
    fn added_matcher_reports_partials() {
        let mut m = AddedTokenMatcher::new(vec![(1, b"ab".to_vec(), false), (2, b"abc".to_vec(), false)]);
        scan_added_tokens(&mut m, b'a');
        let (full, partial) = scan_added_tokens(&mut m, b'b');
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].id, 1);
        assert_eq!(partial.len(), 1);
        assert_eq!(partial[0].id, 2);
    }
}

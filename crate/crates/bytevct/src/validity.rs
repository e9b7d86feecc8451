//! Token validity: the boundary merge check for adjacent tokens, sequence
//! validity under pretokenization, and cached token masks.

use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;

use crate::pretok::Piece;
use crate::tokenizer::Tokenizer;
use crate::TokenId;

const NEVER: u32 = u32::MAX;

/// Edge of a token's merge tree: `(token, rank at which it is consumed)`,
/// from the token itself (never consumed) down to its base byte.
fn spine(tk: &Tokenizer, t: TokenId, right: bool, out: &mut Vec<(TokenId, u32)>) {
    out.clear();
    let mut cur = t;
    let mut death = NEVER;
    loop {
        out.push((cur, death));
        match tk.forming(cur) {
            Some((l, r, rank)) => {
                death = rank;
                cur = if right { r } else { l };
            }
            None => break,
        }
    }
}

/// Whether BPE keeps `a` and `b` apart when their bytes sit in one pretoken.
/// Both tokens must be canonical. Replays the merges along the shared
/// boundary in rank order: the pair breaks iff some merge across it becomes
/// available while both of its inputs are still on the boundary.
pub fn bpe_pair_valid(tk: &Tokenizer, a: TokenId, b: TokenId) -> bool {
    thread_local! {
        static BUF: std::cell::RefCell<(Vec<(TokenId, u32)>, Vec<(TokenId, u32)>)> = Default::default();
    }
    BUF.with(|buf| {
        let (ls, rs) = &mut *buf.borrow_mut();
        spine(tk, a, true, ls);
        spine(tk, b, false, rs);
        // walk both spines bottom-up, visiting every pair alive at once
        let (mut i, mut j) = (ls.len() - 1, rs.len() - 1);
        loop {
            let (l, dl) = ls[i];
            let (r, dr) = rs[j];
            if let Some(rho) = tk.merge_rank(l, r) {
                // ties: a left-side merge at the same rank is further left
                if rho < dl && rho <= dr {
                    return false;
                }
            }
            match dl.cmp(&dr) {
                std::cmp::Ordering::Less => i -= 1,
                std::cmp::Ordering::Greater => j -= 1,
                std::cmp::Ordering::Equal => {
                    if dl == NEVER {
                        return true;
                    }
                    i -= 1;
                    j -= 1;
                }
            }
        }
    })
}

/// `encode(decode([a, b])) == [a, b]`.
pub fn is_pair_valid(tk: &Tokenizer, a: TokenId, b: TokenId) -> bool {
    if tk.is_special(a) || tk.is_special(b) {
        return false;
    }
    let joined = [tk.token_bytes(a), tk.token_bytes(b)].concat();
    let pieces = tk.pieces(&joined);
    if let [Piece::Text(p)] = pieces.as_slice() {
        if p.len() == joined.len() && tk.is_canonical(a) && tk.is_canonical(b) {
            if tk.ignore_merges() && tk.vocab_id(p).is_some() {
                return false;
            }
            return bpe_pair_valid(tk, a, b);
        }
    }
    tk.try_encode(&joined).map(|e| e == [a, b]).unwrap_or(false)
}

/// Tokens of one pretoken are exactly its encoding. Uses the pair check when
/// every token is canonical and no vocabulary shortcut applies.
fn segment_valid(tk: &Tokenizer, bytes: &[u8], toks: &[TokenId]) -> bool {
    if tk.ignore_merges() {
        if let Some(id) = tk.vocab_id(bytes) {
            return toks == [id];
        }
    }
    if toks.iter().all(|&t| tk.is_canonical(t)) {
        toks.windows(2).all(|w| bpe_pair_valid(tk, w[0], w[1]))
    } else {
        tk.bpe(bytes).map(|e| e == toks).unwrap_or(false)
    }
}

/// `encode(decode(seq)) == seq`, checked pretoken by pretoken. Validity is
/// not closed under prefixes once pretokenization looks ahead: `"  "` as two
/// single spaces is invalid on its own but valid when a digit follows.
pub fn is_sequence_valid(tk: &Tokenizer, seq: &[TokenId]) -> bool {
    if seq.iter().any(|&t| (t as usize) >= tk.vocab_size() || tk.is_special(t)) {
        return false;
    }
    let text = match tk.decode(seq) {
        Ok(t) => t,
        Err(_) => return false,
    };
    let mut k = 0;
    let mut off = 0;
    for p in tk.pieces(&text) {
        match p {
            Piece::Added(id) => {
                if seq.get(k) != Some(&id) {
                    return false;
                }
                off += tk.token_bytes(id).len();
                k += 1;
            }
            Piece::Text(b) => {
                let end = off + b.len();
                let first = k;
                let mut at = off;
                while at < end {
                    let Some(&t) = seq.get(k) else { return false };
                    at += tk.token_bytes(t).len();
                    k += 1;
                }
                if at != end || !segment_valid(tk, b, &seq[first..k]) {
                    return false;
                }
                off = end;
            }
        }
    }
    k == seq.len()
}

/// Fixed-size bitset over token ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSet {
    words: Vec<u64>,
    len: usize,
}

impl TokenSet {
    pub fn empty(len: usize) -> Self {
        TokenSet { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i as TokenId);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, t: TokenId) {
        self.words[t as usize / 64] |= 1 << (t % 64);
    }

    pub fn remove(&mut self, t: TokenId) {
        self.words[t as usize / 64] &= !(1 << (t % 64));
    }

    pub fn contains(&self, t: TokenId) -> bool {
        (t as usize) < self.len && self.words[t as usize / 64] >> (t % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersect(&self, other: &TokenSet) -> TokenSet {
        TokenSet { words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(), len: self.len }
    }

    pub fn iter(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some(i as TokenId * 64 + b)
            })
        })
    }
}

/// Text tokens sorted by their bytes, so the tokens sharing a prefix form a
/// contiguous run.
#[derive(Debug)]
pub struct PrefixIndex {
    sorted: Vec<TokenId>,
    keys: Vec<Box<[u8]>>,
}

impl PrefixIndex {
    pub fn new(tk: &Tokenizer) -> Self {
        let mut sorted: Vec<TokenId> = (0..tk.vocab_size() as TokenId).filter(|&t| !tk.is_special(t)).collect();
        sorted.sort_by(|&a, &b| tk.token_bytes(a).cmp(tk.token_bytes(b)).then(a.cmp(&b)));
        let keys = sorted.iter().map(|&t| tk.token_bytes(t).into()).collect();
        PrefixIndex { sorted, keys }
    }

    /// Tokens whose bytes start with `p` (all text tokens for empty `p`).
    pub fn with_prefix(&self, p: &[u8]) -> &[TokenId] {
        let lo = self.keys.partition_point(|k| &k[..] < p);
        let hi = lo + self.keys[lo..].partition_point(|k| k.starts_with(p));
        &self.sorted[lo..hi]
    }

    /// Like [`with_prefix`](Self::with_prefix) but only tokens strictly
    /// longer than `p`.
    pub fn extending(&self, p: &[u8]) -> &[TokenId] {
        let r = self.with_prefix(p);
        let lo = self.keys.partition_point(|k| &k[..] < p);
        let skip = self.keys[lo..lo + r.len()].iter().take_while(|k| k.len() == p.len()).count();
        &r[skip..]
    }
}

/// Successor and prefix masks, computed on first use and shared.
#[derive(Debug)]
pub struct ValidityCache {
    index: PrefixIndex,
    succ: Mutex<FxHashMap<TokenId, Arc<TokenSet>>>,
    prefix: Mutex<FxHashMap<Vec<u8>, Arc<TokenSet>>>,
}

/// Prefix masks are memoized up to this length; longer prefixes refine the
/// cached mask of their first bytes.
const PREFIX_MEMO: usize = 4;

impl ValidityCache {
    pub fn new(tk: &Tokenizer) -> Self {
        ValidityCache { index: PrefixIndex::new(tk), succ: Default::default(), prefix: Default::default() }
    }

    pub fn index(&self) -> &PrefixIndex {
        &self.index
    }

    /// Tokens `b` with `is_pair_valid(a, b)`. After a special token every
    /// text token is allowed: a new tree starts there.
    pub fn valid_successors(&self, tk: &Tokenizer, a: TokenId) -> Arc<TokenSet> {
        if let Some(m) = self.succ.lock().unwrap().get(&a) {
            return m.clone();
        }
        let n = tk.vocab_size();
        let mut m = TokenSet::empty(n);
        for b in 0..n as TokenId {
            if tk.is_special(b) {
                continue;
            }
            if tk.is_special(a) || is_pair_valid(tk, a, b) {
                m.insert(b);
            }
        }
        self.succ.lock().unwrap().entry(a).or_insert_with(|| Arc::new(m)).clone()
    }

    /// Tokens whose bytes start with `p`.
    pub fn tokens_with_prefix(&self, tk: &Tokenizer, p: &[u8]) -> Arc<TokenSet> {
        let key = &p[..p.len().min(PREFIX_MEMO)];
        let cached = self.prefix.lock().unwrap().get(key).cloned();
        let base = cached.unwrap_or_else(|| {
            let mut m = TokenSet::empty(tk.vocab_size());
            for &t in self.index.with_prefix(key) {
                m.insert(t);
            }
            self.prefix.lock().unwrap().entry(key.to_vec()).or_insert_with(|| Arc::new(m)).clone()
        });
        if p.len() <= PREFIX_MEMO {
            return base;
        }
        let mut m = TokenSet::empty(tk.vocab_size());
        for t in base.iter() {
            if tk.token_bytes(t).starts_with(p) {
                m.insert(t);
            }
        }
        Arc::new(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::TokenizerParts;

    fn toy(vocab: &[&str], merges: &[(u32, u32)]) -> Tokenizer {
        Tokenizer::from_parts(TokenizerParts {
            vocab: vocab.iter().map(|s| s.as_bytes().to_vec()).collect(),
            merges: merges.to_vec(),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn single_merge_pairs() {
        let tk = toy(&["a", "b", "ab"], &[(0, 1)]);
        assert!(is_pair_valid(&tk, 1, 0));
        assert!(!is_pair_valid(&tk, 0, 1));
        assert!(is_pair_valid(&tk, 2, 2));
        let none = toy(&["a"], &[]);
        assert!(is_pair_valid(&none, 0, 0));
    }

    #[test]
    fn repeated_letter_tie() {
        // a a -> aa: "a|aa" re-encodes as [aa, a]
        let tk = toy(&["a", "aa"], &[(0, 0)]);
        assert!(!is_pair_valid(&tk, 0, 1));
        assert!(is_pair_valid(&tk, 1, 0));
        assert!(is_pair_valid(&tk, 1, 1));
    }

    #[test]
    fn sequences() {
        let tk = toy(&["a", "b", "ab"], &[(0, 1)]);
        assert!(is_sequence_valid(&tk, &[]));
        assert!(is_sequence_valid(&tk, &[2, 0]));
        assert!(!is_sequence_valid(&tk, &[0, 1]));
    }

    #[test]
    fn masks() {
        let tk = toy(&["a", "b", "ab"], &[(0, 1)]);
        let c = ValidityCache::new(&tk);
        let m = c.tokens_with_prefix(&tk, b"a");
        assert_eq!(m.iter().collect::<Vec<_>>(), vec![0, 2]);
        assert!(c.tokens_with_prefix(&tk, b"abab").is_empty());
        let s = c.valid_successors(&tk, 0);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 2]);
        assert!(Arc::ptr_eq(&s, &c.valid_successors(&tk, 0)));
        assert_eq!(c.index().extending(b"a"), &[2]);
        assert_eq!(c.index().with_prefix(b""), &[0, 2, 1]);
    }
}

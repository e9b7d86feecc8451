//! BPE tokenizers: normal-form merge lists, encoding and decoding.

mod bytelevel;
mod load;
mod normal;

pub use bytelevel::{byte_to_unit, unit_to_byte};
pub use load::{load_tokenizer, load_tokenizer_file, load_tokenizer_value};
pub use normal::normalize_merge_list;

use std::collections::BinaryHeap;
use std::cmp::Reverse;

use rustc_hash::FxHashMap;

use crate::pretok::{Piece, Pretokenizer, RuleSet};
use crate::validity::ValidityCache;
use crate::{Error, TokenId};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MergeRule {
    pub left: TokenId,
    pub right: TokenId,
    pub result: TokenId,
    pub rank: u32,
}

/// An added token as declared by the tokenizer definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddedToken {
    pub id: TokenId,
    pub content: Vec<u8>,
    pub special: bool,
}

/// Everything needed to build a [`Tokenizer`]; merges are in raw list order
/// and get normalized on construction.
#[derive(Clone, Debug, Default)]
pub struct TokenizerParts {
    /// Model vocabulary, indexed by id.
    pub vocab: Vec<Vec<u8>>,
    pub merges: Vec<(TokenId, TokenId)>,
    pub rules: RuleSet,
    pub added: Vec<AddedToken>,
    pub ignore_merges: bool,
}

#[derive(Debug)]
pub struct Tokenizer {
    tokens: Vec<Vec<u8>>,
    special: Vec<bool>,
    /// Bytes → id over the model vocabulary (no specials).
    vocab: FxHashMap<Vec<u8>, TokenId>,
    byte_token: [TokenId; 256],
    merges: Vec<MergeRule>,
    raw_merges: Vec<(TokenId, TokenId)>,
    pair: FxHashMap<(TokenId, TokenId), u32>,
    /// Rank of the merge forming each token, `NONE` if none does.
    formed: Vec<u32>,
    unreachable: Vec<TokenId>,
    canonical: Vec<bool>,
    ignore_merges: bool,
    specials: Vec<TokenId>,
    added: Vec<AddedToken>,
    pretok: Pretokenizer,
    depth: usize,
    cache: std::sync::OnceLock<std::sync::Arc<ValidityCache>>,
}

impl Tokenizer {
    pub fn from_parts(parts: TokenizerParts) -> Result<Self, Error> {
        let TokenizerParts { vocab, merges: raw, rules, added, ignore_merges } = parts;
        let mut tokens = vocab;
        let model_len = tokens.len();
        let mut special = vec![false; model_len];
        for a in &added {
            let id = a.id as usize;
            if id < model_len {
                if tokens[id] != a.content && !a.special {
                    return Err(Error::Malformed(format!("added token {} disagrees with vocab entry", a.id)));
                }
            } else {
                if tokens.len() <= id {
                    tokens.resize(id + 1, Vec::new());
                    special.resize(id + 1, false);
                }
                tokens[id] = a.content.clone();
            }
            if a.special {
                special[id] = true;
            }
        }
        if let Some(hole) = tokens.iter().position(|t| t.is_empty()) {
            return Err(Error::Malformed(format!("token id {hole} has no content")));
        }
        let mut map = FxHashMap::default();
        for (i, t) in tokens[..model_len].iter().enumerate() {
            if special[i] {
                continue;
            }
            if map.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::Malformed(format!("duplicate vocab bytes for id {i}")));
            }
        }
        let mut byte_token = [NONE; 256];
        for (t, &id) in &map {
            if t.len() == 1 && (id as usize) < model_len {
                byte_token[t[0] as usize] = id;
            }
        }
        let mut rules_raw = Vec::with_capacity(raw.len());
        for (rank, &(l, r)) in raw.iter().enumerate() {
            let lb = map_bytes(&tokens, &special, model_len, l)?;
            let rb = map_bytes(&tokens, &special, model_len, r)?;
            let joined = [lb, rb].concat();
            let result = *map
                .get(&joined)
                .ok_or_else(|| Error::MalformedMerge(format!("({l}, {r}) produces bytes absent from vocab")))?;
            rules_raw.push(MergeRule { left: l, right: r, result, rank: rank as u32 });
        }
        let model: Vec<Vec<u8>> = (0..model_len)
            .map(|i| if special[i] { Vec::new() } else { tokens[i].clone() })
            .collect();
        let (merges, unreachable) = normalize_merge_list(&rules_raw, &model);
        let mut formed = vec![NONE; tokens.len()];
        let mut pair = FxHashMap::default();
        pair.reserve(merges.len());
        for m in &merges {
            formed[m.result as usize] = m.rank;
            pair.insert((m.left, m.right), m.rank);
        }
        let canonical: Vec<bool> = (0..tokens.len())
            .map(|i| !special[i] && i < model_len && (formed[i] != NONE || byte_token[tokens[i][0] as usize] == i as TokenId && tokens[i].len() == 1))
            .collect();
        let alphabet: Vec<u8> = (0..=255u8).filter(|&b| byte_token[b as usize] != NONE).collect();
        let plain: Vec<(TokenId, Vec<u8>)> =
            added.iter().filter(|a| !a.special).map(|a| (a.id, a.content.clone())).collect();
        let pretok = Pretokenizer::new(rules, &plain, &alphabet);
        let specials = added.iter().filter(|a| a.special).map(|a| a.id).collect();
        let mut tk = Tokenizer {
            tokens,
            special,
            vocab: map,
            byte_token,
            merges,
            raw_merges: raw,
            pair,
            formed,
            unreachable,
            canonical,
            ignore_merges,
            specials,
            added,
            pretok,
            depth: 0,
            cache: Default::default(),
        };
        tk.depth = (0..tk.tokens.len() as TokenId).map(|t| tk.spine_len(t, true).max(tk.spine_len(t, false))).max().unwrap_or(0);
        Ok(tk)
    }

    /// Total number of ids, specials and added tokens included.
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    /// Merge pairs in the order the definition listed them.
    pub fn raw_merges(&self) -> &[(TokenId, TokenId)] {
        &self.raw_merges
    }

    pub fn unreachable(&self) -> &[TokenId] {
        &self.unreachable
    }

    pub fn ignore_merges(&self) -> bool {
        self.ignore_merges
    }

    pub fn rules(&self) -> &RuleSet {
        self.pretok.rules()
    }

    pub fn pretokenizer(&self) -> &Pretokenizer {
        &self.pretok
    }

    pub fn specials(&self) -> &[TokenId] {
        &self.specials
    }

    pub fn added_tokens(&self) -> &[AddedToken] {
        &self.added
    }

    pub fn is_special(&self, t: TokenId) -> bool {
        self.special.get(t as usize).copied().unwrap_or(false)
    }

    /// Token can come out of BPE on its own bytes.
    pub fn is_canonical(&self, t: TokenId) -> bool {
        self.canonical.get(t as usize).copied().unwrap_or(false)
    }

    /// Id of the model vocabulary entry with exactly these bytes.
    pub fn vocab_id(&self, bytes: &[u8]) -> Option<TokenId> {
        self.vocab.get(bytes).copied()
    }

    pub fn base_token(&self, b: u8) -> Option<TokenId> {
        let t = self.byte_token[b as usize];
        (t != NONE).then_some(t)
    }

    /// Bytes with a base token.
    pub fn alphabet(&self) -> Vec<u8> {
        (0..=255u8).filter(|&b| self.byte_token[b as usize] != NONE).collect()
    }

    pub fn covers(&self, text: &[u8]) -> bool {
        text.iter().all(|&b| self.byte_token[b as usize] != NONE)
    }

    /// Raw bytes of a token (the content string for specials).
    pub fn token_bytes(&self, t: TokenId) -> &[u8] {
        &self.tokens[t as usize]
    }

    /// Merge forming `t`: (left, right, rank).
    pub fn forming(&self, t: TokenId) -> Option<(TokenId, TokenId, u32)> {
        let r = *self.formed.get(t as usize)?;
        (r != NONE).then(|| {
            let m = &self.merges[r as usize];
            (m.left, m.right, r)
        })
    }

    pub fn merge_rank(&self, l: TokenId, r: TokenId) -> Option<u32> {
        self.pair.get(&(l, r)).copied()
    }

    /// Shared mask caches, built on first use.
    pub fn validity(&self) -> &std::sync::Arc<ValidityCache> {
        self.cache.get_or_init(|| std::sync::Arc::new(ValidityCache::new(self)))
    }

    /// Longest merge chain along one edge of any token.
    pub fn max_merge_depth(&self) -> usize {
        self.depth
    }

    fn spine_len(&self, mut t: TokenId, right: bool) -> usize {
        let mut n = 0;
        while let Some((l, r, _)) = self.forming(t) {
            t = if right { r } else { l };
            n += 1;
        }
        n
    }

    /// BPE on one pretoken. Bytes outside the alphabet are an error.
    pub fn try_encode_pretoken(&self, bytes: &[u8]) -> Result<Vec<TokenId>, Error> {
        if self.ignore_merges {
            if let Some(&id) = self.vocab.get(bytes) {
                return Ok(vec![id]);
            }
        }
        self.bpe(bytes)
    }

    /// BPE on one pretoken; panics on bytes outside the alphabet.
    pub fn encode_pretoken(&self, bytes: &[u8]) -> Vec<TokenId> {
        self.try_encode_pretoken(bytes).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Plain BPE merging, no vocabulary shortcut.
    pub fn bpe(&self, bytes: &[u8]) -> Result<Vec<TokenId>, Error> {
        let mut parts = Vec::with_capacity(bytes.len());
        for (offset, &b) in bytes.iter().enumerate() {
            let t = self.byte_token[b as usize];
            if t == NONE {
                return Err(Error::UnknownByte { byte: b, offset });
            }
            parts.push(t);
        }
        if parts.len() <= 48 {
            self.merge_small(&mut parts);
        } else {
            self.merge_large(&mut parts);
        }
        Ok(parts)
    }

    fn rank(&self, l: TokenId, r: TokenId) -> u32 {
        self.pair.get(&(l, r)).copied().unwrap_or(NONE)
    }

    fn merge_small(&self, parts: &mut Vec<TokenId>) {
        if parts.len() < 2 {
            return;
        }
        let mut ranks: Vec<u32> = parts.windows(2).map(|w| self.rank(w[0], w[1])).collect();
        loop {
            let (mut best, mut at) = (NONE, 0);
            for (i, &r) in ranks.iter().enumerate() {
                if r < best {
                    best = r;
                    at = i;
                }
            }
            if best == NONE {
                break;
            }
            parts[at] = self.merges[best as usize].result;
            parts.remove(at + 1);
            ranks.remove(at);
            if at > 0 {
                ranks[at - 1] = self.rank(parts[at - 1], parts[at]);
            }
            if at < ranks.len() {
                ranks[at] = self.rank(parts[at], parts[at + 1]);
            }
        }
    }

    /// Heap over (rank, position) with a linked list of live parts.
    fn merge_large(&self, parts: &mut Vec<TokenId>) {
        let n = parts.len();
        let mut next: Vec<usize> = (1..=n).collect();
        let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
        let mut alive = vec![true; n];
        let mut heap = BinaryHeap::new();
        for i in 0..n - 1 {
            let r = self.rank(parts[i], parts[i + 1]);
            if r != NONE {
                heap.push(Reverse((r, i, parts[i], parts[i + 1])));
            }
        }
        while let Some(Reverse((r, i, l, rt))) = heap.pop() {
            if !alive[i] || parts[i] != l {
                continue;
            }
            let j = next[i];
            if j >= n || parts[j] != rt {
                continue;
            }
            parts[i] = self.merges[r as usize].result;
            alive[j] = false;
            next[i] = next[j];
            if next[i] < n {
                prev[next[i]] = i;
            }
            if prev[i] != usize::MAX {
                let p = prev[i];
                let pr = self.rank(parts[p], parts[i]);
                if pr != NONE {
                    heap.push(Reverse((pr, p, parts[p], parts[i])));
                }
            }
            if next[i] < n {
                let q = next[i];
                let nr = self.rank(parts[i], parts[q]);
                if nr != NONE {
                    heap.push(Reverse((nr, i, parts[i], parts[q])));
                }
            }
        }
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            out.push(parts[i]);
            i = next[i];
        }
        *parts = out;
    }

    pub fn pieces<'t>(&self, text: &'t [u8]) -> Vec<Piece<'t>> {
        self.pretok.pieces(text)
    }

    pub fn try_encode(&self, text: &[u8]) -> Result<Vec<TokenId>, Error> {
        let mut out = Vec::with_capacity(text.len() / 3);
        for p in self.pretok.pieces(text) {
            match p {
                Piece::Added(id) => out.push(id),
                Piece::Text(t) => out.extend(self.try_encode_pretoken(t)?),
            }
        }
        Ok(out)
    }

    /// Encodes text; special token strings are not recognised. Panics on
    /// bytes outside the alphabet (only possible for partial alphabets).
    pub fn encode(&self, text: &[u8]) -> Vec<TokenId> {
        self.try_encode(text).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Concatenated token bytes. Special tokens contribute nothing.
    pub fn decode(&self, seq: &[TokenId]) -> Result<Vec<u8>, Error> {
        let mut out = Vec::new();
        for &t in seq {
            let b = self.tokens.get(t as usize).ok_or(Error::UnknownToken(t))?;
            if !self.special[t as usize] {
                out.extend_from_slice(b);
            }
        }
        Ok(out)
    }

    /// Human-readable rendering of a token: printable ASCII as is, other
    /// bytes as `\xNN`.
    pub fn display(&self, t: TokenId) -> String {
        crate::escape_bytes(self.token_bytes(t))
    }
}

fn map_bytes<'a>(tokens: &'a [Vec<u8>], special: &[bool], model_len: usize, t: TokenId) -> Result<&'a [u8], Error> {
    let i = t as usize;
    if i >= model_len || special[i] {
        return Err(Error::MalformedMerge(format!("merge input {t} is not a vocab token")));
    }
    Ok(&tokens[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy(vocab: &[&str], merges: &[(&str, &str)]) -> Tokenizer {
        let v: Vec<Vec<u8>> = vocab.iter().map(|s| s.as_bytes().to_vec()).collect();
        let id = |s: &str| vocab.iter().position(|x| *x == s).unwrap() as TokenId;
        Tokenizer::from_parts(TokenizerParts {
            vocab: v,
            merges: merges.iter().map(|(a, b)| (id(a), id(b))).collect(),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn hello_example() {
        let t = toy(&["h", "e", "l", "o", "he", "ll"], &[("h", "e"), ("l", "l")]);
        assert_eq!(t.encode(b"hello"), vec![4, 5, 3]);
        assert_eq!(t.encode(b"x".get(..0).unwrap()), Vec::<TokenId>::new());
        assert_eq!(t.encode(b"h"), vec![0]);
    }

    #[test]
    fn ignore_merges_shortcut() {
        let v: Vec<Vec<u8>> = ["q", "z", "k", "qzk"].iter().map(|s| s.as_bytes().to_vec()).collect();
        let t = Tokenizer::from_parts(TokenizerParts { vocab: v, ignore_merges: true, ..Default::default() }).unwrap();
        assert_eq!(t.encode(b"qzk"), vec![3]);
        assert_eq!(t.unreachable(), &[3]);
        assert!(!t.is_canonical(3));
    }

    #[test]
    fn large_and_small_paths_agree() {
        let t = toy(&["a", "b", "ab", "aab", "abab"], &[("a", "b"), ("a", "ab"), ("ab", "ab")]);
        let text: Vec<u8> = (0..300).map(|i| if (i * 7 % 5) < 2 { b'a' } else { b'b' }).collect();
        let mut small = Vec::new();
        for chunk in [&text[..]] {
            let mut p: Vec<TokenId> = chunk.iter().map(|&b| if b == b'a' { 0 } else { 1 }).collect();
            t.merge_small(&mut p);
            small = p;
        }
        assert_eq!(t.bpe(&text).unwrap(), small);
    }

    #[test]
    fn round_trip_and_errors() {
        let t = toy(&["a", "b", "ab"], &[("a", "b")]);
        assert_eq!(t.decode(&t.encode(b"abba")).unwrap(), b"abba");
        assert!(matches!(t.decode(&[9]), Err(Error::UnknownToken(9))));
        assert!(matches!(t.try_encode(b"c"), Err(Error::UnknownByte { byte: b'c', .. })));
    }
}

//! Brute-force references. Nothing here touches the validity caches, the
//! pair walk or the tree engine, so comparisons against them mean something.
//!
//! Extendability is checked with continuations of at most [`WITNESS_BYTES`]
//! bytes drawn from the tokenizer's whole alphabet.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::lm::{LanguageModel, TabularLM, BOS};
use crate::pretok::{Piece, RuleSet};
use crate::tokenizer::{Tokenizer, TokenizerParts};
use crate::TokenId;

/// Longest continuation tried when deciding whether a covering can still be
/// completed into a valid sequence.
pub const WITNESS_BYTES: usize = 3;

/// A merge list exactly as listed, with no normalization. A repeated pair
/// takes the position of its last occurrence.
#[derive(Debug)]
pub struct RawBpe {
    vocab: FxHashMap<Vec<u8>, TokenId>,
    rank: FxHashMap<(TokenId, TokenId), (usize, TokenId)>,
    ignore_merges: bool,
}

impl RawBpe {
    /// `vocab[i]` are the bytes of token `i`; empty entries are skipped.
    pub fn new(vocab: &[Vec<u8>], merges: &[(TokenId, TokenId)], ignore_merges: bool) -> Self {
        let map: FxHashMap<Vec<u8>, TokenId> =
            vocab.iter().enumerate().filter(|(_, b)| !b.is_empty()).map(|(i, b)| (b.clone(), i as TokenId)).collect();
        let mut rank = FxHashMap::default();
        for (i, &(l, r)) in merges.iter().enumerate() {
            let joined = [&vocab[l as usize][..], &vocab[r as usize][..]].concat();
            rank.insert((l, r), (i, map[&joined]));
        }
        RawBpe { vocab: map, rank, ignore_merges }
    }

    /// The model vocabulary and raw list of a loaded tokenizer.
    pub fn of(tk: &Tokenizer) -> Self {
        let n = tk.vocab_size();
        let added: BTreeSet<TokenId> = tk.added_tokens().iter().map(|a| a.id).collect();
        let vocab: Vec<Vec<u8>> = (0..n as TokenId)
            .map(|t| if tk.is_special(t) || (added.contains(&t) && tk.vocab_id(tk.token_bytes(t)) != Some(t)) { Vec::new() } else { tk.token_bytes(t).to_vec() })
            .collect();
        RawBpe::new(&vocab, tk.raw_merges(), tk.ignore_merges())
    }
}

/// Lowest-rank applicable merge anywhere, leftmost on ties, until none
/// applies. Works for lists whose merges precede their inputs' merges.
pub fn heap_encode(piece: &[u8], raw: &RawBpe) -> Vec<TokenId> {
    if raw.ignore_merges {
        if let Some(&t) = raw.vocab.get(piece) {
            return vec![t];
        }
    }
    let mut toks: Vec<Option<TokenId>> = piece.iter().map(|b| Some(raw.vocab[&[*b][..]])).collect();
    let n = toks.len();
    let mut next: Vec<usize> = (1..=n).collect();
    let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
    // (rank, left position, left token, right token); stale entries skipped
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<_>, toks: &[Option<TokenId>], next: &[usize], i: usize| {
        if let (Some(l), Some(&Some(r))) = (toks[i], toks.get(next[i])) {
            if let Some(&(k, _)) = raw.rank.get(&(l, r)) {
                heap.push(Reverse((k, i, l, r)));
            }
        }
    };
    for i in 0..n {
        push(&mut heap, &toks, &next, i);
    }
    while let Some(Reverse((_, i, l, r))) = heap.pop() {
        let j = next[i];
        if toks[i] != Some(l) || j >= n || toks[j] != Some(r) {
            continue;
        }
        toks[i] = Some(raw.rank[&(l, r)].1);
        toks[j] = None;
        next[i] = next[j];
        if next[i] < n {
            prev[next[i]] = i;
        }
        push(&mut heap, &toks, &next, i);
        if prev[i] < n {
            push(&mut heap, &toks, &next, prev[i]);
        }
    }
    toks.into_iter().flatten().collect()
}

/// Full-text encoding with the tokenizer's pretokenizer and [`heap_encode`]
/// per piece.
pub fn heap_encode_text(tk: &Tokenizer, raw: &RawBpe, text: &[u8]) -> Vec<TokenId> {
    let mut out = Vec::new();
    for p in tk.pieces(text) {
        match p {
            Piece::Added(id) => out.push(id),
            Piece::Text(t) => out.extend(heap_encode(t, raw)),
        }
    }
    out
}

/// `encode(decode(seq)) == seq`.
pub fn is_valid(tk: &Tokenizer, seq: &[TokenId]) -> bool {
    match tk.decode(seq).and_then(|d| tk.try_encode(&d)) {
        Ok(e) => e == seq,
        Err(_) => false,
    }
}

/// All strings over `alphabet` of length `0..=max`, shortest first.
pub fn continuations(alphabet: &[u8], max: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for s in &layer {
            for &b in alphabet {
                let mut t = s.clone();
                t.push(b);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Some continuation `s` of at most [`WITNESS_BYTES`] bytes makes
/// `encode(decode(seq) ++ s)` start with `seq`.
pub fn is_extendable(tk: &Tokenizer, seq: &[TokenId]) -> bool {
    let Ok(d) = tk.decode(seq) else { return false };
    continuations(&tk.alphabet(), WITNESS_BYTES).iter().any(|s| {
        let text = [&d[..], s].concat();
        tk.try_encode(&text).is_ok_and(|e| e.starts_with(seq))
    })
}

/// Token sequences whose decoding covers `prompt` with only the last token
/// reaching past it (no validity filter). Depth first over text tokens.
pub fn coverings(prompt: &[u8], tk: &Tokenizer) -> Vec<Vec<TokenId>> {
    fn go(tk: &Tokenizer, p: &[u8], at: usize, path: &mut Vec<TokenId>, out: &mut Vec<Vec<TokenId>>) {
        if at >= p.len() {
            out.push(path.clone());
            return;
        }
        for t in 0..tk.vocab_size() as TokenId {
            if tk.is_special(t) {
                continue;
            }
            let b = tk.token_bytes(t);
            let k = b.len().min(p.len() - at);
            if b[..k] == p[at..at + k] {
                path.push(t);
                go(tk, p, at + b.len(), path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(tk, prompt, 0, &mut Vec::new(), &mut out);
    out
}

/// Minimal coverings of `prompt` that are prefixes of some valid sequence
/// (witness bounded by [`WITNESS_BYTES`]). The empty prompt has the single
/// covering `[]`.
///
/// Rather than filtering [`coverings`], this encodes every candidate
/// decoding `prompt ++ overhang` followed by every short continuation and
/// collects the prefixes of the result that are minimal coverings.
pub fn enumerate_valid_coverings(prompt: &[u8], tk: &Tokenizer) -> BTreeSet<Vec<TokenId>> {
    let mut tails: BTreeSet<Vec<u8>> = BTreeSet::new();
    tails.insert(Vec::new());
    for t in 0..tk.vocab_size() as TokenId {
        if tk.is_special(t) {
            continue;
        }
        let b = tk.token_bytes(t);
        for k in 1..b.len() {
            if prompt.ends_with(&b[..k]) {
                tails.insert(b[k..].to_vec());
            }
        }
    }
    let conts = continuations(&tk.alphabet(), WITNESS_BYTES);
    let mut out = BTreeSet::new();
    for w in &tails {
        let d = [prompt, w].concat();
        for s in &conts {
            let Ok(e) = tk.try_encode(&[&d[..], s].concat()) else { continue };
            let mut end = 0;
            if d.is_empty() {
                out.insert(Vec::new());
                break;
            }
            for (n, &t) in e.iter().enumerate() {
                let before = end;
                end += tk.token_bytes(t).len();
                if end >= d.len() {
                    if end == d.len() && before < prompt.len() {
                        out.insert(e[..=n].to_vec());
                    }
                    break;
                }
            }
        }
    }
    out
}

/// Probability that a sequence drawn from `lm` is valid and decodes to
/// something starting with `prompt`, by enumerating every terminated
/// sequence consistent with the prompt. Needs a finite horizon; sequences
/// longer than `max_len` tokens are cut off (and counted as lost mass).
pub fn brute_prefix_prob<L: LanguageModel + ?Sized>(lm: &L, tk: &Tokenizer, prompt: &[u8], max_len: usize) -> f64 {
    fn go<L: LanguageModel + ?Sized>(
        lm: &L,
        tk: &Tokenizer,
        p: &[u8],
        max_len: usize,
        ctx: &mut Vec<TokenId>,
        text: &mut Vec<u8>,
        prob: f64,
    ) -> f64 {
        let d = lm.next_logprobs(ctx).expect("oracle model failed");
        let mut total = 0.0;
        let eos = d[lm.eos()].exp();
        if eos > 0.0 && text.starts_with(p) && is_valid(tk, &ctx[1..]) {
            total += prob * eos;
        }
        if ctx.len() > max_len {
            return total;
        }
        for (t, &lp) in d[..lm.eos()].iter().enumerate() {
            if lp == f64::NEG_INFINITY || tk.is_special(t as TokenId) {
                continue;
            }
            let b = tk.token_bytes(t as TokenId);
            let at = text.len();
            let k = b.len().min(p.len().saturating_sub(at));
            if b[..k] != p[at.min(p.len())..at.min(p.len()) + k] {
                continue;
            }
            ctx.push(t as TokenId);
            text.extend_from_slice(b);
            total += go(lm, tk, p, max_len, ctx, text, prob * lp.exp());
            text.truncate(at);
            ctx.pop();
        }
        total
    }
    go(lm, tk, prompt, max_len, &mut vec![BOS], &mut Vec::new(), 1.0)
}

/// Pretokenizer used by a toy tokenizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToyRules {
    None,
    Gpt2,
    Cl100k,
}

/// Parameters of a random toy tokenizer.
#[derive(Clone, Copy, Debug)]
pub struct ToyTokenizerSpec {
    pub seed: u64,
    /// At most 8.
    pub alphabet: usize,
    /// At most 40.
    pub merges: usize,
    pub rules: ToyRules,
    /// Longest token, in bytes.
    pub max_token: usize,
}

impl ToyTokenizerSpec {
    pub fn new(seed: u64) -> Self {
        ToyTokenizerSpec { seed, alphabet: 4, merges: 12, rules: ToyRules::None, max_token: 6 }
    }
}

/// Bytes the toy alphabet is drawn from, in order. With pretokenization the
/// pool mixes letters, spaces, digits, an apostrophe and a newline so that
/// segment boundaries actually occur.
fn pool(rules: ToyRules) -> &'static [u8] {
    match rules {
        ToyRules::None => b"abcdefgh",
        _ => b"a 0s'\nt1",
    }
}

/// Deterministic per seed. Each merge joins two existing tokens into a new
/// one, so every merge refers only to earlier tokens.
pub fn random_toy_tokenizer(spec: &ToyTokenizerSpec) -> Tokenizer {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let alphabet = &pool(spec.rules)[..spec.alphabet.clamp(1, 8)];
    let mut vocab: Vec<Vec<u8>> = alphabet.iter().map(|&b| vec![b]).collect();
    let mut merges = Vec::new();
    let mut tries = 0;
    while merges.len() < spec.merges.min(40) && tries < 2000 {
        tries += 1;
        let l = rng.gen_range(0..vocab.len());
        let r = rng.gen_range(0..vocab.len());
        let joined = [&vocab[l][..], &vocab[r][..]].concat();
        if joined.len() > spec.max_token || vocab.contains(&joined) {
            continue;
        }
        merges.push((l as TokenId, r as TokenId));
        vocab.push(joined);
    }
    let rules = match spec.rules {
        ToyRules::None => RuleSet::none(),
        ToyRules::Gpt2 => RuleSet::gpt2(),
        ToyRules::Cl100k => RuleSet::cl100k(),
    };
    Tokenizer::from_parts(TokenizerParts { vocab, merges, rules, ..Default::default() }).expect("toy tokenizer is well formed")
}

/// A random string over the tokenizer's alphabet.
pub fn random_text(rng: &mut impl Rng, tk: &Tokenizer, len: usize) -> Vec<u8> {
    let a = tk.alphabet();
    (0..len).map(|_| *a.choose(rng).unwrap()).collect()
}

/// A finite-support table model over the encodings of random texts. Every
/// context it can reach is a prefix of one of those (valid) encodings, so
/// all of its mass sits on valid sequences. Row weights are random.
pub fn valid_supported_lm(rng: &mut impl Rng, tk: &Tokenizer, texts: &[Vec<u8>], horizon: usize) -> TabularLM {
    let n = tk.vocab_size();
    let mut rows: FxHashMap<Vec<TokenId>, Vec<f64>> = FxHashMap::default();
    for text in texts {
        let e = tk.encode(text);
        if e.len() > horizon {
            continue;
        }
        for i in 0..=e.len() {
            let row = rows.entry(e[..i].to_vec()).or_insert_with(|| vec![0.0; n + 1]);
            let slot = if i == e.len() { n } else { e[i] as usize };
            if row[slot] == 0.0 {
                row[slot] = rng.gen_range(0.05..1.0);
            }
        }
    }
    // the back-off row is never reached from BOS; make it end immediately
    let mut default = vec![f64::NEG_INFINITY; n + 1];
    default[n] = 0.0;
    let mut lm = TabularLM::new(n, horizon, Some(default)).unwrap();
    if rows.is_empty() {
        return lm;
    }
    for (ctx, row) in rows {
        lm.set(ctx, row.iter().map(|&p| p.ln()).collect()).unwrap();
    }
    lm
}

/// A toy tokenizer with a valid-supported model and the texts behind it.
pub struct ToyInstance {
    pub tk: Tokenizer,
    pub lm: TabularLM,
    pub texts: Vec<Vec<u8>>,
}

/// Deterministic per seed: a random toy tokenizer (pretokenizer rotating
/// with the seed) and a valid-supported table model over the encodings of a
/// handful of short random texts.
pub fn toy_instance(seed: u64, horizon: usize) -> ToyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let rules = [ToyRules::None, ToyRules::Gpt2, ToyRules::Cl100k][seed as usize % 3];
    let spec = ToyTokenizerSpec { alphabet: rng.gen_range(2..=5), merges: rng.gen_range(3..=20), rules, ..ToyTokenizerSpec::new(seed) };
    let tk = random_toy_tokenizer(&spec);
    let texts: Vec<Vec<u8>> = (0..rng.gen_range(4..=14))
        .map(|_| {
            let n = rng.gen_range(1..=8);
            random_text(&mut rng, &tk, n)
        })
        .collect();
    let lm = valid_supported_lm(&mut rng, &tk, &texts, horizon);
    ToyInstance { tk, lm, texts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Tokenizer {
        let v = ["a", "b", "ab"].iter().map(|s| s.as_bytes().to_vec()).collect();
        Tokenizer::from_parts(TokenizerParts { vocab: v, merges: vec![(0, 1)], ..Default::default() }).unwrap()
    }

    #[test]
    fn heap_handles_out_of_order_lists() {
        // (ab, c) listed before (a, b)
        let vocab: Vec<Vec<u8>> = ["a", "b", "c", "ab", "abc"].iter().map(|s| s.as_bytes().to_vec()).collect();
        let raw = RawBpe::new(&vocab, &[(3, 2), (0, 1)], false);
        assert_eq!(heap_encode(b"abc", &raw), vec![4]);
        assert_eq!(heap_encode(b"abab", &raw), vec![3, 3]);
        assert_eq!(heap_encode(b"", &raw), Vec::<TokenId>::new());
    }

    #[test]
    fn heap_matches_in_order_encoder() {
        let tk = random_toy_tokenizer(&ToyTokenizerSpec { merges: 30, ..ToyTokenizerSpec::new(3) });
        let raw = RawBpe::of(&tk);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.gen_range(0..20);
            let t = random_text(&mut rng, &tk, n);
            assert_eq!(heap_encode_text(&tk, &raw, &t), tk.encode(&t));
        }
    }

    #[test]
    fn coverings_of_a() {
        let tk = abc();
        let c = enumerate_valid_coverings(b"a", &tk);
        assert_eq!(c, [vec![0], vec![2]].into_iter().collect());
        assert_eq!(enumerate_valid_coverings(b"", &tk), [vec![]].into_iter().collect());
        assert_eq!(enumerate_valid_coverings(b"ab", &tk), [vec![2]].into_iter().collect());
    }

    #[test]
    fn fast_enumeration_equals_filtered_dfs() {
        for seed in 0..20 {
            let rules = [ToyRules::None, ToyRules::Gpt2, ToyRules::Cl100k][seed as usize % 3];
            let tk = random_toy_tokenizer(&ToyTokenizerSpec { alphabet: 4, merges: 10, rules, ..ToyTokenizerSpec::new(seed) });
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let n = rng.gen_range(1..6);
                let p = random_text(&mut rng, &tk, n);
                let slow: BTreeSet<_> = coverings(&p, &tk).into_iter().filter(|c| is_extendable(&tk, c)).collect();
                assert_eq!(enumerate_valid_coverings(&p, &tk), slow, "seed {seed} prompt {p:?}");
            }
        }
    }

    #[test]
    fn single_letter_geometric_sum() {
        // vocab {a}; uniform over {a, EOS}; horizon H
        let tk = Tokenizer::from_parts(TokenizerParts { vocab: vec![b"a".to_vec()], ..Default::default() }).unwrap();
        let h = 6;
        let mut lm = TabularLM::new(1, h, None).unwrap();
        lm.set(vec![], vec![0.0, 0.0]).unwrap();
        // P(at least k a's) = 2^-k for k < H
        for k in 0..h {
            let p = brute_prefix_prob(&lm, &tk, &vec![b'a'; k], 16);
            assert!((p - 0.5f64.powi(k as i32)).abs() < 1e-12, "{k}: {p}");
        }
    }

    #[test]
    fn toy_seeds_are_stable_and_distinct() {
        let a = random_toy_tokenizer(&ToyTokenizerSpec::new(0));
        let b = random_toy_tokenizer(&ToyTokenizerSpec::new(1));
        assert_ne!(a.raw_merges(), b.raw_merges());
        let chain = random_toy_tokenizer(&ToyTokenizerSpec { alphabet: 1, merges: 3, ..ToyTokenizerSpec::new(0) });
        assert!(chain.alphabet() == b"a");
        assert_eq!(chain.vocab_size(), 4);
    }
}

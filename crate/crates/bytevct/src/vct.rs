//! Valid covering trees maintained byte by byte.
//!
//! The tree holds every token path that could still be the start of the
//! canonical encoding of the text seen so far plus some continuation. Tokens
//! shared by all paths are emitted as the trunk and never revisited.
//!
//! Internally the tree is conservative: an edge survives if the pair check
//! allows it or if some pretokenization of the text (over all possible
//! futures) puts a segment start there. [`Vct::leaves`] then keeps exactly the
//! coverings that re-encode as a prefix of some extension of the text, found
//! by trying short continuations.

use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;

use crate::pretok::{Outcome, SegKind};
use crate::tokenizer::Tokenizer;
use crate::validity::{bpe_pair_valid, ValidityCache};
use crate::{Error, TokenId};

const NONE: usize = usize::MAX;

/// Longest continuation tried when checking that a covering can be
/// completed.
pub const WITNESS_BYTES: usize = 3;

/// Continuation bytes used for large alphabets: one per character class the
/// supported pretokenizers distinguish, plus the letters contractions need.
const WITNESS_REPS: &[u8] = b" a0\n'.slrvedtm";

/// A minimal covering: the tokens after the trunk (the last one may reach
/// past the text) and the bytes of that reach.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Leaf {
    pub path: Vec<TokenId>,
    pub overhang: Vec<u8>,
}

impl Leaf {
    pub fn is_exact(&self) -> bool {
        self.overhang.is_empty()
    }

    pub fn last(&self) -> Option<TokenId> {
        self.path.last().copied()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BranchStats {
    /// Edges below the trunk's last token. Overhang groups are masks over
    /// the vocabulary and are not counted.
    pub non_trunk_edges: usize,
    /// Pretokenizations still consistent with the text.
    pub live_hypotheses: usize,
    pub deepest_branch: usize,
}

#[derive(Clone, Debug)]
struct Node {
    /// `None` only for a root sitting on a settled segment boundary with no
    /// token before it that matters.
    token: Option<TokenId>,
    parent: usize,
    start: usize,
    end: usize,
    /// Pretokenizations (one bit per outcome) the path to here agrees with.
    worlds: u64,
    /// Some token strictly extending the text after `end` is still allowed.
    open: bool,
    witness: Option<TokenId>,
}

/// Segment starts of the unsettled text under each possible future, as
/// per-position bitmasks over the outcomes.
#[derive(Clone, Debug, Default)]
struct Bounds {
    base: usize,
    len: usize,
    text: Vec<u64>,
    any: Vec<u64>,
    added: Vec<(usize, TokenId, u64)>,
    /// Positions where every outcome starts a segment.
    forced: Vec<usize>,
    /// Outcomes whose last segment ends exactly at the end of the text.
    end: u64,
    all: u64,
    worlds: usize,
}

const MAX_WORLDS: usize = 64;

impl Bounds {
    fn empty(base: usize) -> Self {
        Bounds { base, len: 0, end: 1, all: 1, worlds: 1, ..Default::default() }
    }

    fn new(base: usize, len: usize, outs: &[Outcome]) -> Result<Self, Error> {
        if len == 0 {
            return Ok(Bounds::empty(base));
        }
        if outs.len() > MAX_WORLDS {
            return Err(Error::Unsupported(format!("{} simultaneous pretokenizations", outs.len())));
        }
        let mut text = vec![0u64; len];
        let mut any = vec![0u64; len];
        let mut added: Vec<(usize, TokenId, u64)> = Vec::new();
        let mut end = 0;
        for (w, o) in outs.iter().enumerate() {
            let bit = 1u64 << w;
            for &(s, k) in &o.starts {
                any[s] |= bit;
                match k {
                    SegKind::Text => text[s] |= bit,
                    SegKind::Added(id) => added.push((base + s, id, bit)),
                }
            }
            if o.end_exact {
                end |= bit;
            }
        }
        added.sort_unstable();
        let mut merged: Vec<(usize, TokenId, u64)> = Vec::new();
        for (p, id, m) in added {
            match merged.last_mut() {
                Some(l) if l.0 == p && l.1 == id => l.2 |= m,
                _ => merged.push((p, id, m)),
            }
        }
        let all = if outs.len() == 64 { u64::MAX } else { (1u64 << outs.len()) - 1 };
        let forced = (0..len).filter(|&i| any[i] == all).map(|i| base + i).collect();
        Ok(Bounds { base, len, text, any, added: merged, forced, end, all, worlds: outs.len() })
    }

    fn limit(&self) -> usize {
        self.base + self.len
    }

    fn text_at(&self, x: usize) -> u64 {
        if x >= self.limit() {
            self.end
        } else if x < self.base {
            self.all
        } else {
            self.text[x - self.base]
        }
    }

    fn any_at(&self, x: usize) -> u64 {
        if x >= self.limit() {
            self.end
        } else if x < self.base {
            self.all
        } else {
            self.any[x - self.base]
        }
    }

    /// Outcomes with added token `t` starting at `x`. At the end of the text
    /// any added token may start where a segment ends.
    fn added_at(&self, x: usize, t: TokenId) -> u64 {
        if x >= self.limit() {
            return self.end;
        }
        let i = self.added.partition_point(|&(p, id, _)| (p, id) < (x, t));
        match self.added.get(i) {
            Some(&(p, id, m)) if p == x && id == t => m,
            _ => 0,
        }
    }

    fn added_anywhere_at(&self, x: usize) -> u64 {
        if x >= self.limit() {
            return self.end;
        }
        let i = self.added.partition_point(|&(p, _, _)| p < x);
        self.added[i..].iter().take_while(|a| a.0 == x).fold(0, |m, a| m | a.2)
    }

    /// Outcomes with no segment start strictly inside `(a, b)`.
    fn no_cut(&self, a: usize, b: usize) -> u64 {
        let mut m = self.all;
        for p in a + 1..b.min(self.limit()) {
            m &= !self.any_at(p);
            if m == 0 {
                return 0;
            }
        }
        if a < self.limit() && self.limit() < b {
            m &= !self.end;
        }
        m
    }

    fn rebase(&mut self, x: usize) {
        let k = x - self.base;
        self.text.drain(..k);
        self.any.drain(..k);
        self.added.retain(|&(p, _, _)| p >= x);
        self.forced.retain(|&p| p >= x);
        self.base = x;
        self.len -= k;
    }
}

/// Incremental valid covering tree over one byte stream. Clones share the
/// tokenizer caches and branch independently.
#[derive(Clone)]
pub struct Vct<'t> {
    tk: &'t Tokenizer,
    cache: Arc<ValidityCache>,
    trunk: Vec<TokenId>,
    /// Trunk tokens ending after `base`, with their end offsets.
    local: Vec<(TokenId, usize)>,
    base: usize,
    buf: Vec<u8>,
    nodes: Vec<Node>,
    bounds: Bounds,
    specials: Vec<(usize, TokenId)>,
    witnesses: Arc<Vec<Vec<u8>>>,
    /// Set for large alphabets: witnesses that follow a completed character,
    /// and completions already worked out per incomplete tail.
    reps: Option<Arc<Reps>>,
    memo: Arc<Mutex<Memo>>,
    created: usize,
}

struct Reps {
    short: Vec<Vec<u8>>,
    tails: Mutex<FxHashMap<Vec<u8>, Arc<Vec<Vec<u8>>>>>,
}

impl Reps {
    /// Witnesses for a text ending in the incomplete character `tail`: one
    /// completion per character class, each followed by at most one more
    /// representative byte.
    fn after(&self, tk: &Tokenizer, tail: &[u8]) -> Arc<Vec<Vec<u8>>> {
        if let Some(w) = self.tails.lock().unwrap().get(tail) {
            return w.clone();
        }
        let need = utf8_len(tail[0]) - tail.len();
        let mut seen = Vec::new();
        let mut out = Vec::new();
        let mut buf = tail.to_vec();
        for n in 0..64u32.pow(need as u32) {
            buf.truncate(tail.len());
            for k in 0..need {
                buf.push(0x80 | ((n >> (6 * k)) & 0x3f) as u8);
            }
            let Ok(s) = std::str::from_utf8(&buf) else { continue };
            let c = s.chars().next().unwrap();
            let class = (crate::pretok::class_of(crate::pretok::Ch::Char(c)), c.is_uppercase());
            if seen.contains(&class) || !tk.covers(&buf[tail.len()..]) {
                continue;
            }
            seen.push(class);
            for s in &self.short {
                out.push([&buf[tail.len()..], &s[..]].concat());
            }
        }
        let out = Arc::new(out);
        self.tails.lock().unwrap().insert(tail.to_vec(), out.clone());
        out
    }
}

fn utf8_len(lead: u8) -> usize {
    match lead {
        0xc2..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

type Memo = FxHashMap<(TokenId, u8, Box<[u8]>), Option<TokenId>>;

const MEMO_BYTES: usize = 8;
const MEMO_CAP: usize = 1 << 17;

impl<'t> Vct<'t> {
    pub fn new(tk: &'t Tokenizer) -> Self {
        Vct::with_cache(tk, tk.validity().clone())
    }

    pub fn with_cache(tk: &'t Tokenizer, cache: Arc<ValidityCache>) -> Self {
        let alpha = tk.alphabet();
        let small = alpha.len() <= 16;
        let reps: Vec<u8> = if small { alpha } else { WITNESS_REPS.iter().copied().filter(|&b| tk.base_token(b).is_some()).collect() };
        let witnesses = Arc::new(crate::oracle::continuations(&reps, WITNESS_BYTES));
        let reps = (!small).then(|| Arc::new(Reps { short: crate::oracle::continuations(&reps, 1), tails: Mutex::default() }));
        Vct {
            tk,
            cache,
            trunk: Vec::new(),
            local: Vec::new(),
            base: 0,
            buf: Vec::new(),
            nodes: vec![root(None, 0)],
            bounds: Bounds::empty(0),
            specials: Vec::new(),
            witnesses,
            reps,
            memo: Arc::default(),
            created: 0,
        }
    }

    pub fn tokenizer(&self) -> &'t Tokenizer {
        self.tk
    }

    /// Tokens emitted so far; append-only.
    pub fn trunk(&self) -> &[TokenId] {
        &self.trunk
    }

    /// Bytes consumed so far.
    pub fn consumed(&self) -> usize {
        self.base + self.buf.len()
    }

    /// Special tokens fed so far, with the byte offset they sit at.
    pub fn special_log(&self) -> &[(usize, TokenId)] {
        &self.specials
    }

    /// Tree nodes created so far, trunk tokens included.
    pub fn nodes_created(&self) -> usize {
        self.created
    }

    pub fn feed_byte(&mut self, b: u8) -> Result<Vec<TokenId>, Error> {
        self.feed(&[b])
    }

    /// Consumes a chunk of bytes and returns the tokens that became certain.
    /// Emissions do not depend on how the text is chunked.
    pub fn feed(&mut self, chunk: &[u8]) -> Result<Vec<TokenId>, Error> {
        let before = self.trunk.len();
        if chunk.is_empty() {
            return Ok(Vec::new());
        }
        let old = self.consumed();
        self.buf.extend_from_slice(chunk);
        let outs = self.tk.pretokenizer().outcomes(&self.buf);
        self.bounds = Bounds::new(self.base, self.buf.len(), &outs)?;
        self.recheck(old)?;
        for k in old + 1..=self.consumed() {
            self.step(k)?;
        }
        self.rebase();
        Ok(self.trunk[before..].to_vec())
    }

    /// Ends the text: emits the rest of its encoding and starts a fresh tree.
    pub fn finish(&mut self) -> Result<Vec<TokenId>, Error> {
        let before = self.trunk.len();
        let enc = self.tk.try_encode(&self.buf)?;
        let done: Vec<TokenId> = self.local.iter().map(|x| x.0).collect();
        assert!(enc.starts_with(&done), "emitted tokens disagree with the encoding of the text");
        self.trunk.extend_from_slice(&enc[done.len()..]);
        self.restart(None);
        Ok(self.trunk[before..].to_vec())
    }

    /// Ends the current text, then emits a special token; the next bytes
    /// start a new tree.
    pub fn feed_special(&mut self, id: TokenId) -> Result<Vec<TokenId>, Error> {
        if !self.tk.is_special(id) {
            return Err(Error::Config(format!("token {id} is not a special token")));
        }
        let before = self.trunk.len();
        self.finish()?;
        self.specials.push((self.consumed(), id));
        self.trunk.push(id);
        self.restart(None);
        Ok(self.trunk[before..].to_vec())
    }

    fn restart(&mut self, token: Option<TokenId>) {
        self.base = self.consumed();
        self.buf.clear();
        self.local.clear();
        self.nodes = vec![root(token, self.base)];
        self.bounds = Bounds::empty(self.base);
    }

    fn bytes(&self, a: usize, b: usize) -> &[u8] {
        &self.buf[a - self.base..b - self.base]
    }

    /// Outcomes within `within` in which token `t` may start at `x` after
    /// `prev`: as the first token of a segment, as an added token, or inside
    /// a segment when the pair check allows it.
    /// Outcomes in which a segment may start at `x` given the path so far.
    /// Only `ignore_merges` restricts this: a closed segment that is itself a
    /// vocabulary entry must have been emitted as that single token.
    fn closes(&self, prev: Option<TokenId>, prev_start: usize, x: usize) -> u64 {
        let b = &self.bounds;
        if !self.tk.ignore_merges() || x <= b.base {
            return b.all;
        }
        let mut ok = 0;
        let mut todo = b.any_at(x) & b.all;
        let mut p = x;
        while todo != 0 && p > b.base {
            p -= 1;
            let hit = b.any_at(p) & todo;
            if hit == 0 {
                continue;
            }
            todo &= !hit;
            let single = match self.tk.vocab_id(self.bytes(p, x)) {
                Some(v) => prev == Some(v) && prev_start == p,
                None => true,
            };
            if single {
                ok |= hit;
            }
        }
        ok | todo
    }

    fn edge(&self, prev: Option<TokenId>, t: TokenId, x: usize, within: u64, close: u64) -> u64 {
        let tk = self.tk;
        if within == 0 || tk.is_special(t) {
            return 0;
        }
        let b = &self.bounds;
        let mut m = 0;
        if tk.is_canonical(t) || (tk.ignore_merges() && tk.vocab_id(tk.token_bytes(t)) == Some(t)) {
            m |= b.text_at(x) & close;
        }
        let add = b.added_at(x, t) & within & close;
        if add != 0 && tk.added_tokens().iter().any(|a| a.id == t) {
            m |= add;
        }
        let inside = !b.any_at(x) & within & !m;
        if inside != 0 {
            if let Some(a) = prev {
                if tk.is_canonical(a) && tk.is_canonical(t) && bpe_pair_valid(tk, a, t) {
                    m |= inside;
                }
            }
        }
        m & within
    }

    /// Whether some token strictly extending `buf[e..k]` may follow node `i`.
    fn group_live(&mut self, i: usize, k: usize) -> bool {
        let nd = &self.nodes[i];
        let (e, prev) = (nd.end, nd.token);
        let within = nd.worlds & self.bounds.no_cut(e, k + 1);
        if within == 0 {
            return false;
        }
        let close = self.closes(prev, nd.start, e);
        let q = self.bytes(e, k);
        if let Some(w) = nd.witness {
            let wb = self.tk.token_bytes(w);
            if wb.len() > q.len() && wb.starts_with(q) && self.edge(prev, w, e, within, close) != 0 {
                return true;
            }
        }
        let b = &self.bounds;
        let flags = ((b.text_at(e) & within & close != 0) as u8) | ((!b.any_at(e) & within != 0) as u8) << 1;
        let memo_ok = q.len() <= MEMO_BYTES && b.added_anywhere_at(e) & within & close == 0;
        let key = memo_ok.then(|| (prev.unwrap_or(TokenId::MAX), flags, Box::from(q)));
        let hit = key.as_ref().and_then(|k| self.memo.lock().unwrap().get(k).copied());
        let found = match hit {
            Some(hit) => hit,
            None => {
                let found = self.cache.index().extending(q).iter().copied().find(|&t| self.edge(prev, t, e, within, close) != 0);
                if let Some(key) = key {
                    let mut memo = self.memo.lock().unwrap();
                    if memo.len() >= MEMO_CAP {
                        memo.clear();
                    }
                    memo.insert(key, found);
                }
                found
            }
        };
        self.nodes[i].witness = found;
        found.is_some()
    }

    /// Recomputes every path's outcome set after the outcomes changed.
    fn recheck(&mut self, k: usize) -> Result<(), Error> {
        let mut alive = vec![true; self.nodes.len()];
        self.nodes[0].worlds = self.bounds.all;
        for i in 1..self.nodes.len() {
            let nd = &self.nodes[i];
            let p = nd.parent;
            let within = self.nodes[p].worlds & self.bounds.no_cut(nd.start, nd.end);
            let par = &self.nodes[p];
            let w = if alive[p] {
                let close = self.closes(par.token, par.start, nd.start);
                self.edge(par.token, nd.token.unwrap(), nd.start, within, close)
            } else {
                0
            };
            self.nodes[i].worlds = w;
            alive[i] = w != 0;
        }
        for i in 0..self.nodes.len() {
            if self.nodes[i].open && self.nodes[i].end < k && alive[i] {
                let live = self.group_live(i, k);
                self.nodes[i].open = live;
            }
        }
        self.prune(k, alive)
    }

    /// Extends the tree by the byte ending at absolute offset `k`.
    fn step(&mut self, k: usize) -> Result<(), Error> {
        let n0 = self.nodes.len();
        for i in 0..n0 {
            if !self.nodes[i].open {
                continue;
            }
            let (e, prev) = (self.nodes[i].end, self.nodes[i].token);
            let within = self.nodes[i].worlds & self.bounds.no_cut(e, k);
            if within != 0 {
                let close = self.closes(prev, self.nodes[i].start, e);
                let q = self.bytes(e, k);
                let exact = self.cache.index().with_prefix(q);
                let n = exact.iter().take_while(|&&t| self.tk.token_bytes(t).len() == q.len()).count();
                for j in 0..n {
                    let t = self.cache.index().with_prefix(self.bytes(e, k))[j];
                    let w = self.edge(prev, t, e, within, close);
                    if w != 0 {
                        self.nodes.push(Node { token: Some(t), parent: i, start: e, end: k, worlds: w, open: true, witness: None });
                        self.created += 1;
                    }
                }
            }
            let live = self.group_live(i, k);
            self.nodes[i].open = live;
        }
        let alive = vec![true; self.nodes.len()];
        self.prune(k, alive)?;
        self.emit(k);
        Ok(())
    }

    fn prune(&mut self, k: usize, mut alive: Vec<bool>) -> Result<(), Error> {
        let n = self.nodes.len();
        let mut keep = vec![false; n];
        for i in (0..n).rev() {
            let nd = &self.nodes[i];
            if alive[i] && (nd.end == k || nd.open) {
                keep[i] = true;
            }
            if keep[i] && i > 0 {
                let p = nd.parent;
                if alive[p] {
                    keep[p] = true;
                } else {
                    keep[i] = false;
                }
            }
        }
        // a kept node needs every ancestor alive
        for i in 1..n {
            if keep[i] && !keep[self.nodes[i].parent] {
                keep[i] = false;
            }
            alive[i] = keep[i];
        }
        if !keep[0] {
            return Err(Error::DeadTree(k.saturating_sub(1)));
        }
        let mut remap = vec![NONE; n];
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if keep[i] {
                remap[i] = out.len();
                let mut nd = self.nodes[i].clone();
                if i > 0 {
                    nd.parent = remap[nd.parent];
                }
                out.push(nd);
            }
        }
        self.nodes = out;
        Ok(())
    }

    /// Moves the root's only child into the trunk while the root has no
    /// overhanging alternatives.
    fn emit(&mut self, k: usize) {
        loop {
            let r = &self.nodes[0];
            if r.end == k || r.open {
                return;
            }
            let kids = self.nodes.iter().filter(|n| n.parent == 0).count();
            if kids != 1 {
                return;
            }
            // the child precedes every other survivor, so it sits at index 1
            self.nodes.remove(0);
            for nd in &mut self.nodes[1..] {
                nd.parent -= 1;
            }
            let c = &mut self.nodes[0];
            c.parent = NONE;
            let t = c.token.unwrap();
            self.trunk.push(t);
            self.local.push((t, c.end));
        }
    }

    /// Forgets text before the last boundary every future agrees on.
    fn rebase(&mut self) {
        let limit = self.nodes[0].end;
        let x = self.bounds.forced.iter().rev().find(|&&f| f <= limit).copied();
        let x = match x {
            Some(x) => x,
            None if limit == self.consumed() && self.bounds.end == self.bounds.all => limit,
            None => return,
        };
        if x <= self.base {
            return;
        }
        if x == self.consumed() {
            self.bounds = Bounds::empty(x);
        } else {
            self.bounds.rebase(x);
        }
        self.buf.drain(..x - self.base);
        self.base = x;
        self.local.retain(|&(_, end)| end > x);
    }

    fn path_to(&self, mut i: usize) -> Vec<TokenId> {
        let mut p = Vec::new();
        while i != 0 {
            p.push(self.nodes[i].token.unwrap());
            i = self.nodes[i].parent;
        }
        p.reverse();
        p
    }

    /// `local ++ path` re-encodes as a prefix of `buf ++ overhang ++ s` for
    /// some short `s`.
    fn extendable(&self, path: &[TokenId], overhang: &[u8]) -> bool {
        let mut seq: Vec<TokenId> = self.local.iter().map(|x| x.0).collect();
        seq.extend_from_slice(path);
        let mut text = self.buf.clone();
        text.extend_from_slice(overhang);
        if self.tk.try_encode(&text).is_ok_and(|e| e.starts_with(&seq)) {
            return true;
        }
        // Everything before the last start shared by all pretokenizations is
        // segmented the same whatever follows, so check it once and only
        // search continuations of the rest.
        let outs = self.tk.pretokenizer().outcomes(&text);
        let cut = (1..text.len()).rev().find(|&x| !outs.is_empty() && outs.iter().all(|o| o.starts.iter().any(|s| s.0 == x)));
        if let Some(x) = cut {
            let mut at = 0;
            let Some(j) = seq.iter().position(|&t| {
                at += self.tk.token_bytes(t).len();
                at >= x
            }) else {
                return false;
            };
            if at != x || self.tk.try_encode(&text[..x]).map_or(true, |e| e != seq[..=j]) {
                return false;
            }
            seq.drain(..=j);
            text.drain(..x);
        }
        let n = text.len();
        let open = match &self.reps {
            Some(r) => {
                let p = crate::pretok::decode(&text, true).pending;
                (p > 0).then(|| r.after(self.tk, &text[n - p..]))
            }
            None => None,
        };
        open.as_deref().unwrap_or(&self.witnesses).iter().any(|s| {
            text.truncate(n);
            text.extend_from_slice(s);
            self.tk.try_encode(&text).is_ok_and(|e| e.starts_with(&seq))
        })
    }

    /// Coverings before the extendability filter.
    fn candidates(&self) -> Vec<Leaf> {
        let k = self.consumed();
        let mut out = Vec::new();
        for i in 0..self.nodes.len() {
            let nd = &self.nodes[i];
            if nd.end == k {
                out.push(Leaf { path: self.path_to(i), overhang: Vec::new() });
                continue;
            }
            let within = nd.worlds & self.bounds.no_cut(nd.end, k + 1);
            if !nd.open || within == 0 {
                continue;
            }
            let q = self.bytes(nd.end, k);
            let path = self.path_to(i);
            let close = self.closes(nd.token, nd.start, nd.end);
            for &t in self.cache.index().extending(q) {
                if self.edge(nd.token, t, nd.end, within, close) != 0 {
                    let mut p = path.clone();
                    p.push(t);
                    out.push(Leaf { path: p, overhang: self.tk.token_bytes(t)[q.len()..].to_vec() });
                }
            }
        }
        out
    }

    /// Every minimal covering of the text that is a prefix of some valid
    /// token sequence. Paths are relative to the trunk; an empty path means
    /// the trunk itself ends exactly at the end of the text.
    pub fn leaves(&self) -> Vec<Leaf> {
        let mut v: Vec<Leaf> = self.candidates().into_iter().filter(|l| self.extendable(&l.path, &l.overhang)).collect();
        v.sort();
        v
    }

    /// Whether `trunk ++ path` is exactly the encoding of the text so far.
    pub fn is_complete(&self, path: &[TokenId]) -> bool {
        let mut seq: Vec<TokenId> = self.local.iter().map(|x| x.0).collect();
        seq.extend_from_slice(path);
        self.tk.try_encode(&self.buf).is_ok_and(|e| e == seq)
    }

    /// Collapses the tree onto one leaf: its tokens join the trunk and its
    /// overhang is consumed as text.
    pub fn commit_leaf(&mut self, leaf: &Leaf) -> Result<(), Error> {
        if !self.leaves().contains(leaf) {
            return Err(Error::NotALeaf(format!("{:?}", leaf.path)));
        }
        self.commit_unchecked(leaf)
    }

    fn commit_unchecked(&mut self, leaf: &Leaf) -> Result<(), Error> {
        let mut end = self.nodes[0].end;
        for &t in &leaf.path {
            end += self.tk.token_bytes(t).len();
            self.trunk.push(t);
            self.local.push((t, end));
        }
        self.buf.extend_from_slice(&leaf.overhang);
        let token = self.trunk.last().copied().filter(|_| !leaf.path.is_empty()).or(self.nodes[0].token);
        self.nodes = vec![root(token, end)];
        let outs = self.tk.pretokenizer().outcomes(&self.buf);
        self.bounds = Bounds::new(self.base, self.buf.len(), &outs)?;
        self.nodes[0].worlds = self.bounds.all;
        self.rebase();
        Ok(())
    }

    /// Commits the unique leaf whose last token is `t`.
    pub fn commit_token(&mut self, t: TokenId) -> Result<(), Error> {
        let hits: Vec<Leaf> = self.leaves().into_iter().filter(|l| l.last() == Some(t)).collect();
        match hits.len() {
            1 => self.commit_unchecked(&hits[0]),
            0 => Err(Error::NotALeaf(format!("token {t} ends no covering"))),
            _ => Err(Error::NotALeaf(format!("token {t} ends {} coverings", hits.len()))),
        }
    }

    pub fn branch_stats(&self) -> BranchStats {
        let mut depth = vec![0usize; self.nodes.len()];
        for i in 1..self.nodes.len() {
            depth[i] = depth[self.nodes[i].parent] + 1;
        }
        BranchStats {
            non_trunk_edges: self.nodes.len() - 1,
            live_hypotheses: self.bounds.worlds,
            deepest_branch: depth.into_iter().max().unwrap_or(0),
        }
    }

    /// Indented listing: trunk, then each node as `id "bytes" [start, end)`,
    /// then leaf-group sizes and stats.
    pub fn dump(&self) -> String {
        let tk = self.tk;
        let mut s = String::new();
        let show = |t: TokenId| format!("{t} \"{}\"", tk.display(t));
        let trunk: Vec<String> = self.trunk.iter().map(|&t| show(t)).collect();
        let _ = writeln!(s, "consumed {} bytes", self.consumed());
        let _ = writeln!(s, "trunk ({}): {}", self.trunk.len(), trunk.join(" "));
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, nd) in self.nodes.iter().enumerate() {
            if i > 0 {
                depth[i] = depth[nd.parent] + 1;
            }
            let label = nd.token.map_or("root".to_string(), show);
            let mark = if i == 0 { "* " } else { "" };
            let _ = writeln!(s, "{}{mark}{label} [{}, {})", "  ".repeat(depth[i] + 1), nd.start, nd.end);
        }
        let mut groups: Vec<(Vec<TokenId>, usize)> = Vec::new();
        for l in self.leaves() {
            let head = l.path[..l.path.len().saturating_sub(1)].to_vec();
            match groups.last_mut() {
                Some(g) if g.0 == head => g.1 += 1,
                _ => groups.push((head, 1)),
            }
        }
        for (head, n) in groups {
            let h: Vec<String> = head.iter().map(|&t| show(t)).collect();
            let _ = writeln!(s, "leaf group [{}]: {n}", h.join(" "));
        }
        let st = self.branch_stats();
        let _ = writeln!(
            s,
            "stats: non_trunk_edges={} live_hypotheses={} deepest_branch={}",
            st.non_trunk_edges, st.live_hypotheses, st.deepest_branch
        );
        s
    }
}

fn root(token: Option<TokenId>, end: usize) -> Node {
    Node { token, parent: NONE, start: end, end, worlds: u64::MAX, open: true, witness: None }
}

/// Streams `text` through a fresh tree in chunks of the given sizes (cycled)
/// and returns everything emitted, the final flush included.
pub fn stream_encode(tk: &Tokenizer, text: &[u8], chunks: &[usize]) -> Result<Vec<TokenId>, Error> {
    let mut v = Vct::new(tk);
    let mut out = Vec::new();
    let mut pos = 0;
    let mut i = 0;
    while pos < text.len() {
        let n = chunks.get(i % chunks.len().max(1)).copied().unwrap_or(1).max(1);
        let end = (pos + n).min(text.len());
        out.extend(v.feed(&text[pos..end])?);
        pos = end;
        i += 1;
    }
    out.extend(v.finish()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::TokenizerParts;

    fn toy(vocab: &[&str], merges: &[(u32, u32)]) -> Tokenizer {
        let v = vocab.iter().map(|s| s.as_bytes().to_vec()).collect();
        Tokenizer::from_parts(TokenizerParts { vocab: v, merges: merges.to_vec(), ..Default::default() }).unwrap()
    }

    #[test]
    fn single_merge_a() {
        let tk = toy(&["a", "b", "ab"], &[(0, 1)]);
        let mut v = Vct::new(&tk);
        assert!(v.feed_byte(b'a').unwrap().is_empty());
        let finals: Vec<_> = v.leaves().iter().map(|l| l.last().unwrap()).collect();
        assert_eq!(finals, vec![0, 2]);
        assert_eq!(v.feed_byte(b'b').unwrap(), vec![2]);
        assert_eq!(v.leaves(), vec![Leaf { path: vec![], overhang: vec![] }]);
        // nothing else starts with "b"
        assert_eq!(v.feed_byte(b'b').unwrap(), vec![1]);
        assert_eq!(v.feed_byte(b'a').unwrap(), Vec::<TokenId>::new());
        assert_eq!(v.finish().unwrap(), vec![0]);
    }

    #[test]
    fn empty_prompt_has_the_empty_leaf() {
        let tk = toy(&["a", "b", "ab"], &[(0, 1)]);
        let v = Vct::new(&tk);
        assert_eq!(v.leaves(), vec![Leaf { path: vec![], overhang: vec![] }]);
        assert_eq!(v.branch_stats().non_trunk_edges, 0);
    }

    #[test]
    fn commit_errors_and_collapse() {
        let tk = toy(&["a", "b", "ab"], &[(0, 1)]);
        let mut v = Vct::new(&tk);
        v.feed(b"a").unwrap();
        assert!(v.commit_token(1).is_err());
        v.commit_token(2).unwrap();
        assert_eq!(v.trunk(), &[2]);
        assert_eq!(v.consumed(), 2);
    }

    #[test]
    fn stream_matches_encode_on_toy() {
        let tk = toy(&["a", "b", "ab", "ba", "aab", "bab"], &[(0, 1), (1, 0), (0, 2), (1, 2)]);
        let text = b"abaababbbabaaabbab".repeat(5);
        for chunks in [&[1][..], &[2, 3], &[7], &[1000]] {
            assert_eq!(stream_encode(&tk, &text, chunks).unwrap(), tk.encode(&text));
        }
    }
}

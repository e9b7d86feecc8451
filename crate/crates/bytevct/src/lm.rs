//! Token-level language models: the contract the sampler drives, plus the
//! table, uniform and replay implementations used for testing and demos.
//!
//! A distribution is a vector of natural-log probabilities of length
//! `vocab_size() + 1`; the last entry is end-of-sequence. Contexts start with
//! [`BOS`].

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::{Error, TokenId};

/// Beginning-of-sequence marker. Never a vocabulary id.
pub const BOS: TokenId = TokenId::MAX;

pub trait LanguageModel {
    /// Number of token ids; end-of-sequence sits at this index.
    fn vocab_size(&self) -> usize;

    fn next_logprobs(&self, ctx: &[TokenId]) -> Result<Vec<f64>, Error>;

    fn eos(&self) -> usize {
        self.vocab_size()
    }
}

impl<L: LanguageModel + ?Sized> LanguageModel for &L {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_logprobs(&self, ctx: &[TokenId]) -> Result<Vec<f64>, Error> {
        (**self).next_logprobs(ctx)
    }
}

impl<L: LanguageModel + ?Sized> LanguageModel for Box<L> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn next_logprobs(&self, ctx: &[TokenId]) -> Result<Vec<f64>, Error> {
        (**self).next_logprobs(ctx)
    }
}

fn check_bos(ctx: &[TokenId]) -> Result<(), Error> {
    match ctx.first() {
        Some(&BOS) => Ok(()),
        _ => Err(Error::MissingBos),
    }
}

/// `ln Σ exp(x)`, stable; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Shifts `v` so it log-sum-exps to zero. Fails if everything is `-inf`.
pub fn normalize_log(v: &mut [f64]) -> Result<(), Error> {
    let z = log_sum_exp(v);
    if !z.is_finite() {
        return Err(Error::Config("distribution has no finite mass".into()));
    }
    for x in v.iter_mut() {
        *x -= z;
    }
    Ok(())
}

/// Sum of stepwise log-probabilities of `seq[1..]`, plus the end-of-sequence
/// term when `terminated`.
pub fn seq_logprob<L: LanguageModel + ?Sized>(lm: &L, seq: &[TokenId], terminated: bool) -> Result<f64, Error> {
    check_bos(seq)?;
    let mut lp = 0.0;
    for i in 1..seq.len() {
        let d = lm.next_logprobs(&seq[..i])?;
        lp += d[seq[i] as usize];
    }
    if terminated {
        lp += lm.next_logprobs(seq)?[lm.eos()];
    }
    Ok(lp)
}

/// Every token and end-of-sequence equally likely.
#[derive(Clone, Debug)]
pub struct UniformLM {
    n: usize,
}

impl UniformLM {
    pub fn new(vocab_size: usize) -> Self {
        UniformLM { n: vocab_size }
    }
}

impl LanguageModel for UniformLM {
    fn vocab_size(&self) -> usize {
        self.n
    }
    fn next_logprobs(&self, ctx: &[TokenId]) -> Result<Vec<f64>, Error> {
        check_bos(ctx)?;
        Ok(vec![-((self.n + 1) as f64).ln(); self.n + 1])
    }
}

/// Explicit conditional table with a back-off row and a horizon: contexts of
/// `horizon` tokens or more end the sequence with certainty.
#[derive(Clone, Debug)]
pub struct TabularLM {
    n: usize,
    horizon: usize,
    default: Vec<f64>,
    table: FxHashMap<Vec<TokenId>, Vec<f64>>,
}

/// A probability row in a table file: dense (`n + 1` numbers) or sparse
/// (`{"<id>": p, "eos": p}`). Rows are normalized on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Row {
    Dense(Vec<f64>),
    Sparse(BTreeMap<String, f64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableEntry {
    /// Context after BOS.
    pub context: Vec<TokenId>,
    pub probs: Row,
}

/// On-disk form of a [`TabularLM`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableFile {
    pub vocab_size: usize,
    pub horizon: usize,
    /// Back-off row; uniform when absent.
    #[serde(default)]
    pub default: Option<Row>,
    #[serde(default)]
    pub entries: Vec<TableEntry>,
}

fn row_to_log(row: &Row, n: usize) -> Result<Vec<f64>, Error> {
    let mut p = vec![0.0; n + 1];
    match row {
        Row::Dense(v) => {
            if v.len() != n + 1 {
                return Err(Error::Config(format!("dense row has {} entries, want {}", v.len(), n + 1)));
            }
            p.copy_from_slice(v);
        }
        Row::Sparse(m) => {
            for (k, &v) in m {
                let i = if k == "eos" {
                    n
                } else {
                    k.parse::<usize>().ok().filter(|&i| i < n).ok_or_else(|| Error::Config(format!("bad row key {k:?}")))?
                };
                p[i] += v;
            }
        }
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Config("row has a negative or non-finite probability".into()));
    }
    let mut lp: Vec<f64> = p.iter().map(|&x| x.ln()).collect();
    normalize_log(&mut lp)?;
    Ok(lp)
}

impl TabularLM {
    /// `default` and table rows are log-probability vectors; they are
    /// normalized here.
    pub fn new(vocab_size: usize, horizon: usize, default: Option<Vec<f64>>) -> Result<Self, Error> {
        let mut default = default.unwrap_or_else(|| vec![0.0; vocab_size + 1]);
        if default.len() != vocab_size + 1 {
            return Err(Error::Config("default row has the wrong length".into()));
        }
        normalize_log(&mut default)?;
        Ok(TabularLM { n: vocab_size, horizon, default, table: FxHashMap::default() })
    }

    /// Sets the row for a context (tokens after BOS).
    pub fn set(&mut self, ctx: Vec<TokenId>, mut logprobs: Vec<f64>) -> Result<(), Error> {
        if logprobs.len() != self.n + 1 {
            return Err(Error::Config("row has the wrong length".into()));
        }
        normalize_log(&mut logprobs)?;
        self.table.insert(ctx, logprobs);
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn contexts(&self) -> impl Iterator<Item = &Vec<TokenId>> {
        self.table.keys()
    }

    pub fn from_file(f: &TableFile) -> Result<Self, Error> {
        let default = f.default.as_ref().map(|r| row_to_log(r, f.vocab_size)).transpose()?;
        let mut lm = TabularLM::new(f.vocab_size, f.horizon, default)?;
        for e in &f.entries {
            if e.context.iter().any(|&t| t as usize >= f.vocab_size) {
                return Err(Error::Config(format!("context {:?} has an id outside the vocabulary", e.context)));
            }
            let row = row_to_log(&e.probs, f.vocab_size)?;
            lm.table.insert(e.context.clone(), row);
        }
        Ok(lm)
    }

    /// Sparse rows keyed by context, sorted for stable output.
    pub fn to_file(&self) -> TableFile {
        let sparse = |v: &[f64]| {
            let mut m = BTreeMap::new();
            for (i, &x) in v.iter().enumerate() {
                if x > f64::NEG_INFINITY {
                    let k = if i == self.n { "eos".to_string() } else { i.to_string() };
                    m.insert(k, x.exp());
                }
            }
            Row::Sparse(m)
        };
        let mut entries: Vec<TableEntry> =
            self.table.iter().map(|(c, v)| TableEntry { context: c.clone(), probs: sparse(v) }).collect();
        entries.sort_by(|a, b| a.context.cmp(&b.context));
        TableFile { vocab_size: self.n, horizon: self.horizon, default: Some(sparse(&self.default)), entries }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let f: TableFile = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        TabularLM::from_file(&f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        let w = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(w, &self.to_file())?;
        Ok(())
    }
}

impl LanguageModel for TabularLM {
    fn vocab_size(&self) -> usize {
        self.n
    }
    fn next_logprobs(&self, ctx: &[TokenId]) -> Result<Vec<f64>, Error> {
        check_bos(ctx)?;
        let body = &ctx[1..];
        if body.len() >= self.horizon {
            let mut v = vec![f64::NEG_INFINITY; self.n + 1];
            v[self.n] = 0.0;
            return Ok(v);
        }
        Ok(self.table.get(body).unwrap_or(&self.default).clone())
    }
}

const REPLAY_MAGIC: &[u8; 8] = b"BVCTRPL\0";
const REPLAY_VERSION: u8 = 1;

/// FNV-1a over the little-endian bytes of each id; the replay key hash.
pub fn context_hash(ctx: &[TokenId]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for t in ctx {
        for b in t.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Logits captured offline, looked up by exact context. A context that was
/// not recorded is an error.
///
/// File layout (little-endian): the 8-byte magic `BVCTRPL\0`, a version byte
/// (1), a `u32` row width (`vocab + 1`), then records until end of file:
/// `u32` id count, that many `u32` ids (the context after BOS), and `width`
/// `f32` log-probabilities.
#[derive(Debug, Default)]
pub struct ReplayLM {
    width: usize,
    rows: FxHashMap<u64, Vec<(Vec<TokenId>, Vec<f32>)>>,
}

impl ReplayLM {
    pub fn new(vocab_size: usize) -> Self {
        ReplayLM { width: vocab_size + 1, rows: FxHashMap::default() }
    }

    /// Records the row for `ctx` (after BOS); a repeated context replaces
    /// the earlier row.
    pub fn insert(&mut self, ctx: Vec<TokenId>, logprobs: Vec<f32>) -> Result<(), Error> {
        if logprobs.len() != self.width {
            return Err(Error::ReplayFormat(format!("row width {} != {}", logprobs.len(), self.width)));
        }
        let bucket = self.rows.entry(context_hash(&ctx)).or_default();
        match bucket.iter_mut().find(|(k, _)| *k == ctx) {
            Some(slot) => slot.1 = logprobs,
            None => bucket.push((ctx, logprobs)),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, Error> {
        let mut head = [0u8; 13];
        r.read_exact(&mut head).map_err(|_| Error::ReplayFormat("truncated header".into()))?;
        if &head[..8] != REPLAY_MAGIC {
            return Err(Error::ReplayFormat("bad magic".into()));
        }
        if head[8] != REPLAY_VERSION {
            return Err(Error::ReplayFormat(format!("unsupported version {}", head[8])));
        }
        let width = u32::from_le_bytes(head[9..13].try_into().unwrap()) as usize;
        if width == 0 {
            return Err(Error::ReplayFormat("zero row width".into()));
        }
        let mut lm = ReplayLM { width, rows: FxHashMap::default() };
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        let mut pos = 0;
        let word = |pos: &mut usize| -> Result<[u8; 4], Error> {
            let w = data.get(*pos..*pos + 4).ok_or_else(|| Error::ReplayFormat("truncated record".into()))?;
            *pos += 4;
            Ok(w.try_into().unwrap())
        };
        while pos < data.len() {
            let n = u32::from_le_bytes(word(&mut pos)?) as usize;
            let mut ctx = Vec::with_capacity(n);
            for _ in 0..n {
                ctx.push(u32::from_le_bytes(word(&mut pos)?));
            }
            let mut row = Vec::with_capacity(width);
            for _ in 0..width {
                row.push(f32::from_le_bytes(word(&mut pos)?));
            }
            lm.insert(ctx, row)?;
        }
        Ok(lm)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), Error> {
        w.write_all(REPLAY_MAGIC)?;
        w.write_all(&[REPLAY_VERSION])?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        let mut all: Vec<&(Vec<TokenId>, Vec<f32>)> = self.rows.values().flatten().collect();
        all.sort_by(|a, b| a.0.cmp(&b.0));
        for (ctx, row) in all {
            w.write_all(&(ctx.len() as u32).to_le_bytes())?;
            for t in ctx {
                w.write_all(&t.to_le_bytes())?;
            }
            for x in row {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        ReplayLM::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

impl LanguageModel for ReplayLM {
    fn vocab_size(&self) -> usize {
        self.width - 1
    }
    fn next_logprobs(&self, ctx: &[TokenId]) -> Result<Vec<f64>, Error> {
        check_bos(ctx)?;
        let body = &ctx[1..];
        self.rows
            .get(&context_hash(body))
            .and_then(|b| b.iter().find(|(k, _)| k == body))
            .map(|(_, row)| row.iter().map(|&x| x as f64).collect())
            .ok_or_else(|| Error::ReplayMiss(body.to_vec()))
    }
}

/// Wraps a model and records every distinct context it is asked about, so
/// the session can be replayed later without the model.
pub struct Recorder<L> {
    inner: L,
    seen: Mutex<ReplayLM>,
}

impl<L: LanguageModel> Recorder<L> {
    pub fn new(inner: L) -> Self {
        let n = inner.vocab_size();
        Recorder { inner, seen: Mutex::new(ReplayLM::new(n)) }
    }

    pub fn into_replay(self) -> ReplayLM {
        self.seen.into_inner().unwrap()
    }
}

impl<L: LanguageModel> LanguageModel for Recorder<L> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }
    fn next_logprobs(&self, ctx: &[TokenId]) -> Result<Vec<f64>, Error> {
        let v = self.inner.next_logprobs(ctx)?;
        let row: Vec<f32> = v.iter().map(|&x| x as f32).collect();
        self.seen.lock().unwrap().insert(ctx[1..].to_vec(), row)?;
        Ok(v)
    }
}

/// Counts `next_logprobs` invocations.
pub struct Counted<L> {
    inner: L,
    calls: AtomicUsize,
}

impl<L: LanguageModel> Counted<L> {
    pub fn new(inner: L) -> Self {
        Counted { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<L: LanguageModel> LanguageModel for Counted<L> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }
    fn next_logprobs(&self, ctx: &[TokenId]) -> Result<Vec<f64>, Error> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.next_logprobs(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_rows() {
        let lm = UniformLM::new(4);
        let v = lm.next_logprobs(&[BOS]).unwrap();
        assert!(v.iter().all(|&x| (x - (0.2f64).ln()).abs() < 1e-15));
        assert!((seq_logprob(&lm, &[BOS, 0, 1, 2], false).unwrap() - 3.0 * (0.2f64).ln()).abs() < 1e-12);
        assert_eq!(seq_logprob(&lm, &[BOS], false).unwrap(), 0.0);
        assert!(matches!(lm.next_logprobs(&[0]), Err(Error::MissingBos)));
    }

    #[test]
    fn table_horizon_and_rows() {
        let mut lm = TabularLM::new(3, 2, None).unwrap();
        lm.set(vec![1], vec![0.0, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY]).unwrap();
        let r = lm.next_logprobs(&[BOS, 1]).unwrap();
        assert!((r[0] - 0.5f64.ln()).abs() < 1e-12 && r[1] == f64::NEG_INFINITY);
        assert_eq!(lm.next_logprobs(&[BOS, 1, 0]).unwrap()[3], 0.0);
        let back = TabularLM::from_file(&lm.to_file()).unwrap();
        for ctx in [&[BOS][..], &[BOS, 1], &[BOS, 2]] {
            let (a, b) = (lm.next_logprobs(ctx).unwrap(), back.next_logprobs(ctx).unwrap());
            assert!(a.iter().zip(&b).all(|(x, y)| x == y || (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn replay_round_trip_and_miss() {
        let mut lm = ReplayLM::new(2);
        lm.insert(vec![], vec![-1.0986123, -1.0986123, -1.0986123]).unwrap();
        lm.insert(vec![0, 1], vec![-0.5, -1.5, -2.5]).unwrap();
        let mut buf = Vec::new();
        lm.write_to(&mut buf).unwrap();
        let back = ReplayLM::read_from(&buf[..]).unwrap();
        assert_eq!(back.next_logprobs(&[BOS, 0, 1]).unwrap(), vec![-0.5, -1.5, -2.5]);
        assert!(matches!(back.next_logprobs(&[BOS, 1]), Err(Error::ReplayMiss(c)) if c == vec![1]));
        assert!(ReplayLM::read_from(&b"nope"[..]).is_err());
    }

    #[test]
    fn log_helpers() {
        assert!((log_add(0.5f64.ln(), 0.5f64.ln())).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}

//! Byte-level conditioning and sampling on top of a token-level model.
//!
//! The mass of a byte prefix is the total probability of the leaves of its
//! covering tree. The next-byte distribution is computed by feeding each
//! candidate byte into a clone of the tree and measuring the leaves of the
//! result, so consecutive distributions telescope exactly into prefix
//! masses whatever the model does with invalid sequences.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::lm::{log_sum_exp, normalize_log, LanguageModel, BOS};
use crate::tokenizer::Tokenizer;
use crate::vct::{Leaf, Vct};
use crate::{Error, TokenId};

/// Index of the end-of-text event in a [`ByteDistribution`].
pub const END: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Byte(u8),
    End,
    Special(TokenId),
}

/// Log masses over the 256 bytes, end-of-text, and optionally special
/// tokens that may be generated at a token boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct ByteDistribution {
    raw: Vec<f64>,
    specials: Vec<TokenId>,
    total: f64,
}

impl ByteDistribution {
    /// `raw` holds 257 entries followed by one per entry of `specials`.
    pub fn from_raw(raw: Vec<f64>, specials: Vec<TokenId>) -> Result<Self, Error> {
        if raw.len() != 257 + specials.len() {
            return Err(Error::Config(format!("expected {} events, got {}", 257 + specials.len(), raw.len())));
        }
        let total = log_sum_exp(&raw);
        Ok(ByteDistribution { raw, specials, total })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn event(&self, i: usize) -> Event {
        match i {
            0..=255 => Event::Byte(i as u8),
            END => Event::End,
            _ => Event::Special(self.specials[i - 257]),
        }
    }

    pub fn index(&self, e: Event) -> Option<usize> {
        match e {
            Event::Byte(b) => Some(b as usize),
            Event::End => Some(END),
            Event::Special(t) => self.specials.iter().position(|&s| s == t).map(|i| 257 + i),
        }
    }

    /// Unnormalized covering mass of an event, as a log.
    pub fn raw(&self, e: Event) -> f64 {
        self.index(e).map_or(f64::NEG_INFINITY, |i| self.raw[i])
    }

    pub fn raw_masses(&self) -> &[f64] {
        &self.raw
    }

    /// Log of the summed raw mass.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn logprob(&self, e: Event) -> f64 {
        self.raw(e) - self.total
    }

    pub fn prob(&self, e: Event) -> f64 {
        self.logprob(e).exp()
    }

    /// Normalized log-probabilities, indexed like [`raw_masses`](Self::raw_masses).
    pub fn logprobs(&self) -> Vec<f64> {
        self.raw.iter().map(|x| x - self.total).collect()
    }

    /// Events with nonzero probability and their normalized log-probabilities.
    pub fn support(&self) -> Vec<(Event, f64)> {
        (0..self.raw.len()).filter(|&i| self.raw[i] > f64::NEG_INFINITY).map(|i| (self.event(i), self.raw[i] - self.total)).collect()
    }

    pub fn argmax(&self) -> Option<Event> {
        let mut best: Option<usize> = None;
        for (i, &x) in self.raw.iter().enumerate() {
            if x > f64::NEG_INFINITY && best.map_or(true, |b| x > self.raw[b]) {
                best = Some(i);
            }
        }
        best.map(|i| self.event(i))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<Event, Error> {
        if !self.total.is_finite() {
            return Err(Error::Config("distribution has no finite mass".into()));
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = None;
        for (i, &x) in self.raw.iter().enumerate() {
            if x == f64::NEG_INFINITY {
                continue;
            }
            acc += (x - self.total).exp();
            last = Some(i);
            if u < acc {
                return Ok(self.event(i));
            }
        }
        // rounding left a sliver above the last event
        Ok(self.event(last.expect("finite total implies an event")))
    }

    /// The same events under a byte-level transform, normalized.
    pub fn transformed(&self, cfg: &SamplerConfig) -> Result<ByteDistribution, Error> {
        ByteDistribution::from_raw(apply_transform(cfg, &self.raw)?, self.specials.clone())
    }

    fn normalized(&self) -> ByteDistribution {
        ByteDistribution { raw: self.logprobs(), specials: self.specials.clone(), total: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Transform each next-token vector before masses are grouped by byte.
    Token,
    /// Transform the final event vector.
    #[default]
    Byte,
}

/// Decoding transform and RNG seed. A temperature of zero means argmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub top_p: Option<f64>,
    pub level: Level,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { temperature: 1.0, top_k: None, top_p: None, level: Level::Byte, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn greedy() -> Self {
        SamplerConfig { temperature: 0.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be a non-negative real, got {}", self.temperature)));
        }
        if self.top_k == Some(0) {
            return Err(Error::Config("top-k of 0 removes every event".into()));
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("top-p must lie in (0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.temperature == 1.0 && self.top_k.is_none() && self.top_p.map_or(true, |p| p == 1.0)
    }

    /// ChaCha8 seeded with `seed`.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Temperature, then top-k, then top-p, then renormalization. Input and
/// output are natural-log masses; ties keep the lower index.
pub fn apply_transform(cfg: &SamplerConfig, masses: &[f64]) -> Result<Vec<f64>, Error> {
    cfg.validate()?;
    let mut v: Vec<f64> = masses.to_vec();
    if cfg.temperature == 0.0 {
        let mut best: Option<usize> = None;
        for (i, &x) in v.iter().enumerate() {
            if x > f64::NEG_INFINITY && best.map_or(true, |b| x > v[b]) {
                best = Some(i);
            }
        }
        let best = best.ok_or_else(|| Error::Config("distribution has no finite mass".into()))?;
        return Ok((0..v.len()).map(|i| if i == best { 0.0 } else { f64::NEG_INFINITY }).collect());
    }
    if cfg.temperature != 1.0 {
        for x in v.iter_mut() {
            *x /= cfg.temperature;
        }
    }
    normalize_log(&mut v)?;
    if cfg.top_k.is_some() || cfg.top_p.is_some() {
        let mut order: Vec<usize> = (0..v.len()).filter(|&i| v[i] > f64::NEG_INFINITY).collect();
        order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        let mut keep = order.len();
        if let Some(k) = cfg.top_k {
            keep = keep.min(k);
        }
        if let Some(p) = cfg.top_p {
            let mut acc = 0.0;
            for (n, &i) in order.iter().enumerate() {
                acc += v[i].exp();
                if acc >= p - 1e-12 {
                    keep = keep.min(n + 1);
                    break;
                }
            }
        }
        for &i in &order[keep..] {
            v[i] = f64::NEG_INFINITY;
        }
        normalize_log(&mut v)?;
    }
    Ok(v)
}

/// Memoized next-token queries, optionally transformed per node.
#[derive(Clone)]
struct Scorer<L> {
    lm: L,
    transform: Option<SamplerConfig>,
    memo: FxHashMap<Vec<TokenId>, Arc<[f64]>>,
    calls: usize,
}

impl<L: LanguageModel> Scorer<L> {
    fn next(&mut self, ctx: &[TokenId]) -> Result<Arc<[f64]>, Error> {
        if let Some(v) = self.memo.get(ctx) {
            return Ok(v.clone());
        }
        self.calls += 1;
        let mut v = self.lm.next_logprobs(ctx)?;
        if v.len() != self.lm.vocab_size() + 1 {
            return Err(Error::Config(format!("model returned {} logprobs for a vocabulary of {}", v.len(), self.lm.vocab_size())));
        }
        if let Some(cfg) = &self.transform {
            v = apply_transform(cfg, &v)?;
        }
        let v: Arc<[f64]> = v.into();
        self.memo.insert(ctx.to_vec(), v.clone());
        Ok(v)
    }

    /// Log-probability of `trunk`, reusing `known[i] = lp(trunk[..i])`.
    fn trunk_lp(&mut self, trunk: &[TokenId], known: &[f64]) -> Result<f64, Error> {
        let k = known.len() - 1;
        let mut lp = known[k];
        if k < trunk.len() {
            let mut ctx = Vec::with_capacity(trunk.len() + 1);
            ctx.push(BOS);
            ctx.extend_from_slice(trunk);
            for i in k..trunk.len() {
                lp += self.next(&ctx[..=i])?[trunk[i] as usize];
            }
        }
        Ok(lp)
    }

    /// Per-leaf log-probabilities of `trunk ++ path`. Leaves come sorted, so
    /// siblings are adjacent and share one query.
    fn leaf_lps(&mut self, v: &Vct, leaves: &[Leaf], known: &[f64]) -> Result<Vec<f64>, Error> {
        let base = self.trunk_lp(v.trunk(), known)?;
        let mut ctx = vec![BOS];
        ctx.extend_from_slice(v.trunk());
        let n = ctx.len();
        let mut out = Vec::with_capacity(leaves.len());
        let mut head: Option<(&[TokenId], f64, Arc<[f64]>)> = None;
        for leaf in leaves {
            let Some((&last, h)) = leaf.path.split_last() else {
                out.push(base);
                continue;
            };
            if head.as_ref().map_or(true, |x| x.0 != h) {
                let mut lp = base;
                ctx.truncate(n);
                for &t in h {
                    lp += self.next(&ctx)?[t as usize];
                    ctx.push(t);
                }
                head = Some((h, lp, self.next(&ctx)?));
            }
            let (_, lp, d) = head.as_ref().unwrap();
            out.push(lp + d[last as usize]);
        }
        Ok(out)
    }

    fn mass(&mut self, v: &Vct, known: &[f64]) -> Result<f64, Error> {
        let leaves = v.leaves();
        Ok(log_sum_exp(&self.leaf_lps(v, &leaves, known)?))
    }
}

/// One byte-level session: a covering tree over the text so far plus a
/// memoized view of the model.
#[derive(Clone)]
pub struct ByteSampler<'t, L> {
    vct: Vct<'t>,
    scorer: Scorer<L>,
    specials: bool,
    /// `known[i]` is the log-probability of the first `i` trunk tokens.
    known: Vec<f64>,
}

impl<'t, L: LanguageModel> ByteSampler<'t, L> {
    pub fn new(tk: &'t Tokenizer, lm: L) -> Self {
        ByteSampler { vct: Vct::new(tk), scorer: Scorer { lm, transform: None, memo: FxHashMap::default(), calls: 0 }, specials: false, known: vec![0.0] }
    }

    /// Applies `cfg` to every next-token vector when its level is
    /// [`Level::Token`]; a byte-level config leaves the model untouched.
    pub fn configured(mut self, cfg: &SamplerConfig) -> Result<Self, Error> {
        cfg.validate()?;
        self.scorer.transform = (cfg.level == Level::Token && !(cfg.is_identity() && cfg.temperature != 0.0)).then(|| cfg.clone());
        self.scorer.memo.clear();
        Ok(self)
    }

    /// Offer special tokens as events at exact token boundaries.
    pub fn with_specials(mut self, on: bool) -> Self {
        self.specials = on;
        self
    }

    pub fn vct(&self) -> &Vct<'t> {
        &self.vct
    }

    pub fn tokenizer(&self) -> &'t Tokenizer {
        self.vct.tokenizer()
    }

    pub fn lm(&self) -> &L {
        &self.scorer.lm
    }

    /// Distinct model queries so far.
    pub fn lm_calls(&self) -> usize {
        self.scorer.calls
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Result<(), Error> {
        self.vct.feed(bytes)?;
        self.sync()
    }

    pub fn feed_special(&mut self, id: TokenId) -> Result<(), Error> {
        self.vct.feed_special(id)?;
        self.sync()
    }

    fn sync(&mut self) -> Result<(), Error> {
        let trunk = self.vct.trunk();
        let mut ctx = vec![BOS];
        ctx.extend_from_slice(trunk);
        for i in self.known.len() - 1..trunk.len() {
            let lp = self.known[i] + self.scorer.next(&ctx[..=i])?[trunk[i] as usize];
            self.known.push(lp);
        }
        Ok(())
    }

    /// Log-probability that a generated sequence starts with the bytes fed
    /// so far.
    pub fn prefix_logprob(&mut self) -> Result<f64, Error> {
        self.scorer.mass(&self.vct, &self.known)
    }

    /// Current leaves with their log-probabilities (token-level transform
    /// included).
    pub fn leaf_masses(&mut self) -> Result<Vec<(Leaf, f64)>, Error> {
        let leaves = self.vct.leaves();
        if leaves.is_empty() {
            return Err(Error::DeadTree(self.vct.consumed()));
        }
        let lps = self.scorer.leaf_lps(&self.vct, &leaves, &self.known)?;
        Ok(leaves.into_iter().zip(lps).collect())
    }

    pub fn next_byte_distribution(&mut self) -> Result<ByteDistribution, Error> {
        let tk = self.vct.tokenizer();
        let specials: Vec<TokenId> = if self.specials { tk.specials().to_vec() } else { Vec::new() };
        let mut raw = vec![f64::NEG_INFINITY; 257 + specials.len()];
        for b in tk.alphabet() {
            let mut next = self.vct.clone();
            match next.feed_byte(b) {
                Ok(_) => raw[b as usize] = self.scorer.mass(&next, &self.known)?,
                Err(Error::DeadTree(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let leaves: Vec<Leaf> = self.vct.leaves().into_iter().filter(|l| l.is_exact() && self.vct.is_complete(&l.path)).collect();
        let lps = self.scorer.leaf_lps(&self.vct, &leaves, &self.known)?;
        let eos = self.scorer.lm.eos();
        let mut ctx = vec![BOS];
        ctx.extend_from_slice(self.vct.trunk());
        let n = ctx.len();
        for (leaf, lp) in leaves.iter().zip(lps) {
            ctx.truncate(n);
            ctx.extend_from_slice(&leaf.path);
            let d = self.scorer.next(&ctx)?;
            raw[END] = log_sum_exp(&[raw[END], lp + d[eos]]);
            for (i, &s) in specials.iter().enumerate() {
                raw[257 + i] = log_sum_exp(&[raw[257 + i], lp + d[s as usize]]);
            }
        }
        let dist = ByteDistribution::from_raw(raw, specials)?;
        if !dist.total.is_finite() {
            return Err(Error::DeadTree(self.vct.consumed()));
        }
        Ok(dist)
    }

    /// Feeds back up to `n` sampled bytes; stops early at end-of-text.
    /// A sampled special token is fed as a special and contributes its text.
    pub fn sample_bytes(&mut self, n: usize, cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<Vec<u8>, Error> {
        let mut out = Vec::new();
        while out.len() < n {
            let mut d = self.next_byte_distribution()?;
            if cfg.level == Level::Byte {
                d = d.transformed(cfg)?;
            }
            match d.sample(rng)? {
                Event::Byte(b) => {
                    self.feed(&[b])?;
                    out.push(b);
                }
                Event::End => break,
                Event::Special(id) => {
                    self.feed_special(id)?;
                    out.extend_from_slice(self.tokenizer().token_bytes(id));
                }
            }
        }
        Ok(out)
    }

    /// Picks one leaf in proportion to its (transformed) mass, then samples
    /// tokens until end-of-sequence or `max_new` tokens. Returns the whole
    /// token sequence, BOS excluded.
    pub fn sample_completion(&mut self, cfg: &SamplerConfig, rng: &mut impl Rng, max_new: usize) -> Result<Vec<TokenId>, Error> {
        let leaves = self.leaf_masses()?;
        let mut masses: Vec<f64> = leaves.iter().map(|x| x.1).collect();
        masses = if cfg.level == Level::Byte { apply_transform(cfg, &masses)? } else { normalized(masses)? };
        let chosen = pick(&masses, rng);
        let mut ctx = vec![BOS];
        ctx.extend_from_slice(self.vct.trunk());
        ctx.extend_from_slice(&leaves[chosen].0.path);
        let eos = self.scorer.lm.eos();
        for _ in 0..max_new {
            let mut d = self.scorer.next(&ctx)?.to_vec();
            if self.scorer.transform.is_none() {
                d = apply_transform(cfg, &d)?;
            }
            let t = pick(&d, rng);
            if t == eos {
                break;
            }
            ctx.push(t as TokenId);
        }
        Ok(ctx.split_off(1))
    }
}

fn normalized(mut v: Vec<f64>) -> Result<Vec<f64>, Error> {
    normalize_log(&mut v)?;
    Ok(v)
}

/// Index drawn from normalized log-probabilities.
fn pick(logp: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in logp.iter().enumerate() {
        if x == f64::NEG_INFINITY {
            continue;
        }
        acc += x.exp();
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Log-probability that a sequence from `lm` decodes to text starting with
/// `prompt`. Zero for the empty prompt.
pub fn prefix_logprob<L: LanguageModel>(lm: L, tk: &Tokenizer, prompt: &[u8]) -> Result<f64, Error> {
    let mut s = ByteSampler::new(tk, lm);
    s.feed(prompt)?;
    s.prefix_logprob()
}

pub fn next_byte_distribution<L: LanguageModel>(lm: L, tk: &Tokenizer, prompt: &[u8]) -> Result<ByteDistribution, Error> {
    let mut s = ByteSampler::new(tk, lm);
    s.feed(prompt)?;
    s.next_byte_distribution()
}

pub fn sample_bytes<L: LanguageModel>(lm: L, tk: &Tokenizer, prompt: &[u8], n: usize, cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<Vec<u8>, Error> {
    let mut s = ByteSampler::new(tk, lm).configured(cfg)?;
    s.feed(prompt)?;
    s.sample_bytes(n, cfg, rng)
}

pub fn sample_completion<L: LanguageModel>(
    lm: L,
    tk: &Tokenizer,
    prompt: &[u8],
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
    max_new: usize,
) -> Result<Vec<TokenId>, Error> {
    let mut s = ByteSampler::new(tk, lm).configured(cfg)?;
    s.feed(prompt)?;
    s.sample_completion(cfg, rng, max_new)
}

#[derive(Clone, Debug, PartialEq)]
pub enum CompositeMode {
    /// Probability-space average with these weights.
    Ensemble(Vec<f64>),
    /// Members are base, expert, anti-expert.
    Proxy,
}

/// Several models, each with its own tokenizer and tree, driven over one
/// shared byte history. Special-token events are not offered.
#[derive(Clone)]
pub struct Composite<'t, L> {
    members: Vec<ByteSampler<'t, L>>,
    mode: CompositeMode,
    /// Members that gave the history zero probability.
    dead: Vec<bool>,
}

impl<'t, L: LanguageModel> Composite<'t, L> {
    pub fn ensemble(members: Vec<ByteSampler<'t, L>>, weights: Vec<f64>) -> Result<Self, Error> {
        if members.is_empty() || weights.len() != members.len() {
            return Err(Error::Config(format!("{} weights for {} models", weights.len(), members.len())));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("ensemble weights must be positive and sum to 1".into()));
        }
        Ok(Composite { dead: vec![false; members.len()], members, mode: CompositeMode::Ensemble(weights) })
    }

    pub fn uniform(members: Vec<ByteSampler<'t, L>>) -> Result<Self, Error> {
        let n = members.len().max(1);
        Composite::ensemble(members, vec![1.0 / n as f64; n])
    }

    pub fn proxy(base: ByteSampler<'t, L>, expert: ByteSampler<'t, L>, anti: ByteSampler<'t, L>) -> Self {
        Composite { members: vec![base, expert, anti], mode: CompositeMode::Proxy, dead: vec![false; 3] }
    }

    pub fn mode(&self) -> &CompositeMode {
        &self.mode
    }

    pub fn members(&self) -> &[ByteSampler<'t, L>] {
        &self.members
    }

    pub fn lm_calls(&self) -> usize {
        self.members.iter().map(|m| m.lm_calls()).sum()
    }

    /// Whether member `i` still gives the history positive probability.
    pub fn is_alive(&self, i: usize) -> bool {
        !self.dead[i]
    }

    /// Feeds every live member. A member that cannot produce the bytes
    /// drops out; it is an error only when no member survives.
    pub fn feed(&mut self, bytes: &[u8]) -> Result<(), Error> {
        for (m, dead) in self.members.iter_mut().zip(&mut self.dead) {
            if *dead {
                continue;
            }
            match m.feed(bytes) {
                Ok(()) => {}
                Err(Error::DeadTree(_)) => *dead = true,
                Err(e) => return Err(e),
            }
        }
        if self.dead.iter().all(|&d| d) {
            return Err(Error::DeadTree(self.members[0].vct.consumed()));
        }
        Ok(())
    }

    pub fn next_byte_distribution(&mut self) -> Result<ByteDistribution, Error> {
        let mut dists = Vec::with_capacity(self.members.len());
        for (m, dead) in self.members.iter_mut().zip(&mut self.dead) {
            if !*dead {
                match m.with_specials_off().next_byte_distribution() {
                    Ok(d) if d.total.is_finite() => {
                        dists.push(Some(d.normalized()));
                        continue;
                    }
                    Ok(_) | Err(Error::DeadTree(_)) => *dead = true,
                    Err(e) => return Err(e),
                }
            }
            dists.push(None);
        }
        let row = |d: &Option<ByteDistribution>, i: usize| d.as_ref().map_or(f64::NEG_INFINITY, |d| d.raw[i]);
        let raw: Vec<f64> = match &self.mode {
            CompositeMode::Ensemble(w) => {
                // weights renormalized over the live members
                let live: f64 = w.iter().zip(&dists).filter(|(_, d)| d.is_some()).map(|(w, _)| w).sum();
                (0..257)
                    .map(|i| {
                        let terms: Vec<f64> = dists.iter().zip(w).map(|(d, w)| (w / live).ln() + row(d, i)).collect();
                        log_sum_exp(&terms)
                    })
                    .collect()
            }
            CompositeMode::Proxy => (0..257)
                .map(|i| {
                    let (b, e, a) = (row(&dists[0], i), row(&dists[1], i), row(&dists[2], i));
                    // identical expert and anti-expert cancel even at zero mass
                    let shift = if e == a { 0.0 } else { e - a };
                    let x = b + shift;
                    if x.is_finite() {
                        x
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect(),
        };
        let d = ByteDistribution::from_raw(raw, Vec::new())?;
        if !d.total.is_finite() {
            return Err(Error::DeadTree(self.members[0].vct.consumed()));
        }
        Ok(d.normalized())
    }

    pub fn sample_bytes(&mut self, n: usize, cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<Vec<u8>, Error> {
        cfg.validate()?;
        let mut out = Vec::new();
        while out.len() < n {
            let d = self.next_byte_distribution()?.transformed(cfg)?;
            match d.sample(rng)? {
                Event::Byte(b) => {
                    self.feed(&[b])?;
                    out.push(b);
                }
                _ => break,
            }
        }
        Ok(out)
    }
}

impl<'t, L> ByteSampler<'t, L> {
    fn with_specials_off(&mut self) -> &mut Self {
        self.specials = false;
        self
    }
}

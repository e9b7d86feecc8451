//! Randomized differential suites: each engine answer is compared with a
//! brute-force reference from [`crate::oracle`] on random toy instances.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::oracle::{
    brute_prefix_prob, enumerate_valid_coverings, heap_encode_text, random_text, random_toy_tokenizer, toy_instance, RawBpe, ToyRules,
    ToyTokenizerSpec,
};
use crate::sampler::{ByteSampler, Event};
use crate::validity::is_pair_valid;
use crate::vct::{stream_encode, Vct};

const HORIZON: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Pair check against the encode-decode fixpoint, every pair of each toy.
    Pairs,
    /// Tree leaves against enumerated coverings.
    Coverings,
    /// Streaming emissions against batch encoding under random chunkings.
    Streaming,
    /// Prefix probability against enumeration.
    Prefix,
    /// Stepwise next-byte log-probabilities against prefix differences.
    Chain,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Pairs, Suite::Coverings, Suite::Streaming, Suite::Prefix, Suite::Chain];

    /// Cases at scale 1.
    pub fn base_cases(self) -> usize {
        match self {
            Suite::Pairs => 200,
            Suite::Coverings => 500,
            Suite::Streaming => 200,
            Suite::Prefix => 300,
            Suite::Chain => 100,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Pairs => "pairs",
            Suite::Coverings => "coverings",
            Suite::Streaming => "streaming",
            Suite::Prefix => "prefix",
            Suite::Chain => "chain",
        }
    }
}

/// Deliberate breakage, so a run can show that the suites catch it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// The pair check answers "valid" for every pair.
    PairsAlwaysValid,
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub scale: f64,
    pub seed: u64,
    pub jobs: usize,
    pub fault: Fault,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { scale: 1.0, seed: 0, jobs: 1, fault: Fault::None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub seconds: f64,
    /// First failure with the case seed that reproduces it.
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

pub fn case_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64)
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> SuiteReport {
    let n = (suite.base_cases() as f64 * cfg.scale.max(0.0)).ceil() as usize;
    let t0 = Instant::now();
    let jobs = cfg.jobs.max(1).min(n.max(1));
    let results: Vec<(usize, Option<String>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                s.spawn(move || {
                    let mut fails = 0;
                    let mut first = None;
                    for i in (j..n).step_by(jobs) {
                        let seed = case_seed(cfg.seed, i);
                        if let Err(msg) = run_case(suite, seed, cfg.fault) {
                            fails += 1;
                            first.get_or_insert_with(|| format!("case seed {seed}: {msg}"));
                        }
                    }
                    (fails, first)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite worker panicked")).collect()
    });
    let failures = results.iter().map(|r| r.0).sum();
    let first_failure = results.into_iter().find_map(|r| r.1);
    SuiteReport { suite: suite.name(), cases: n, failures, seconds: t0.elapsed().as_secs_f64(), first_failure }
}

pub fn run_case(suite: Suite, seed: u64, fault: Fault) -> Result<(), String> {
    match suite {
        Suite::Pairs => pairs_case(seed, fault),
        Suite::Coverings => coverings_case(seed),
        Suite::Streaming => streaming_case(seed),
        Suite::Prefix => prefix_case(seed),
        Suite::Chain => chain_case(seed),
    }
}

fn random_spec(rng: &mut ChaCha8Rng, seed: u64) -> ToyTokenizerSpec {
    let rules = [ToyRules::None, ToyRules::Gpt2, ToyRules::Cl100k][rng.gen_range(0..3)];
    ToyTokenizerSpec { alphabet: rng.gen_range(2..=8), merges: rng.gen_range(1..=40), rules, ..ToyTokenizerSpec::new(seed) }
}

fn pairs_case(seed: u64, fault: Fault) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tk = random_toy_tokenizer(&random_spec(&mut rng, seed));
    let raw = RawBpe::of(&tk);
    let n = tk.vocab_size() as u32;
    for a in 0..n {
        for b in 0..n {
            let fast = fault == Fault::PairsAlwaysValid || is_pair_valid(&tk, a, b);
            let joined = [tk.token_bytes(a), tk.token_bytes(b)].concat();
            let truth = heap_encode_text(&tk, &raw, &joined) == [a, b];
            if fast != truth {
                return Err(format!("pair ({a}, {b}) {:?}: check says {fast}, fixpoint says {truth}", String::from_utf8_lossy(&joined)));
            }
        }
    }
    Ok(())
}

fn coverings_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tk = random_toy_tokenizer(&random_spec(&mut rng, seed));
    let n = rng.gen_range(0..=12);
    let p = random_text(&mut rng, &tk, n);
    let mut v = Vct::new(&tk);
    v.feed(&p).map_err(|e| e.to_string())?;
    let got: std::collections::BTreeSet<Vec<u32>> = v.leaves().into_iter().map(|l| [v.trunk(), &l.path[..]].concat()).collect();
    let want = enumerate_valid_coverings(&p, &tk);
    if got != want {
        return Err(format!("prompt {:?}: tree {got:?} vs enumeration {want:?}", String::from_utf8_lossy(&p)));
    }
    Ok(())
}

fn streaming_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tk = random_toy_tokenizer(&random_spec(&mut rng, seed));
    let n = rng.gen_range(0..=200);
    let text = random_text(&mut rng, &tk, n);
    let chunks: Vec<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..=9)).collect();
    let got = stream_encode(&tk, &text, &chunks).map_err(|e| e.to_string())?;
    let want = tk.encode(&text);
    if got != want {
        return Err(format!("text {:?} chunks {chunks:?}: stream {got:?} vs batch {want:?}", String::from_utf8_lossy(&text)));
    }
    Ok(())
}

fn prompt_from(rng: &mut ChaCha8Rng, texts: &[Vec<u8>], alphabet: &[u8]) -> Vec<u8> {
    if rng.gen_bool(0.8) {
        let t = &texts[rng.gen_range(0..texts.len())];
        t[..rng.gen_range(0..=t.len().min(6))].to_vec()
    } else {
        (0..rng.gen_range(1..=4)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
    }
}

fn prefix_case(seed: u64) -> Result<(), String> {
    let toy = toy_instance(seed, HORIZON);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = prompt_from(&mut rng, &toy.texts, &toy.tk.alphabet());
    let got = crate::sampler::prefix_logprob(&toy.lm, &toy.tk, &p).map_err(|e| e.to_string())?.exp();
    let want = brute_prefix_prob(&toy.lm, &toy.tk, &p, HORIZON + 1);
    if !close(got, want, 1e-9) {
        return Err(format!("prompt {:?}: tree {got:e} vs enumeration {want:e}", String::from_utf8_lossy(&p)));
    }
    Ok(())
}

fn chain_case(seed: u64) -> Result<(), String> {
    let toy = toy_instance(seed, HORIZON);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts: Vec<&Vec<u8>> = toy.texts.iter().filter(|t| toy.tk.encode(t).len() <= HORIZON).collect();
    let Some(&t) = texts.get(rng.gen_range(0..texts.len().max(1))) else {
        return Ok(());
    };
    let (p, q) = t.split_at(rng.gen_range(0..=t.len()));
    let mut s = ByteSampler::new(&toy.tk, &toy.lm);
    let err = |e: crate::Error| e.to_string();
    s.feed(p).map_err(err)?;
    let start = s.prefix_logprob().map_err(err)?;
    let mut acc = 0.0;
    for &b in q {
        acc += s.next_byte_distribution().map_err(err)?.logprob(Event::Byte(b));
        s.feed(&[b]).map_err(err)?;
    }
    let end = s.prefix_logprob().map_err(err)?;
    if (start + acc - end).abs() > 1e-9 * end.abs().max(1.0) {
        return Err(format!("split {:?} | {:?}: {start} + {acc} != {end}", String::from_utf8_lossy(p), String::from_utf8_lossy(q)));
    }
    Ok(())
}

/// Relative closeness that treats equal values (zero, `-inf`) exactly.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scale_passes_and_fault_is_caught() {
        let cfg = VerifyConfig { scale: 0.05, seed: 3, jobs: 2, ..Default::default() };
        for s in Suite::ALL {
            let r = run_suite(s, &cfg);
            assert!(r.passed(), "{:?}", r);
            assert!(r.cases > 0);
        }
        let broken = VerifyConfig { fault: Fault::PairsAlwaysValid, ..cfg };
        let r = run_suite(Suite::Pairs, &broken);
        assert!(!r.passed());
        assert!(r.first_failure.unwrap().contains("case seed"));
        let none = VerifyConfig { scale: 0.0, ..Default::default() };
        assert_eq!(run_suite(Suite::Coverings, &none).cases, 0);
    }
}

mod common;

use bytevct::oracle::brute_prefix_prob;
use bytevct::sampler::{ByteSampler, Event};
use common::{close, toy_instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: usize = 6;

fn prompt_from(rng: &mut ChaCha8Rng, texts: &[Vec<u8>], alphabet: &[u8]) -> Vec<u8> {
    if rng.gen_bool(0.8) {
        let t = &texts[rng.gen_range(0..texts.len())];
        t[..rng.gen_range(0..=t.len().min(6))].to_vec()
    } else {
        (0..rng.gen_range(1..=4)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
    }
}

#[test]
fn prefix_mass_matches_enumeration() {
    let mut cases = 0;
    for seed in 0..80u64 {
        let (tk, lm, texts) = toy_instance(seed, H);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let p = prompt_from(&mut rng, &texts, &tk.alphabet());
            let got = bytevct::sampler::prefix_logprob(&lm, &tk, &p).unwrap().exp();
            let want = brute_prefix_prob(&lm, &tk, &p, H + 1);
            assert!(close(got, want, 1e-9), "seed {seed} prompt {:?}: {got} vs {want}", String::from_utf8_lossy(&p));
            cases += 1;
        }
    }
    assert!(cases >= 300);
}

#[test]
fn next_byte_matches_enumerated_ratios() {
    for seed in 100..140u64 {
        let (tk, lm, texts) = toy_instance(seed, H);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = prompt_from(&mut rng, &texts, &tk.alphabet());
        let base = brute_prefix_prob(&lm, &tk, &p, H + 1);
        if base == 0.0 {
            continue;
        }
        let mut s = ByteSampler::new(&tk, &lm);
        s.feed(&p).unwrap();
        let d = s.next_byte_distribution().unwrap();
        let mut sum = 0.0;
        for b in tk.alphabet() {
            let q = [&p[..], &[b]].concat();
            let want = brute_prefix_prob(&lm, &tk, &q, H + 1) / base;
            assert!(close(d.prob(Event::Byte(b)), want, 1e-9), "seed {seed} byte {b}");
            sum += want;
        }
        assert!(close(d.prob(Event::End), 1.0 - sum, 1e-9) || (1.0 - sum).abs() < 1e-12, "seed {seed} end");
    }
}

#[test]
fn stepwise_logprobs_telescope() {
    for seed in 200..230u64 {
        let (tk, lm, texts) = toy_instance(seed, H);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // texts whose encoding exceeds the horizon carry no mass
        let texts: Vec<&Vec<u8>> = texts.iter().filter(|t| tk.encode(t).len() <= H).collect();
        for _ in 0..10 {
            let t = texts[rng.gen_range(0..texts.len())];
            let cut = rng.gen_range(0..=t.len());
            let (p, q) = t.split_at(cut);
            let mut s = ByteSampler::new(&tk, &lm);
            s.feed(p).unwrap();
            let start = s.prefix_logprob().unwrap();
            let mut acc = 0.0;
            for &b in q {
                acc += s.next_byte_distribution().unwrap().logprob(Event::Byte(b));
                s.feed(&[b]).unwrap();
            }
            let end = s.prefix_logprob().unwrap();
            assert!((start + acc - end).abs() <= 1e-9 * end.abs().max(1.0), "seed {seed}: {start} + {acc} vs {end}");
        }
    }
}

#[test]
fn completions_follow_byte_conditional() {
    let tk = bytevct::tokenizer::load_tokenizer_file(common::fixture("toy.tokenizer.json")).unwrap();
    let lm = bytevct::lm::TabularLM::load(common::fixture("toy.table.json")).unwrap();
    let want = brute_prefix_prob(&lm, &tk, b"abcd", 8) / brute_prefix_prob(&lm, &tk, b"abc", 8);
    let mut s = ByteSampler::new(&tk, &lm);
    s.feed(b"abc").unwrap();
    let cfg = bytevct::sampler::SamplerConfig { seed: 9, ..Default::default() };
    let mut rng = cfg.rng();
    let n = 20_000;
    let mut hits = 0;
    for _ in 0..n {
        let seq = s.clone().sample_completion(&cfg, &mut rng, 4).unwrap();
        let text = tk.decode(&seq).unwrap();
        assert!(text == b"abc" || text == b"abcd", "{text:?}");
        hits += (text == b"abcd") as usize;
    }
    let freq = hits as f64 / n as f64;
    let sd = (want * (1.0 - want) / n as f64).sqrt();
    assert!((freq - want).abs() < 4.0 * sd, "frequency {freq} vs {want}");
}

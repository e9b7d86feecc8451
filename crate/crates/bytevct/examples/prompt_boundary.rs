//! The prompt boundary problem on a four-letter toy.
//!
//! "abc" tokenizes as the single token `abc`, but the model also produces
//! `ab|cd`. Conditioning the token model on `abc` nearly rules out a
//! following "d"; conditioning on bytes does not.

use bytevct::lm::{LanguageModel, TabularLM, BOS};
use bytevct::sampler::{ByteSampler, Event, SamplerConfig};
use bytevct::tokenizer::{Tokenizer, TokenizerParts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = ["a", "b", "c", "d", "ab", "cd", "abc"].iter().map(|s| s.as_bytes().to_vec()).collect();
    let tk = Tokenizer::from_parts(TokenizerParts { vocab, merges: vec![(0, 1), (2, 3), (4, 2)], ..Default::default() })?;
    let row = |pairs: &[(usize, f64)]| {
        let mut v = vec![f64::NEG_INFINITY; 8];
        for &(i, p) in pairs {
            v[i] = p.ln();
        }
        v
    };
    let eos = 7;
    let mut lm = TabularLM::new(7, 4, Some(row(&[(eos, 1.0)])))?;
    lm.set(vec![], row(&[(4, 0.3), (6, 0.7)]))?;
    lm.set(vec![4], row(&[(5, 1.0)]))?;
    lm.set(vec![6], row(&[(eos, 0.99), (3, 0.01)]))?;

    let ctx = [&[BOS][..], &tk.encode(b"abc")].concat();
    let naive = lm.next_logprobs(&ctx)?[3].exp();
    let mut s = ByteSampler::new(&tk, &lm);
    s.feed(b"abc")?;
    let dist = s.next_byte_distribution()?;
    println!("token-level P(d | abc) = {naive:.4}");
    println!("byte-level  P(d | abc) = {:.4}", dist.prob(Event::Byte(b'd')));
    println!("byte-level  P(end | abc) = {:.4}", dist.prob(Event::End));

    // completions sampled from the byte-conditioned model
    let cfg = SamplerConfig { seed: 1, ..Default::default() };
    let mut rng = cfg.rng();
    let mut abcd = 0;
    for _ in 0..1000 {
        let seq = s.clone().sample_completion(&cfg, &mut rng, 4)?;
        abcd += (tk.decode(&seq)? == b"abcd") as usize;
    }
    println!("{abcd}/1000 sampled completions are \"abcd\"");
    Ok(())
}

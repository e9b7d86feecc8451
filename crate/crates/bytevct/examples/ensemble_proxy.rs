//! Combining byte-level models that use different tokenizers: a weighted
//! ensemble and a proxy-tuned model (base + expert - anti-expert).

use bytevct::oracle::{toy_instance, valid_supported_lm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use bytevct::sampler::{ByteDistribution, ByteSampler, Composite, Event, SamplerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // three toys over possibly different alphabets and merge lists
    let toys: Vec<_> = (0..3).map(|k| toy_instance(100 + k, 6)).collect();
    let members = || toys.iter().map(|t| ByteSampler::new(&t.tk, &t.lm)).collect::<Vec<_>>();
    let cfg = SamplerConfig { seed: 3, ..Default::default() };

    let mut ens = Composite::ensemble(members(), vec![0.5, 0.3, 0.2])?;
    show("ensemble", &ens.next_byte_distribution()?);
    println!("ensemble sample: {:?}", String::from_utf8_lossy(&ens.sample_bytes(6, &cfg, &mut cfg.rng())?));

    // proxy tuning needs overlapping support, so all three share a tokenizer
    let toy = &toys[0];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let expert = valid_supported_lm(&mut rng, &toy.tk, &toy.texts, 6);
    let anti = valid_supported_lm(&mut rng, &toy.tk, &toy.texts, 6);
    let mut proxy =
        Composite::proxy(ByteSampler::new(&toy.tk, &toy.lm), ByteSampler::new(&toy.tk, &expert), ByteSampler::new(&toy.tk, &anti));
    show("proxy", &proxy.next_byte_distribution()?);
    println!("proxy sample: {:?}", String::from_utf8_lossy(&proxy.sample_bytes(6, &cfg, &mut cfg.rng())?));
    Ok(())
}

fn show(name: &str, d: &ByteDistribution) {
    let parts: Vec<String> = d
        .support()
        .into_iter()
        .map(|(e, lp)| match e {
            Event::Byte(b) => format!("{:?} {:.3}", b as char, lp.exp()),
            _ => format!("<end> {:.3}", lp.exp()),
        })
        .collect();
    println!("{name} next byte: {}", parts.join(", "));
}

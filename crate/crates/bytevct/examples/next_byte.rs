//! Next-byte distributions and byte-by-byte generation from a token model.

use bytevct::oracle::toy_instance;
use bytevct::sampler::{ByteSampler, Event, SamplerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = toy_instance(11, 6);
    let prompt = &toy.texts[0][..toy.texts[0].len().min(2)];
    let mut s = ByteSampler::new(&toy.tk, &toy.lm);
    s.feed(prompt)?;
    println!("prompt {:?}", String::from_utf8_lossy(prompt));

    let dist = s.next_byte_distribution()?;
    for (e, lp) in dist.support() {
        let label = match e {
            Event::Byte(b) => format!("{:?}", b as char),
            Event::End => "<end>".into(),
            Event::Special(t) => format!("<special {t}>"),
        };
        println!("  {label:<8} {:.6}", lp.exp());
    }

    let cfg = SamplerConfig { seed: 42, ..Default::default() };
    let mut rng = cfg.rng();
    for _ in 0..5 {
        let out = s.clone().sample_bytes(8, &cfg, &mut rng)?;
        println!("  -> {:?}", String::from_utf8_lossy(&out));
    }
    println!("{} model calls", s.lm_calls());
    Ok(())
}

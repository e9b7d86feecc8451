//! Temperature, top-k and top-p, applied either to every token distribution
//! or to the derived byte distribution.

use bytevct::oracle::toy_instance;
use bytevct::sampler::{ByteSampler, Level, SamplerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = toy_instance(5, 6);
    let configs = [
        ("identity", SamplerConfig::default()),
        ("greedy", SamplerConfig::greedy()),
        ("t=2.0", SamplerConfig { temperature: 2.0, ..Default::default() }),
        ("top-k 2", SamplerConfig { top_k: Some(2), ..Default::default() }),
        ("top-p 0.6", SamplerConfig { top_p: Some(0.6), ..Default::default() }),
        ("top-p 0.6 / token", SamplerConfig { top_p: Some(0.6), level: Level::Token, ..Default::default() }),
    ];
    for (name, cfg) in configs {
        let mut s = ByteSampler::new(&toy.tk, &toy.lm).configured(&cfg)?;
        let dist = s.next_byte_distribution()?;
        // byte-level transforms happen at sampling time
        let dist = if cfg.level == Level::Byte { dist.transformed(&cfg)? } else { dist };
        let probs: Vec<String> = dist.support().iter().map(|(e, lp)| format!("{e:?}={:.3}", lp.exp())).collect();
        let mut rng = cfg.rng();
        let text = s.sample_bytes(10, &cfg, &mut rng)?;
        println!("{name:<18} {:<60} {:?}", probs.join(" "), String::from_utf8_lossy(&text));
    }
    Ok(())
}

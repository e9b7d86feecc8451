//! Probability that a model's output starts with a given byte string,
//! checked against explicit enumeration on a toy model.

use bytevct::oracle::{brute_prefix_prob, toy_instance};
use bytevct::sampler::prefix_logprob;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = toy_instance(7, 6);
    println!("alphabet {:?}, {} tokens", String::from_utf8_lossy(&toy.tk.alphabet()), toy.tk.vocab_size());
    // texts longer than the table horizon have no mass
    for text in toy.texts.iter().filter(|t| toy.tk.encode(t).len() <= 6).take(6) {
        for cut in [text.len() / 2, text.len()] {
            let p = &text[..cut];
            let tree = prefix_logprob(&toy.lm, &toy.tk, p)?.exp();
            let brute = brute_prefix_prob(&toy.lm, &toy.tk, p, 7);
            println!("{:<10} tree {tree:.10}  enumerated {brute:.10}", format!("{:?}", String::from_utf8_lossy(p)));
        }
    }
    Ok(())
}

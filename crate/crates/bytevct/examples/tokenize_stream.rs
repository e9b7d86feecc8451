//! Streaming tokenization: feed a real tokenizer a few bytes at a time and
//! print each token as soon as it can no longer change.
//!
//! cargo run --example tokenize_stream -- "Hello world, 12345 times"

use bytevct::tokenizer::load_tokenizer_file;
use bytevct::vct::Vct;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/cl100k.tokenizer.json.gz");
    let tk = load_tokenizer_file(path)?;
    let text = std::env::args().nth(1).unwrap_or_else(|| "Hello world, 12345 times over.".into());

    let mut tree = Vct::new(&tk);
    let mut streamed = Vec::new();
    for chunk in text.as_bytes().chunks(3) {
        let out = tree.feed(chunk)?;
        let shown: Vec<String> = out.iter().map(|&t| format!("{t}:{:?}", tk.display(t))).collect();
        println!("{:>8?} -> [{}]", String::from_utf8_lossy(chunk), shown.join(", "));
        streamed.extend(out);
    }
    streamed.extend(tree.finish()?);

    let batch = tk.encode(text.as_bytes());
    println!("stream {streamed:?}");
    println!("batch  {batch:?}");
    assert_eq!(streamed, batch);
    Ok(())
}

//! The tree of valid coverings behind a prompt that ends mid-token.

use bytevct::tokenizer::load_tokenizer_file;
use bytevct::vct::Vct;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/cl100k.tokenizer.json.gz");
    let tk = load_tokenizer_file(path)?;
    let prompt = std::env::args().nth(1).unwrap_or_else(|| "This is a tes".into());

    let mut tree = Vct::new(&tk);
    tree.feed(prompt.as_bytes())?;
    print!("{}", tree.dump());

    // every leaf decodes to the prompt plus (maybe) an overhang
    for leaf in tree.leaves() {
        let seq = [tree.trunk(), &leaf.path[..]].concat();
        let text = tk.decode(&seq)?;
        println!("{:<40} overhang {:?}", format!("{:?}", leaf.path), String::from_utf8_lossy(&leaf.overhang));
        assert!(text.starts_with(prompt.as_bytes()));
    }
    Ok(())
}

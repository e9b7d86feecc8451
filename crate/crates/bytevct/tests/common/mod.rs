#![allow(dead_code)]

use std::io::Read;
use std::path::PathBuf;

use bytevct::tokenizer::{load_tokenizer_file, Tokenizer};

pub const REF_BYTES: usize = 256 * 1024;
pub const VARIANTS: [&str; 4] = ["cl100k", "gpt2", "r2l", "disordered"];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn gunzip(name: &str) -> Vec<u8> {
    let raw = std::fs::read(fixture(name)).unwrap();
    let mut out = Vec::new();
    flate2::read::GzDecoder::new(&raw[..]).read_to_end(&mut out).unwrap();
    out
}

pub fn corpus() -> Vec<u8> {
    gunzip("corpus.txt.gz")
}

/// The prefix the reference ids were computed on: the first 256 KiB with
/// invalid UTF-8 dropped.
pub fn reference_text() -> Vec<u8> {
    let c = corpus();
    let head = &c[..REF_BYTES.min(c.len())];
    let mut out = Vec::with_capacity(head.len());
    for chunk in head.utf8_chunks() {
        out.extend_from_slice(chunk.valid().as_bytes());
    }
    out
}

pub fn reference_ids(variant: &str) -> Vec<u32> {
    gunzip(&format!("{variant}.ref.u32.gz"))
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

pub fn tokenizer_path(variant: &str) -> PathBuf {
    match variant {
        "cl100k" | "disordered" => fixture(&format!("{variant}.tokenizer.json.gz")),
        _ => fixture(&format!("{variant}.overlay.json")),
    }
}

pub fn load(variant: &str) -> Tokenizer {
    load_tokenizer_file(tokenizer_path(variant)).unwrap()
}

pub fn toy_instance(seed: u64, horizon: usize) -> (Tokenizer, bytevct::lm::TabularLM, Vec<Vec<u8>>) {
    let t = bytevct::oracle::toy_instance(seed, horizon);
    (t.tk, t.lm, t.texts)
}

/// |a - b| small relative to the larger magnitude, with zero and `-inf`
/// treated exactly.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

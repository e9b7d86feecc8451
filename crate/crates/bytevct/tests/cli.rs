use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

mod common;

fn run(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_bytevct"))
        .args(args)
        .env_remove("BYTEVCT_TOKENIZER_DIR")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn records(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn toy_args<'a>(sub: &'a str, tk: &'a str, table: &'a str) -> Vec<&'a str> {
    vec!["--format", "json", sub, "-t", tk, "--lm", table]
}

fn toy_paths() -> (String, String) {
    let tk = common::fixture("toy.tokenizer.json").display().to_string();
    let table = format!("tabular:{}", common::fixture("toy.table.json").display());
    (tk, table)
}

#[test]
fn tokenize_matches_library_and_streams_identically() {
    let tk_path = common::tokenizer_path("cl100k").display().to_string();
    let text = "Hello world, 12345 times.\n  Again?";
    let o = run(&["tokenize", "-t", &tk_path, text], b"");
    assert!(o.status.success());
    let ids: Vec<u32> = stdout(&o).split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(ids, common::load("cl100k").encode(text.as_bytes()));

    let o = run(&["tokenize", "-t", &tk_path, "--stream", "--chunk", "2", "--stdin"], text.as_bytes());
    assert!(o.status.success());
    let streamed: Vec<u32> = stdout(&o).split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(streamed, ids);
}

#[test]
fn empty_input_is_not_an_error() {
    let tk_path = common::tokenizer_path("gpt2").display().to_string();
    let o = run(&["tokenize", "-t", &tk_path], b"");
    assert!(o.status.success());
    assert!(stdout(&o).trim().is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["tokenize", "-t", "/nonexistent/tokenizer.json", "x"], b"").status.code(), Some(2));
    assert_eq!(run(&["no-such-command"], b"").status.code(), Some(2));
    let (tk, table) = toy_paths();
    // top-p outside (0, 1] is a usage error
    let o = run(&["sample", "-t", &tk, "--lm", &table, "--top-p", "1.5", "ab"], b"");
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify", "--scale", "0.02", "--suite", "pairs", "--inject-fault"], b"");
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["verify", "--scale", "0.02"], b"");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn prefix_prob_on_toy_fixture() {
    let (tk, table) = toy_paths();
    // "abcd" is only reachable through ab|cd
    let o = run(&[toy_args("prefix-prob", &tk, &table), vec!["abcd"]].concat(), b"");
    assert!(o.status.success());
    let r = &records(&o)[0];
    assert_eq!(r["kind"], "prefix_prob");
    assert!((r["prob"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    let o = run(&[toy_args("prefix-prob", &tk, &table), vec!["abc"]].concat(), b"");
    assert!((records(&o)[0]["prob"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    // impossible prompts report zero, written as a null log-probability
    let o = run(&[toy_args("prefix-prob", &tk, &table), vec!["ba"]].concat(), b"");
    let r = &records(&o)[0];
    assert!(r["logprob"].is_null());
    assert_eq!(r["prob"].as_f64(), Some(0.0));
}

#[test]
fn seeded_byte_sampling_is_golden() {
    let (tk, table) = toy_paths();
    let outputs: Vec<String> = (0..6)
        .map(|seed| {
            let seed = seed.to_string();
            let o = run(&[toy_args("sample", &tk, &table), vec!["--seed", &seed, "-n", "4", "ab"]].concat(), b"");
            assert!(o.status.success());
            records(&o)[0]["output"].as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(outputs, ["c", "cd", "c", "cd", "cd", "c"]);
}

#[test]
fn vct_dump_shows_branches() {
    let tk_path = common::tokenizer_path("cl100k").display().to_string();
    let o = run(&["--format", "json", "vct", "-t", &tk_path, "This is a tes"], b"");
    assert!(o.status.success());
    let r = &records(&o)[0];
    assert_eq!(r["kind"], "vct");
    let o = run(&["vct", "-t", &tk_path, "This is a tes"], b"");
    assert!(stdout(&o).contains("trunk"));
}

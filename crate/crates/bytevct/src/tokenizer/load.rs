//! Loader for the byte-level BPE subset of `tokenizer.json`.

use std::io::Read;
use std::path::Path;

use serde_json::Value;

use super::bytelevel::units_to_bytes;
use super::{AddedToken, Tokenizer, TokenizerParts};
use crate::pretok::RuleSet;
use crate::{Error, TokenId};

/// Parses a tokenizer definition from JSON text.
pub fn load_tokenizer(json: &str) -> Result<Tokenizer, Error> {
    load_tokenizer_value(&serde_json::from_str(json)?)
}

/// Reads a definition from disk; `.gz` files are decompressed. A document of
/// the form `{"base": NAME, ...}` is an overlay: `NAME.tokenizer.json[.gz]`
/// from the same directory with `pre_tokenizer`, `added_tokens` and
/// `ignore_merges` replaced where present.
pub fn load_tokenizer_file(path: impl AsRef<Path>) -> Result<Tokenizer, Error> {
    let path = path.as_ref();
    let mut doc = read_json(path)?;
    if let Some(base) = doc.get("base").and_then(Value::as_str) {
        let dir = path.parent().unwrap_or(Path::new("."));
        let plain = dir.join(format!("{base}.tokenizer.json"));
        let gz = dir.join(format!("{base}.tokenizer.json.gz"));
        let mut full = read_json(if plain.exists() { &plain } else { &gz })?;
        for key in ["pre_tokenizer", "added_tokens"] {
            if let Some(v) = doc.get_mut(key) {
                full[key] = v.take();
            }
        }
        if let Some(v) = doc.get("ignore_merges") {
            full["model"]["ignore_merges"] = v.clone();
        }
        doc = full;
    }
    load_tokenizer_value(&doc)
}

fn read_json(path: &Path) -> Result<Value, Error> {
    let raw = std::fs::read(path)?;
    let text = if path.extension().is_some_and(|e| e == "gz") {
        let mut s = String::new();
        flate2::read::GzDecoder::new(&raw[..]).read_to_string(&mut s)?;
        s
    } else {
        String::from_utf8(raw).map_err(|e| Error::Malformed(e.to_string()))?
    };
    Ok(serde_json::from_str(&text)?)
}

fn unsupported(what: &str, v: &Value) -> Error {
    Error::Unsupported(format!("{what} = {v}"))
}

pub fn load_tokenizer_value(doc: &Value) -> Result<Tokenizer, Error> {
    let model = doc.get("model").ok_or_else(|| Error::Malformed("missing model".into()))?;
    match model.get("type").and_then(Value::as_str) {
        Some("BPE") | None => {}
        Some(other) => return Err(Error::UnsupportedModel(other.to_string())),
    }
    for key in ["dropout", "continuing_subword_prefix", "end_of_word_suffix"] {
        if let Some(v) = model.get(key).filter(|v| !v.is_null()) {
            return Err(unsupported(&format!("model.{key}"), v));
        }
    }
    if let Some(v) = model.get("byte_fallback").filter(|v| v.as_bool() == Some(true)) {
        return Err(unsupported("model.byte_fallback", v));
    }
    if let Some(v) = doc.get("normalizer").filter(|v| !v.is_null()) {
        return Err(unsupported("normalizer", v));
    }
    let rules = pre_tokenizer_rules(doc.get("pre_tokenizer").unwrap_or(&Value::Null))?;

    let vocab_obj = model
        .get("vocab")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::Malformed("model.vocab must be an object".into()))?;
    let mut vocab: Vec<Vec<u8>> = vec![Vec::new(); vocab_obj.len()];
    let mut lookup = rustc_hash::FxHashMap::default();
    for (units, id) in vocab_obj {
        let id = id
            .as_u64()
            .filter(|&i| (i as usize) < vocab.len())
            .ok_or_else(|| Error::Malformed(format!("vocab id for {units:?} is not dense")))? as usize;
        let bytes = units_to_bytes(units)
            .ok_or_else(|| Error::Malformed(format!("vocab entry {units:?} is not byte-level")))?;
        if !vocab[id].is_empty() {
            return Err(Error::Malformed(format!("vocab id {id} assigned twice")));
        }
        vocab[id] = bytes;
        lookup.insert(units.as_str(), id as TokenId);
    }

    let merges_v = model
        .get("merges")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Malformed("model.merges must be an array".into()))?;
    let mut merges = Vec::with_capacity(merges_v.len());
    for m in merges_v {
        let parts: Vec<&str> = match m {
            Value::String(s) => s.split(' ').collect(),
            Value::Array(a) => a.iter().map(|x| x.as_str().unwrap_or("\u{0}")).collect(),
            _ => Vec::new(),
        };
        if parts.len() != 2 && parts.len() != 3 {
            return Err(Error::MalformedMerge(m.to_string()));
        }
        let id = |s: &str| lookup.get(s).copied().ok_or_else(|| Error::MalformedMerge(format!("{m}: {s:?} not in vocab")));
        let (l, r) = (id(parts[0])?, id(parts[1])?);
        if parts.len() == 3 {
            let t = id(parts[2])?;
            if vocab[t as usize] != [vocab[l as usize].as_slice(), vocab[r as usize].as_slice()].concat() {
                return Err(Error::MalformedMerge(format!("{m}: result bytes differ")));
            }
        }
        merges.push((l, r));
    }

    let mut added = Vec::new();
    if let Some(list) = doc.get("added_tokens").and_then(Value::as_array) {
        for a in list {
            for flag in ["single_word", "lstrip", "rstrip"] {
                if let Some(v) = a.get(flag).filter(|v| v.as_bool() == Some(true)) {
                    return Err(unsupported(&format!("added token {flag}"), v));
                }
            }
            let id = a.get("id").and_then(Value::as_u64).ok_or_else(|| Error::Malformed(format!("added token {a}")))?;
            let content =
                a.get("content").and_then(Value::as_str).ok_or_else(|| Error::Malformed(format!("added token {a}")))?;
            if content.is_empty() {
                return Err(Error::Malformed("empty added token".into()));
            }
            added.push(AddedToken {
                id: id as TokenId,
                content: content.as_bytes().to_vec(),
                special: a.get("special").and_then(Value::as_bool).unwrap_or(false),
            });
        }
    }
    let ignore_merges = model.get("ignore_merges").and_then(Value::as_bool).unwrap_or(false);
    Tokenizer::from_parts(TokenizerParts { vocab, merges, rules, added, ignore_merges })
}

fn pre_tokenizer_rules(pt: &Value) -> Result<RuleSet, Error> {
    let ty = pt.get("type").and_then(Value::as_str).unwrap_or("");
    match ty {
        "ByteLevel" => {
            byte_level_ok(pt)?;
            if pt.get("use_regex").and_then(Value::as_bool).unwrap_or(true) {
                Ok(RuleSet::gpt2())
            } else {
                Ok(RuleSet::none())
            }
        }
        "Sequence" => {
            let list = pt.get("pretokenizers").and_then(Value::as_array).cloned().unwrap_or_default();
            let mut rules = None;
            let mut saw_byte_level = false;
            for p in &list {
                match p.get("type").and_then(Value::as_str) {
                    Some("Split") if rules.is_none() && !saw_byte_level => rules = Some(split_rules(p)?),
                    Some("ByteLevel") if !saw_byte_level => {
                        byte_level_ok(p)?;
                        if p.get("use_regex").and_then(Value::as_bool).unwrap_or(true) {
                            if rules.is_some() {
                                return Err(Error::UnsupportedPretokenizer("Split followed by a regex ByteLevel".into()));
                            }
                            rules = Some(RuleSet::gpt2());
                        }
                        saw_byte_level = true;
                    }
                    _ => return Err(Error::UnsupportedPretokenizer(p.to_string())),
                }
            }
            if !saw_byte_level {
                return Err(Error::UnsupportedPretokenizer("sequence lacks a ByteLevel step".into()));
            }
            Ok(rules.unwrap_or_else(RuleSet::none))
        }
        _ => Err(Error::UnsupportedPretokenizer(pt.to_string())),
    }
}

fn byte_level_ok(p: &Value) -> Result<(), Error> {
    match p.get("add_prefix_space") {
        Some(v) if v.as_bool() == Some(true) => Err(Error::UnsupportedPretokenizer("ByteLevel add_prefix_space".into())),
        _ => Ok(()),
    }
}

fn split_rules(p: &Value) -> Result<RuleSet, Error> {
    let pattern = p
        .get("pattern")
        .and_then(|x| x.get("Regex"))
        .and_then(Value::as_str)
        .ok_or_else(|| Error::UnsupportedPretokenizer(format!("split pattern {}", p.get("pattern").unwrap_or(&Value::Null))))?;
    if p.get("behavior").and_then(Value::as_str) != Some("Isolated") {
        return Err(Error::UnsupportedPretokenizer("split behavior other than Isolated".into()));
    }
    if p.get("invert").and_then(Value::as_bool) == Some(true) {
        return Err(Error::UnsupportedPretokenizer("inverted split".into()));
    }
    RuleSet::from_regex(pattern)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_other_models() {
        let e = load_tokenizer(r#"{"model":{"type":"Unigram","vocab":[]}}"#).unwrap_err();
        assert!(matches!(e, Error::UnsupportedModel(m) if m == "Unigram"));
    }

    #[test]
    fn rejects_unknown_merge_inputs() {
        let doc = r#"{"pre_tokenizer":{"type":"ByteLevel","add_prefix_space":false,"use_regex":true},
            "model":{"type":"BPE","vocab":{"a":0,"b":1},"merges":["a c"]}}"#;
        assert!(matches!(load_tokenizer(doc), Err(Error::MalformedMerge(_))));
    }

    #[test]
    fn small_document() {
        let doc = r#"{"pre_tokenizer":{"type":"ByteLevel","add_prefix_space":false,"use_regex":true},
            "added_tokens":[{"id":5,"content":"<s>","special":true}],
            "model":{"type":"BPE","vocab":{"a":0,"b":1,"Ġ":2,"ab":3,"Ġab":4},"merges":["a b",["Ġ","ab"]]}}"#;
        let t = load_tokenizer(doc).unwrap();
        assert_eq!(t.vocab_size(), 6);
        assert_eq!(t.encode(b"ab ab"), vec![3, 4]);
        assert!(t.is_special(5));
        assert_eq!(t.decode(&[3, 5, 2]).unwrap(), b"ab ");
    }
}

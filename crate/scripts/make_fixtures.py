#!/usr/bin/env python3
"""Regenerate the test fixtures under crates/bytevct/fixtures.

Needs the `tokenizers` package and a local cl100k_base.tiktoken ranks file
(pass its path as the first argument). Output is deterministic.
"""
import base64
import glob
import gzip
import hashlib
import json
import os
import random
import struct
import sys

from tokenizers import Tokenizer

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "crates", "bytevct", "fixtures")

CL100K = r"""(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+"""
GPT2 = r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
R2L = r"""(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}(?=(?:\p{N}{3})*(?:\P{N}|$))| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+"""

REF_BYTES = 256 * 1024


def bytes_to_unicode():
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return {b: chr(c) for b, c in zip(bs, cs)}


B2U = bytes_to_unicode()


def unit(bs):
    return "".join(B2U[b] for b in bs)


def load_ranks(path):
    ranks = {}
    with open(path) as f:
        for line in f:
            if line.strip():
                tok, r = line.split()
                ranks[base64.b64decode(tok)] = int(r)
    return ranks


def split_token(ranks, token, max_rank):
    parts = [bytes([b]) for b in token]
    while True:
        best = None
        for i in range(len(parts) - 1):
            r = ranks.get(parts[i] + parts[i + 1])
            if r is not None and r < max_rank and (best is None or r < best[0]):
                best = (r, i)
        if best is None:
            return parts
        i = best[1]
        parts = parts[:i] + [parts[i] + parts[i + 1]] + parts[i + 2:]


def derive_merges(ranks):
    merges = []
    for tok, r in sorted(ranks.items(), key=lambda kv: kv[1]):
        if len(tok) == 1:
            continue
        parts = split_token(ranks, tok, r)
        if len(parts) == 2:
            merges.append((parts[0], parts[1]))
    return merges


def document(ranks, merges, pattern, added=(), ignore_merges=False):
    vocab = {unit(t): i for t, i in ranks.items()}
    n = len(vocab)
    added_tokens = [
        {"id": n, "content": "<|endoftext|>", "single_word": False, "lstrip": False,
         "rstrip": False, "normalized": False, "special": True},
    ]
    next_id = n + 1
    for content in added:
        tid = vocab.get(content)  # the reference loader looks content up as units
        if tid is None:
            tid = next_id
            next_id += 1
        added_tokens.append({"id": tid, "content": content, "single_word": False, "lstrip": False,
                             "rstrip": False, "normalized": True, "special": False})
    return {
        "version": "1.0",
        "truncation": None,
        "padding": None,
        "added_tokens": added_tokens,
        "normalizer": None,
        "pre_tokenizer": {
            "type": "Sequence",
            "pretokenizers": [
                {"type": "Split", "pattern": {"Regex": pattern}, "behavior": "Isolated", "invert": False},
                {"type": "ByteLevel", "add_prefix_space": False, "trim_offsets": True, "use_regex": False},
            ],
        },
        "post_processor": None,
        "decoder": {"type": "ByteLevel", "add_prefix_space": True, "trim_offsets": True, "use_regex": True},
        "model": {
            "type": "BPE",
            "dropout": None,
            "unk_token": None,
            "continuing_subword_prefix": None,
            "end_of_word_suffix": None,
            "fuse_unk": False,
            "byte_fallback": False,
            "ignore_merges": ignore_merges,
            "vocab": vocab,
            "merges": [[unit(a), unit(b)] for a, b in merges],
        },
    }


def disorder(ranks, merges, seed):
    """Out-of-order, duplicated and unreachable-producing edits of a clean list."""
    rng = random.Random(seed)
    by_result = {a + b: i for i, (a, b) in enumerate(merges)}
    out = list(merges)
    # relocate merges in front of the merges that form their inputs
    moved = 0
    for idx in rng.sample(range(len(merges)), 6000):
        a, b = merges[idx]
        deps = [by_result[x] for x in (a, b) if x in by_result]
        if not deps:
            continue
        out[idx] = None
        out.insert(rng.randrange(0, min(deps) + 1), (a, b))
        moved += 1
    out = [m for m in out if m is not None]
    # alternative forming merges for existing tokens
    pairs = set(out)
    dup = 0
    toks = [t for t in ranks if 3 <= len(t) <= 12]
    rng.shuffle(toks)
    for t in toks[:4000]:
        cut = rng.randrange(1, len(t))
        a, b = t[:cut], t[cut:]
        if a in ranks and b in ranks and (a, b) not in pairs:
            out.insert(rng.randrange(0, len(out) + 1), (a, b))
            pairs.add((a, b))
            dup += 1
    print(f"disordered list: {moved} relocated, {dup} alternative merges", file=sys.stderr)
    return out


def corpus(seed):
    parts = []

    def add(label, text, limit=None):
        if limit is not None:
            text = text[:limit]
        parts.append(text)
        print(f"corpus {label}: {len(text.encode())} bytes", file=sys.stderr)

    add("adversarial", adversarial(random.Random(seed), 80_000))

    seen = set()
    prose = []
    for p in sorted(glob.glob("/usr/share/gnupg/help*.txt")):
        b = open(p, "rb").read()
        h = hashlib.sha1(b).hexdigest()
        if h not in seen:
            seen.add(h)
            prose.append(b.decode("utf-8", "replace"))
    add("gnupg help", "\n".join(prose))

    js = "/usr/share/javascript/jquery-ui/ui/i18n/jquery-ui-i18n.js"
    if os.path.exists(js):
        add("jquery i18n", open(js, encoding="utf-8").read(), 90_000)

    py = []
    for name in ["textwrap", "difflib", "argparse", "email/_header_value_parser", "tokenize", "json/decoder",
                 "statistics", "fractions", "calendar", "locale"]:
        p = f"/usr/lib/python3.10/{name}.py"
        if os.path.exists(p):
            py.append(open(p, encoding="utf-8").read())
    add("python", "\n".join(py), 420_000)

    rs = []
    for p in sorted(glob.glob("/opt/cargo/registry/src/*/*/src/**/*.rs", recursive=True)):
        try:
            rs.append(open(p, encoding="utf-8").read())
        except Exception:
            pass
    add("rust", "\n".join(rs), 180_000)

    for p, n in [("/usr/local/lib/python3.10/dist-packages/sympy/printing/pretty/tests/test_pretty.py", 60_000),
                 ("/usr/local/lib/python3.10/dist-packages/rich/_emoji_codes.py", 30_000)]:
        if os.path.exists(p):
            add(os.path.basename(p), open(p, encoding="utf-8").read(), n)

    return "\n".join(parts)


def adversarial(rng, size):
    pieces = [
        lambda: "".join(rng.choice("0123456789") for _ in range(rng.randint(1, 14))),
        lambda: " " * rng.randint(1, 7),
        lambda: rng.choice(["\t", "\r\n", "\n", "\n\n", " \n", "\r", " ", "　", " ", "\u0085", "\x0b"]),
        lambda: rng.choice(["'s", "'S", "'ſ", "'ll", "'LL", "'Ve", "'re", "'d", "'m", "'t", "'", "''", "'x", "'lL"]),
        lambda: rng.choice(["don", "I", "we", "THEY", "it", "x", "straße", "été", "naïve",
                            "αβγ", "привет", "日本語",
                            "한국어", "مرحبا", "é", "Ⅳ",
                            "²", "٣٤"]),
        lambda: rng.choice(["...", "!!", "?", "(", ")", "{}", "->", "==", "//", "#", "$", "—", "¿"]),
        lambda: rng.choice(["\U0001f600", "\U0001f468‍\U0001f469‍\U0001f467", "❤️", "\U0001f1ef\U0001f1f5"]),
        lambda: rng.choice(["<|im_sep|>", "<|im_se", "http", "htt", "https://x.y", "    ", "     x", "\thttp"]),
        lambda: rng.choice(["Hello world", "Hello wor", "This is a test", "inductive hypothesis"]),
    ]
    out = []
    n = 0
    while n < size:
        s = rng.choice(pieces)()
        out.append(s)
        n += len(s.encode())
    return "".join(out)


def write_gz(path, data):
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            f.write(data)


def write_ids(path, ids):
    write_gz(path, struct.pack(f"<{len(ids)}I", *ids))


def main():
    ranks = load_ranks(sys.argv[1])
    merges = derive_merges(ranks)
    print(f"{len(ranks)} tokens, {len(merges)} merges", file=sys.stderr)
    os.makedirs(OUT, exist_ok=True)

    text = corpus(7)
    write_gz(os.path.join(OUT, "corpus.txt.gz"), text.encode())
    print(f"corpus total {len(text.encode())} bytes", file=sys.stderr)
    ref = text.encode()[:REF_BYTES].decode("utf-8", "ignore")

    variants = {
        "cl100k": document(ranks, merges, CL100K),
        "gpt2": document(ranks, merges, GPT2, added=("<|im_sep|>", "    ", "http")),
        "r2l": document(ranks, merges, R2L),
        "disordered": document(ranks, disorder(ranks, merges, 11), CL100K, ignore_merges=True),
    }
    for name, doc in variants.items():
        blob = json.dumps(doc, ensure_ascii=False).encode()
        if name in ("cl100k", "disordered"):
            write_gz(os.path.join(OUT, f"{name}.tokenizer.json.gz"), blob)
        else:
            # overlay on the cl100k document: only these two keys differ
            overlay = {"base": "cl100k", "pre_tokenizer": doc["pre_tokenizer"], "added_tokens": doc["added_tokens"]}
            with open(os.path.join(OUT, f"{name}.overlay.json"), "w") as f:
                json.dump(overlay, f, ensure_ascii=False, indent=1)
        tok = Tokenizer.from_str(blob.decode())
        ids = tok.encode(ref, add_special_tokens=False).ids
        write_ids(os.path.join(OUT, f"{name}.ref.u32.gz"), ids)
        print(f"{name}: {len(ids)} reference ids", file=sys.stderr)
        hello = tok.encode("Hello wor", add_special_tokens=False).ids
        print(f"{name}: Hello wor -> {hello}", file=sys.stderr)


if __name__ == "__main__":
    main()

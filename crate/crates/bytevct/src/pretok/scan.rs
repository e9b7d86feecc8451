//! Rule matching over a character view whose tail may be unknown.
//!
//! Known characters are tested directly. An unknown position holds a set of
//! representative characters (plus "end of text"); a test that the set cannot
//! answer uniformly returns a [`Branch`] and the caller splits the set and
//! restarts. Runs over fully known text never branch.

use std::sync::Mutex;

use rustc_hash::FxHashMap;

use super::chars::{class_of, decode, fold_eq, Ch, CharInfo, APOS, LET, NL, NUM, SPACE, WS};
use super::rules::{Align, Lead, Rule, RuleSet, CONTRACTIONS};
use crate::TokenId;

pub(crate) const END: u64 = 1 << 63;
pub(crate) const NO_LIMIT: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Pred {
    Letter,
    Number,
    Ws,
    Nl,
    Space,
    /// `[^\s\p{L}\p{N}]`
    Other,
    /// `[^\r\n\p{L}\p{N}]`
    NotNlLetterNum,
    Any,
    Is(char),
    IsCi(char),
}

fn eval(p: Pred, ch: Ch, class: u8) -> bool {
    match p {
        Pred::Letter => class & LET != 0,
        Pred::Number => class & NUM != 0,
        Pred::Ws => class & WS != 0,
        Pred::Nl => class & NL != 0,
        Pred::Space => class & SPACE != 0,
        Pred::Other => class & (WS | LET | NUM) == 0,
        Pred::NotNlLetterNum => class & (NL | LET | NUM) == 0,
        Pred::Any => true,
        Pred::Is(c) => ch == Ch::Char(c),
        Pred::IsCi(c) => matches!(ch, Ch::Char(x) if fold_eq(c, x)),
    }
}

const FIXED: [Pred; 8] = [
    Pred::Letter,
    Pred::Number,
    Pred::Ws,
    Pred::Nl,
    Pred::Space,
    Pred::Other,
    Pred::NotNlLetterNum,
    Pred::Any,
];

/// Representative characters standing in for every possible continuation
/// character. Two characters that agree on all predicates the rules and the
/// added-token matcher can ask are interchangeable, so one of each suffices.
pub(crate) struct Reps {
    chars: Vec<char>,
    classes: Vec<u8>,
    fixed: [u64; 8],
    /// Whether arbitrary Unicode may follow (byte-level alphabets).
    open: bool,
    completions: Mutex<FxHashMap<Vec<u8>, u64>>,
}

impl Reps {
    /// `alphabet`: bytes that have a base token. With all 256 present the
    /// continuation is arbitrary text; otherwise it is drawn from the (ASCII)
    /// alphabet itself.
    pub(crate) fn new(alphabet: &[u8], rules: &RuleSet, added: &[Vec<char>]) -> Self {
        let open = alphabet.len() == 256;
        let mut chars: Vec<char> = Vec::new();
        let push = |c: char, chars: &mut Vec<char>| {
            if !chars.contains(&c) {
                chars.push(c);
            }
        };
        if open {
            for c in [' ', '\t', '\n', '\r', '\'', '.', '0', 'a'] {
                push(c, &mut chars);
            }
            if rules.has_contractions() {
                for s in CONTRACTIONS {
                    for c in s.chars() {
                        push(c, &mut chars);
                        if rules.case_insensitive_contractions() {
                            push(c.to_ascii_uppercase(), &mut chars);
                        }
                    }
                }
                if rules.case_insensitive_contractions() {
                    push('\u{17f}', &mut chars);
                }
            }
            for a in added {
                for &c in a {
                    push(c, &mut chars);
                }
            }
        } else {
            for &b in alphabet {
                // toy alphabets are ASCII; anything else is simply not a
                // continuation candidate at character level
                if b < 0x80 {
                    push(b as char, &mut chars);
                }
            }
        }
        assert!(chars.len() < 63, "too many representative characters");
        let classes: Vec<u8> = chars.iter().map(|&c| class_of(Ch::Char(c))).collect();
        let mut fixed = [0u64; 8];
        for (k, p) in FIXED.iter().enumerate() {
            fixed[k] = Self::mask_of(&chars, &classes, *p);
        }
        Reps { chars, classes, fixed, open, completions: Mutex::new(FxHashMap::default()) }
    }

    fn mask_of(chars: &[char], classes: &[u8], p: Pred) -> u64 {
        let mut m = 0;
        for (i, (&c, &k)) in chars.iter().zip(classes).enumerate() {
            if eval(p, Ch::Char(c), k) {
                m |= 1 << i;
            }
        }
        m
    }

    pub(crate) fn all(&self) -> u64 {
        self.fixed[7]
    }

    fn mask(&self, p: Pred) -> u64 {
        match p {
            Pred::Letter => self.fixed[0],
            Pred::Number => self.fixed[1],
            Pred::Ws => self.fixed[2],
            Pred::Nl => self.fixed[3],
            Pred::Space => self.fixed[4],
            Pred::Other => self.fixed[5],
            Pred::NotNlLetterNum => self.fixed[6],
            Pred::Any => self.fixed[7],
            Pred::Is(_) | Pred::IsCi(_) => Self::mask_of(&self.chars, &self.classes, p),
        }
    }

    /// Representative index of an actual character.
    fn rep_of(&self, c: char) -> Option<usize> {
        if let Some(i) = self.chars.iter().position(|&r| r == c) {
            return Some(i);
        }
        if !self.open {
            return None;
        }
        let k = class_of(Ch::Char(c));
        let stand_in = if k & NL != 0 {
            '\n'
        } else if k & SPACE != 0 {
            ' '
        } else if k & WS != 0 {
            '\t'
        } else if k & LET != 0 {
            'a'
        } else if k & NUM != 0 {
            '0'
        } else if k & APOS != 0 {
            '\''
        } else {
            '.'
        };
        self.chars.iter().position(|&r| r == stand_in)
    }

    /// Representatives of the characters whose encoding starts with `pending`.
    pub(crate) fn completions(&self, pending: &[u8]) -> u64 {
        if let Some(&m) = self.completions.lock().unwrap().get(pending) {
            return m;
        }
        let mut m = 0u64;
        if self.open {
            let total = match pending[0] {
                0xC2..=0xDF => 2,
                0xE0..=0xEF => 3,
                _ => 4,
            };
            let missing = total - pending.len();
            let mut buf = [0u8; 4];
            buf[..pending.len()].copy_from_slice(pending);
            let count = 64usize.pow(missing as u32);
            for n in 0..count {
                let mut x = n;
                for k in 0..missing {
                    buf[pending.len() + k] = 0x80 | (x % 64) as u8;
                    x /= 64;
                }
                if let Ok(s) = std::str::from_utf8(&buf[..total]) {
                    if let Some(r) = self.rep_of(s.chars().next().unwrap()) {
                        m |= 1 << r;
                    }
                }
            }
        }
        self.completions.lock().unwrap().insert(pending.to_vec(), m);
        m
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Branch {
    pub pos: usize,
    pub mask: u64,
}

pub(crate) type R<T> = Result<T, Branch>;

pub(crate) struct View<'a> {
    pub known: &'a [CharInfo],
    pub masks: &'a [u64],
    pub reps: &'a Reps,
}

impl View<'_> {
    #[inline]
    fn test(&self, i: usize, limit: usize, p: Pred) -> R<bool> {
        if i >= limit {
            return Ok(false);
        }
        if let Some(ci) = self.known.get(i) {
            return Ok(eval(p, ci.ch, ci.class));
        }
        let j = i - self.known.len();
        if j >= self.masks.len() {
            return Ok(false);
        }
        for (k, &m) in self.masks[..j].iter().enumerate() {
            if m == END {
                return Ok(false);
            }
            if m & END != 0 {
                return Err(Branch { pos: k, mask: !END });
            }
        }
        let m = self.masks[j];
        let pm = self.reps.mask(p);
        if m & !pm == 0 {
            Ok(true)
        } else if m & pm == 0 {
            Ok(false)
        } else {
            Err(Branch { pos: j, mask: pm })
        }
    }

    fn exists(&self, i: usize, limit: usize) -> R<bool> {
        self.test(i, limit, Pred::Any)
    }

    fn run(&self, i: usize, limit: usize, p: Pred, cap: usize) -> R<usize> {
        let mut n = 0;
        while n < cap && self.test(i + n, limit, p)? {
            n += 1;
        }
        Ok(n)
    }

    /// Length in characters of the pretoken starting at `i`. Requires a
    /// character at `i`.
    pub(crate) fn match_at(&self, rules: &RuleSet, i: usize, limit: usize) -> R<usize> {
        if rules.rules.is_empty() {
            return self.run(i, limit, Pred::Any, usize::MAX);
        }
        for rule in &rules.rules {
            if let Some(n) = self.rule_at(*rule, i, limit)? {
                return Ok(n);
            }
        }
        // rule sets are checked for totality at construction
        debug_assert!(false, "no rule matched");
        Ok(1)
    }

    fn rule_at(&self, rule: Rule, i: usize, limit: usize) -> R<Option<usize>> {
        let t = |k: usize, p: Pred| self.test(k, limit, p);
        let run = |k: usize, p: Pred| self.run(k, limit, p, usize::MAX);
        Ok(match rule {
            Rule::Contractions { case_insensitive } => {
                if !t(i, Pred::Is('\''))? {
                    return Ok(None);
                }
                for s in CONTRACTIONS {
                    let mut ok = true;
                    for (k, c) in s.chars().enumerate() {
                        let p = if case_insensitive { Pred::IsCi(c) } else { Pred::Is(c) };
                        if !t(i + 1 + k, p)? {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        return Ok(Some(1 + s.len()));
                    }
                }
                None
            }
            Rule::Word { lead } => {
                let lead_pred = match lead {
                    Lead::Space => Pred::Space,
                    Lead::NonLetter => Pred::NotNlLetterNum,
                };
                if t(i, lead_pred)? && t(i + 1, Pred::Letter)? {
                    Some(1 + run(i + 1, Pred::Letter)?)
                } else if t(i, Pred::Letter)? {
                    Some(run(i, Pred::Letter)?)
                } else {
                    None
                }
            }
            Rule::Digits { group, align, leading_space } => {
                let digits = |k: usize| -> R<usize> {
                    match (group, align) {
                        (None, _) => run(k, Pred::Number),
                        (Some(g), Align::Left) => self.run(k, limit, Pred::Number, g),
                        (Some(g), Align::Right) => {
                            let total = run(k, Pred::Number)?;
                            let r = total % g;
                            Ok(if r == 0 { g.min(total) } else { r })
                        }
                    }
                };
                if leading_space && t(i, Pred::Space)? && t(i + 1, Pred::Number)? {
                    Some(1 + digits(i + 1)?)
                } else if t(i, Pred::Number)? {
                    Some(digits(i)?)
                } else {
                    None
                }
            }
            Rule::Punct { trailing_newlines } => {
                let n = if t(i, Pred::Space)? && t(i + 1, Pred::Other)? {
                    1 + run(i + 1, Pred::Other)?
                } else if t(i, Pred::Other)? {
                    run(i, Pred::Other)?
                } else {
                    return Ok(None);
                };
                if trailing_newlines {
                    Some(n + run(i + n, Pred::Nl)?)
                } else {
                    Some(n)
                }
            }
            Rule::NewlineRun => {
                let r = run(i, Pred::Ws)?;
                let mut found = None;
                for j in (i..i + r).rev() {
                    if t(j, Pred::Nl)? {
                        found = Some(j - i + 1);
                        break;
                    }
                }
                found
            }
            Rule::WhitespaceHoldBack => {
                let r = run(i, Pred::Ws)?;
                if r == 0 {
                    None
                } else if !self.exists(i + r, limit)? {
                    Some(r)
                } else if r >= 2 {
                    Some(r - 1)
                } else {
                    None
                }
            }
            Rule::Whitespace => {
                let r = run(i, Pred::Ws)?;
                (r > 0).then_some(r)
            }
        })
    }

    fn added_at(&self, tok: &AddedTok, s: usize) -> R<bool> {
        for (k, &c) in tok.chars.iter().enumerate() {
            if !self.test(s + k, NO_LIMIT, Pred::Is(c))? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct AddedTok {
    pub id: TokenId,
    pub chars: Vec<char>,
    pub bytes: Vec<u8>,
}

/// Non-special added tokens, longest first so the first hit at a start
/// position is the leftmost-longest match.
#[derive(Clone, Debug, Default)]
pub(crate) struct AddedSet {
    pub toks: Vec<AddedTok>,
}

impl AddedSet {
    pub(crate) fn new(mut toks: Vec<AddedTok>) -> Self {
        toks.sort_by(|a, b| b.bytes.len().cmp(&a.bytes.len()).then(a.bytes.cmp(&b.bytes)));
        AddedSet { toks }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.toks.is_empty()
    }

    pub(crate) fn max_chars(&self) -> usize {
        self.toks.iter().map(|t| t.chars.len()).max().unwrap_or(0)
    }

    /// Leftmost-longest match in plain bytes at or after `from`.
    pub(crate) fn find(&self, text: &[u8], from: usize) -> Option<(usize, &AddedTok)> {
        if self.toks.is_empty() {
            return None;
        }
        (from..text.len()).find_map(|i| {
            self.toks.iter().find(|t| text[i..].starts_with(&t.bytes)).map(|t| (i, t))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegKind {
    Text,
    Added(TokenId),
}

/// Pretoken structure of `K` under one class of continuations: every segment
/// starting before `|K|`, and whether the last of them ends exactly at `|K|`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome {
    pub starts: Vec<(usize, SegKind)>,
    pub end_exact: bool,
}

pub(crate) struct Scanner<'a> {
    pub rules: &'a RuleSet,
    pub added: &'a AddedSet,
    pub reps: &'a Reps,
    pub horizon: usize,
}

impl Scanner<'_> {
    /// All outcomes of `k` over every continuation (including none).
    pub(crate) fn project(&self, k: &[u8]) -> Vec<Outcome> {
        let d = decode(k, true);
        let mut out: Vec<Outcome> = Vec::new();
        let free = self.reps.all() | END;
        if d.pending > 0 {
            let tail = &k[k.len() - d.pending..];
            // world 1: the tail completes into one character
            let comp = self.reps.completions(tail);
            if comp != 0 {
                let mut masks = vec![free; self.horizon + 1];
                masks[0] = comp;
                self.explore(&d.chars, masks, k.len(), Some(k.len() - d.pending), &mut out);
            }
            // world 2: the tail never completes and is a run of bad bytes
            let mut known = d.chars.clone();
            for (n, &b) in tail.iter().enumerate() {
                known.push(CharInfo { ch: Ch::Bad(b), class: 0, start: k.len() - d.pending + n });
            }
            self.explore(&known, vec![free; self.horizon], k.len(), None, &mut out);
        } else {
            self.explore(&d.chars, vec![free; self.horizon], k.len(), None, &mut out);
        }
        out.sort();
        out.dedup();
        out
    }

    fn explore(&self, known: &[CharInfo], init: Vec<u64>, klen: usize, open_at: Option<usize>, out: &mut Vec<Outcome>) {
        let mut stack = vec![init];
        while let Some(masks) = stack.pop() {
            let v = View { known, masks: &masks, reps: self.reps };
            match self.run(&v, klen, open_at) {
                Ok(o) => {
                    if !out.contains(&o) {
                        out.push(o);
                    }
                }
                Err(b) => {
                    let m = masks[b.pos];
                    let (yes, no) = (m & b.mask, m & !b.mask);
                    if no != 0 {
                        let mut x = masks.clone();
                        x[b.pos] = no;
                        stack.push(x);
                    }
                    if yes != 0 {
                        let mut x = masks;
                        x[b.pos] = yes;
                        stack.push(x);
                    }
                }
            }
        }
    }

    fn run(&self, v: &View, klen: usize, open_at: Option<usize>) -> R<Outcome> {
        let n_known = v.known.len();
        // byte offset of character index; anything past the known text and
        // the completed tail character lies beyond |K|
        let at = |idx: usize| -> usize {
            if idx < n_known {
                v.known[idx].start
            } else if idx == n_known {
                open_at.unwrap_or(klen)
            } else {
                klen + 1
            }
        };
        let mut starts = Vec::new();
        let mut pos = 0;
        'outer: loop {
            if at(pos) >= klen || !v.exists(pos, NO_LIMIT)? {
                break;
            }
            let mut hit = None;
            if !self.added.is_empty() {
                'find: for s in pos..n_known {
                    for t in &self.added.toks {
                        if v.added_at(t, s)? {
                            hit = Some((s, t));
                            break 'find;
                        }
                    }
                }
            }
            let gap_end = hit.map_or(NO_LIMIT, |(s, _)| s);
            while pos < gap_end {
                if at(pos) >= klen || !v.exists(pos, gap_end)? {
                    break 'outer;
                }
                let n = v.match_at(self.rules, pos, gap_end)?;
                starts.push((at(pos), SegKind::Text));
                pos += n;
            }
            if let Some((_, t)) = hit {
                if at(pos) >= klen {
                    break;
                }
                starts.push((at(pos), SegKind::Added(t.id)));
                pos += t.chars.len();
            }
        }
        Ok(Outcome { starts, end_exact: at(pos) == klen })
    }
}

/// Pretoken boundaries of fully known text. Returns character start offsets
/// (byte positions) of each pretoken within `chars[from..to]`.
pub(crate) fn split_known(chars: &[CharInfo], rules: &RuleSet, reps: &Reps, from: usize, to: usize, out: &mut Vec<usize>) {
    let v = View { known: chars, masks: &[], reps };
    let mut pos = from;
    while pos < to {
        out.push(pos);
        let n = match v.match_at(rules, pos, to) {
            Ok(n) => n,
            Err(_) => unreachable!("known text never branches"),
        };
        pos += n;
    }
}

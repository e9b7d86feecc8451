use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lead {
    /// ` ?\p{L}+`
    Space,
    /// `[^\r\n\p{L}\p{N}]?\p{L}+`
    NonLetter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Align {
    Left,
    Right,
}

/// The supported alternatives. Each is a closed-form stand-in for one
/// branch of the regexes in common use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `'s|'t|'re|'ve|'m|'ll|'d`, optionally under `(?i:...)`.
    Contractions { case_insensitive: bool },
    Word { lead: Lead },
    /// Digit runs. `group: None` is unbounded (`\p{N}+`).
    Digits { group: Option<usize>, align: Align, leading_space: bool },
    /// ` ?[^\s\p{L}\p{N}]+`, optionally followed by `[\r\n]*`.
    Punct { trailing_newlines: bool },
    /// `\s*[\r\n]+`
    NewlineRun,
    /// `\s+(?!\S)`
    WhitespaceHoldBack,
    /// `\s+`
    Whitespace,
}

pub(crate) const CONTRACTIONS: [&str; 7] = ["s", "t", "re", "ve", "m", "ll", "d"];

/// Ordered alternatives, tried first-match at every position. An empty set
/// means the whole text is one pretoken.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

pub const GPT2_PATTERN: &str = r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";
pub const CL100K_PATTERN: &str = r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+";
pub const QWEN2_PATTERN: &str = r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+";
pub const RIGHT_ALIGNED_PATTERN: &str = r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}(?=(?:\p{N}{3})*(?:\P{N}|$))| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+";

impl RuleSet {
    pub fn none() -> Self {
        RuleSet { rules: Vec::new() }
    }

    pub fn gpt2() -> Self {
        Self::from_regex(GPT2_PATTERN).unwrap()
    }

    pub fn cl100k() -> Self {
        Self::from_regex(CL100K_PATTERN).unwrap()
    }

    pub fn qwen2() -> Self {
        Self::from_regex(QWEN2_PATTERN).unwrap()
    }

    pub fn right_aligned_digits() -> Self {
        Self::from_regex(RIGHT_ALIGNED_PATTERN).unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub(crate) fn case_insensitive_contractions(&self) -> bool {
        self.rules.iter().any(|r| matches!(r, Rule::Contractions { case_insensitive: true }))
    }

    pub(crate) fn has_contractions(&self) -> bool {
        self.rules.iter().any(|r| matches!(r, Rule::Contractions { .. }))
    }

    /// Maps a split regex onto rule classes, alternative by alternative.
    /// Anything outside the whitelist is rejected.
    pub fn from_regex(pattern: &str) -> Result<Self, Error> {
        let unsupported = |why: String| Error::UnsupportedPretokenizer(why);
        let mut rules = Vec::new();
        let alts = split_top_level(pattern);
        let mut i = 0;
        while i < alts.len() {
            let a = alts[i];
            // GPT-2 spells the contractions as seven separate alternatives
            if a == "'s" {
                let run: Vec<&str> = alts[i..].iter().take(7).copied().collect();
                let want: Vec<String> = CONTRACTIONS.iter().map(|s| format!("'{s}")).collect();
                if run.len() == 7 && run.iter().zip(&want).all(|(x, y)| *x == y) {
                    rules.push(Rule::Contractions { case_insensitive: false });
                    i += 7;
                    continue;
                }
                return Err(unsupported(format!("contraction list starting at alternative {i}")));
            }
            let rule = match a {
                r"(?i:'s|'t|'re|'ve|'m|'ll|'d)" => Rule::Contractions { case_insensitive: true },
                r" ?\p{L}+" => Rule::Word { lead: Lead::Space },
                r"[^\r\n\p{L}\p{N}]?\p{L}+" => Rule::Word { lead: Lead::NonLetter },
                r" ?\p{N}+" => Rule::Digits { group: None, align: Align::Left, leading_space: true },
                r"\p{N}+" => Rule::Digits { group: None, align: Align::Left, leading_space: false },
                r"\p{N}" => Rule::Digits { group: Some(1), align: Align::Left, leading_space: false },
                r"\p{N}{1,3}" => Rule::Digits { group: Some(3), align: Align::Left, leading_space: false },
                r"\p{N}{1,3}(?=(?:\p{N}{3})*(?:\P{N}|$))" => {
                    Rule::Digits { group: Some(3), align: Align::Right, leading_space: false }
                }
                r" ?[^\s\p{L}\p{N}]+" => Rule::Punct { trailing_newlines: false },
                r" ?[^\s\p{L}\p{N}]+[\r\n]*" => Rule::Punct { trailing_newlines: true },
                r"\s*[\r\n]+" => Rule::NewlineRun,
                r"\s+(?!\S)" => Rule::WhitespaceHoldBack,
                r"\s+" => Rule::Whitespace,
                other => return Err(unsupported(format!("regex alternative `{other}`"))),
            };
            rules.push(rule);
            i += 1;
        }
        let set = RuleSet { rules };
        set.check_total()?;
        Ok(set)
    }

    /// Every character must be claimed by some rule, otherwise the reference
    /// splitter would emit unmatched stretches that these rules cannot model.
    fn check_total(&self) -> Result<(), Error> {
        let has = |f: &dyn Fn(&Rule) -> bool| self.rules.iter().any(f);
        let letters = has(&|r| matches!(r, Rule::Word { .. }));
        let digits = has(&|r| matches!(r, Rule::Digits { .. }));
        let punct = has(&|r| matches!(r, Rule::Punct { .. }));
        let ws = has(&|r| matches!(r, Rule::Whitespace));
        if letters && digits && punct && ws {
            Ok(())
        } else {
            Err(Error::UnsupportedPretokenizer(
                "rule set does not cover letters, digits, punctuation and whitespace".into(),
            ))
        }
    }

}

fn split_top_level(p: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut class, mut esc, mut start) = (0i32, false, false, 0);
    for (i, c) in p.char_indices() {
        if esc {
            esc = false;
            continue;
        }
        match c {
            '\\' => esc = true,
            '[' if !class => class = true,
            ']' if class => class = false,
            '(' if !class => depth += 1,
            ')' if !class => depth -= 1,
            '|' if !class && depth == 0 => {
                out.push(&p[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&p[start..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_patterns_map() {
        assert_eq!(RuleSet::gpt2().rules.len(), 6);
        assert_eq!(RuleSet::cl100k().rules.len(), 7);
        assert_eq!(
            RuleSet::qwen2().rules[2],
            Rule::Digits { group: Some(1), align: Align::Left, leading_space: false }
        );
        assert!(RuleSet::right_aligned_digits()
            .rules
            .iter()
            .any(|r| matches!(r, Rule::Digits { group: Some(3), align: Align::Right, .. })));
    }

    #[test]
    fn foreign_regex_rejected() {
        assert!(RuleSet::from_regex(r"\w+|\s+").is_err());
        assert!(RuleSet::from_regex(r" ?\p{L}+|\s+").is_err());
    }

    #[test]
    fn splitter_respects_groups() {
        assert_eq!(split_top_level(r"(?i:a|b)|[|]|c"), vec![r"(?i:a|b)", "[|]", "c"]);
    }
}

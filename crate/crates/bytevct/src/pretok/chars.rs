use unicode_general_category::{get_general_category, GeneralCategory as G};

pub(crate) const WS: u8 = 1;
pub(crate) const LET: u8 = 2;
pub(crate) const NUM: u8 = 4;
pub(crate) const NL: u8 = 8;
pub(crate) const SPACE: u8 = 16;
pub(crate) const APOS: u8 = 32;

/// One scalar of the byte stream. Bytes that are not part of well-formed
/// UTF-8 each count as their own character and behave like punctuation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ch {
    Char(char),
    Bad(u8),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct CharInfo {
    pub ch: Ch,
    pub class: u8,
    /// Byte offset of the first byte, relative to the decoded slice.
    pub start: usize,
}

pub(crate) fn is_letter(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_alphabetic();
    }
    matches!(
        get_general_category(c),
        G::UppercaseLetter | G::LowercaseLetter | G::TitlecaseLetter | G::ModifierLetter | G::OtherLetter
    )
}

pub(crate) fn is_number(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_digit();
    }
    matches!(get_general_category(c), G::DecimalNumber | G::LetterNumber | G::OtherNumber)
}

pub(crate) fn class_of(ch: Ch) -> u8 {
    let c = match ch {
        Ch::Bad(_) => return 0,
        Ch::Char(c) => c,
    };
    let mut k = 0;
    if c.is_whitespace() {
        k |= WS;
        if c == '\r' || c == '\n' {
            k |= NL;
        }
        if c == ' ' {
            k |= SPACE;
        }
    } else if is_letter(c) {
        k |= LET;
    } else if is_number(c) {
        k |= NUM;
    } else if c == '\'' {
        k |= APOS;
    }
    k
}

/// Case-insensitive equality the way the reference regex engine folds the
/// contraction letters (`ſ` folds to `s`, the Kelvin sign to `k`).
pub(crate) fn fold_eq(pattern: char, c: char) -> bool {
    if c == pattern || c == pattern.to_ascii_uppercase() || c == pattern.to_ascii_lowercase() {
        return true;
    }
    matches!((pattern.to_ascii_lowercase(), c), ('s', '\u{17f}') | ('k', '\u{212a}'))
}

/// Decoding outcome for a byte slice.
pub(crate) struct Decoded {
    pub chars: Vec<CharInfo>,
    /// Trailing bytes that form a proper prefix of a UTF-8 sequence. Only
    /// reported when the caller asked to keep an open tail.
    pub pending: usize,
}

/// Splits `bytes` into characters. With `open_tail`, an incomplete sequence
/// at the very end is left out of `chars` and counted in `pending`.
pub(crate) fn decode(bytes: &[u8], open_tail: bool) -> Decoded {
    let mut chars = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b < 0x80 {
            let ch = Ch::Char(b as char);
            chars.push(CharInfo { ch, class: class_of(ch), start: i });
            i += 1;
            continue;
        }
        let want = match b {
            0xC2..=0xDF => 2,
            0xE0..=0xEF => 3,
            0xF0..=0xF4 => 4,
            _ => 0,
        };
        if want == 0 {
            chars.push(bad(b, i));
            i += 1;
            continue;
        }
        let end = (i + want).min(bytes.len());
        match std::str::from_utf8(&bytes[i..end]) {
            Ok(s) => {
                let c = s.chars().next().unwrap();
                let ch = Ch::Char(c);
                chars.push(CharInfo { ch, class: class_of(ch), start: i });
                i += want;
            }
            Err(e) => {
                if e.error_len().is_none() && end == bytes.len() && open_tail {
                    return Decoded { chars, pending: bytes.len() - i };
                }
                chars.push(bad(b, i));
                i += 1;
            }
        }
    }
    Decoded { chars, pending: 0 }
}

fn bad(b: u8, start: usize) -> CharInfo {
    CharInfo { ch: Ch::Bad(b), class: 0, start }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_bytes_are_single_chars() {
        let d = decode(b"a\xff\xe2\x82z", false);
        let kinds: Vec<_> = d.chars.iter().map(|c| c.ch).collect();
        assert_eq!(kinds, vec![Ch::Char('a'), Ch::Bad(0xff), Ch::Bad(0xe2), Ch::Bad(0x82), Ch::Char('z')]);
    }

    #[test]
    fn open_tail_is_pending() {
        let d = decode("ab€".as_bytes().split_at(4).0, true);
        assert_eq!(d.chars.len(), 2);
        assert_eq!(d.pending, 2);
        assert_eq!(decode(&[0xe2, 0x82], true).pending, 2);
        assert_eq!(decode(&[0x82], true).pending, 0);
    }

    #[test]
    fn classes() {
        assert_eq!(class_of(Ch::Char(' ')), WS | SPACE);
        assert_eq!(class_of(Ch::Char('\n')), WS | NL);
        assert_eq!(class_of(Ch::Char('\u{85}')), WS);
        assert_eq!(class_of(Ch::Char('\u{200b}')), 0);
        assert_eq!(class_of(Ch::Char('ſ')), LET);
        assert_eq!(class_of(Ch::Char('²')), NUM);
        assert!(fold_eq('s', 'ſ') && fold_eq('l', 'L') && !fold_eq('t', 's'));
    }
}

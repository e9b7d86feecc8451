//! The printable-unicode byte remapping used by byte-level tokenizer files.

use std::sync::OnceLock;

fn table() -> &'static ([char; 256], rustc_hash::FxHashMap<char, u8>) {
    static T: OnceLock<([char; 256], rustc_hash::FxHashMap<char, u8>)> = OnceLock::new();
    T.get_or_init(|| {
        let mut fwd = ['\0'; 256];
        let mut n = 0u32;
        for b in 0..=255u8 {
            let keep = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
            fwd[b as usize] = if keep {
                b as char
            } else {
                n += 1;
                char::from_u32(255 + n).unwrap()
            };
        }
        let inv = fwd.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        (fwd, inv)
    })
}

pub fn byte_to_unit(b: u8) -> char {
    table().0[b as usize]
}

pub fn unit_to_byte(c: char) -> Option<u8> {
    table().1.get(&c).copied()
}

/// Units string → raw bytes; `None` if any char is outside the map.
pub(crate) fn units_to_bytes(s: &str) -> Option<Vec<u8>> {
    s.chars().map(unit_to_byte).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_units() {
        assert_eq!(byte_to_unit(b' '), 'Ġ');
        assert_eq!(byte_to_unit(b'\n'), 'Ċ');
        assert_eq!(byte_to_unit(b'a'), 'a');
        for b in 0..=255u8 {
            assert_eq!(unit_to_byte(byte_to_unit(b)), Some(b));
        }
        assert_eq!(units_to_bytes("Ġwor").unwrap(), b" wor");
    }
}

/// Printable ASCII stays as is; backslash and everything else become `\\`
/// and `\xNN`.
pub fn escape_bytes(b: &[u8]) -> String {
    let mut s = String::with_capacity(b.len());
    for &c in b {
        match c {
            b'\\' => s.push_str("\\\\"),
            0x20..=0x7e => s.push(c as char),
            _ => s.push_str(&format!("\\x{c:02x}")),
        }
    }
    s
}

/// Inverse of [`escape_bytes`]; also accepts `\n`, `\t`, `\r`. Other text is
/// taken as its UTF-8 bytes.
pub fn unescape_bytes(s: &str) -> Result<Vec<u8>, String> {
    let src = s.as_bytes();
    let mut out = Vec::with_capacity(src.len());
    let mut i = 0;
    while i < src.len() {
        if src[i] != b'\\' {
            out.push(src[i]);
            i += 1;
            continue;
        }
        match src.get(i + 1) {
            Some(b'\\') => out.push(b'\\'),
            Some(b'n') => out.push(b'\n'),
            Some(b't') => out.push(b'\t'),
            Some(b'r') => out.push(b'\r'),
            Some(b'x') => {
                let hex = s.get(i + 2..i + 4).ok_or_else(|| format!("truncated \\x escape at {i}"))?;
                out.push(u8::from_str_radix(hex, 16).map_err(|_| format!("bad \\x escape at {i}"))?);
                i += 2;
            }
            _ => return Err(format!("unknown escape at {i}")),
        }
        i += 2;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let all: Vec<u8> = (0..=255).collect();
        assert_eq!(unescape_bytes(&escape_bytes(&all)).unwrap(), all);
        assert_eq!(unescape_bytes(r"a\x20b\n").unwrap(), b"a b\n");
        assert!(unescape_bytes(r"\x2").is_err());
    }
}

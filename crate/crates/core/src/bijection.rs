//! The GPT-2 ByteLevel byte ↔ printable-character table.
//!
//! Bytes that are already printable and not whitespace (`!`..=`~`,
//! `¡`..=`¬`, `®`..=`ÿ`) map to themselves. The remaining 68 bytes are
//! assigned, in ascending byte order, to consecutive code points starting at
//! U+0100. Space (0x20) therefore becomes `Ġ` (U+0120).

use alloc::string::String;

const fn is_direct(b: u8) -> bool {
    matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF)
}

const fn build_forward() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut shifted = 0u32;
    let mut b = 0usize;
    while b < 256 {
        let cp = if is_direct(b as u8) {
            b as u32
        } else {
            shifted += 1;
            255 + shifted
        };
        table[b] = match char::from_u32(cp) {
            Some(c) => c,
            None => panic!("bijection code point out of range"),
        };
        b += 1;
    }
    table
}

static FORWARD: [char; 256] = build_forward();

/// Highest code point in the image of the table (U+0100 + 67).
const MAX_IMAGE: u32 = 0x143;

const fn build_inverse() -> [i16; MAX_IMAGE as usize + 1] {
    let mut inv = [-1i16; MAX_IMAGE as usize + 1];
    let mut b = 0usize;
    while b < 256 {
        inv[FORWARD[b] as usize] = b as i16;
        b += 1;
    }
    inv
}

static INVERSE: [i16; MAX_IMAGE as usize + 1] = build_inverse();

/// Zero-sized handle to the canonical table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteBijection;

impl ByteBijection {
    /// Printable character for `byte`.
    #[inline]
    pub fn forward(self, byte: u8) -> char {
        FORWARD[byte as usize]
    }

    /// Byte for `c`, or `None` if `c` is outside the image.
    #[inline]
    pub fn inverse(self, c: char) -> Option<u8> {
        let cp = c as u32;
        if cp > MAX_IMAGE {
            return None;
        }
        let b = INVERSE[cp as usize];
        (b >= 0).then_some(b as u8)
    }

    /// Maps raw bytes into the printable alphabet, appending to `out`.
    pub fn encode_into(self, bytes: &[u8], out: &mut String) {
        out.reserve(bytes.len() * 2);
        for &b in bytes {
            out.push(self.forward(b));
        }
    }

    pub fn encode(self, bytes: &[u8]) -> String {
        let mut s = String::new();
        self.encode_into(bytes, &mut s);
        s
    }

    /// Maps a printable-alphabet string back to bytes. Fails on the first
    /// character outside the image.
    pub fn decode_into(self, s: &str, out: &mut alloc::vec::Vec<u8>) -> Result<(), char> {
        for c in s.chars() {
            out.push(self.inverse(c).ok_or(c)?);
        }
        Ok(())
    }

    pub fn decode(self, s: &str) -> Result<alloc::vec::Vec<u8>, char> {
        let mut out = alloc::vec::Vec::with_capacity(s.len());
        self.decode_into(s, &mut out)?;
        Ok(out)
    }

    /// True when every character of `s` is in the image.
    pub fn is_encoded(self, s: &str) -> bool {
        s.chars().all(|c| self.inverse(c).is_some())
    }
}

/// Shorthand for [`ByteBijection`]'s table.
pub fn bijection_map() -> ByteBijection {
    ByteBijection
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn devanagari_na_bytes() {
        let t = bijection_map();
        assert_eq!(t.forward(0xE0), 'à');
        assert_eq!(t.forward(0xA4), '¤');
        assert_eq!(t.forward(0xA8), '¨');
        assert_eq!(t.encode("न".as_bytes()), "à¤¨");
    }

    #[test]
    fn space_marker_and_shifted_block() {
        let t = ByteBijection;
        assert_eq!(t.forward(b' '), 'Ġ');
        assert_eq!(t.forward(b'\n'), 'Ċ');
        assert_eq!(t.forward(0), '\u{100}');
        assert_eq!(t.forward(0xAD), '\u{143}');
    }

    #[test]
    fn exact_inverse_and_injective() {
        let t = ByteBijection;
        let mut seen = std::collections::BTreeSet::new();
        for b in 0..=255u8 {
            let c = t.forward(b);
            assert!(seen.insert(c));
            assert_eq!(t.inverse(c), Some(b));
        }
        assert_eq!(t.inverse('न'), None);
    }

    #[test]
    fn image_has_no_whitespace_or_controls() {
        for b in 0..=255u8 {
            let c = ByteBijection.forward(b);
            assert!(!c.is_whitespace(), "{b:#x} -> {c:?}");
            assert!(!c.is_control(), "{b:#x} -> {c:?}");
            assert!(!matches!(c, ' ' | '\t' | '\n'));
        }
    }
}

//! Pre-tokenization: splitting input into the pieces merges never cross.

use alloc::vec::Vec;
use core::ops::Range;

/// The GPT-2 segmentation regex, used for synthetic fixtures and by
/// `ByteLevel { use_regex: true }` pre-tokenizers.
pub const GPT2_PATTERN: &str = r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

/// Splits valid UTF-8 text into contiguous pieces.
///
/// Implementations must push byte ranges that are in order, non-empty and
/// together cover `text` exactly.
pub trait PreTokenize {
    fn split_str(&self, text: &str, out: &mut Vec<Range<usize>>);
}

impl<P: PreTokenize + ?Sized> PreTokenize for &P {
    fn split_str(&self, text: &str, out: &mut Vec<Range<usize>>) {
        (**self).split_str(text, out)
    }
}

impl<P: PreTokenize + ?Sized> PreTokenize for alloc::boxed::Box<P> {
    fn split_str(&self, text: &str, out: &mut Vec<Range<usize>>) {
        (**self).split_str(text, out)
    }
}

/// Treats the whole input as one piece.
#[derive(Debug, Clone, Copy, Default)]
pub struct WholeText;

impl PreTokenize for WholeText {
    fn split_str(&self, text: &str, out: &mut Vec<Range<usize>>) {
        if !text.is_empty() {
            out.push(0..text.len());
        }
    }
}

/// Hand-written matcher with the GPT-2 pattern's alternation order.
///
/// Letters are general category `L*` (combining marks such as Devanagari
/// vowel signs are not letters), numbers are `N*`, whitespace is the
/// Unicode `White_Space` property, as in the regex.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gpt2Split;

#[derive(PartialEq, Eq, Clone, Copy)]
enum Class {
    Letter,
    Number,
    Space,
    Other,
}

fn is_letter(c: char) -> bool {
    use unicode_general_category::{get_general_category, GeneralCategory as G};
    if c.is_ascii() {
        return c.is_ascii_alphabetic();
    }
    matches!(
        get_general_category(c),
        G::UppercaseLetter | G::LowercaseLetter | G::TitlecaseLetter | G::ModifierLetter | G::OtherLetter
    )
}

fn class(c: char) -> Class {
    if is_letter(c) {
        Class::Letter
    } else if c.is_numeric() {
        Class::Number
    } else if c.is_whitespace() {
        Class::Space
    } else {
        Class::Other
    }
}

const CONTRACTIONS: [&str; 7] = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];

impl Gpt2Split {
    fn run_end(text: &str, from: usize, want: Class) -> usize {
        text[from..]
            .char_indices()
            .find(|&(_, c)| class(c) != want)
            .map_or(text.len(), |(i, _)| from + i)
    }

    fn next_piece(text: &str, start: usize) -> usize {
        let rest = &text[start..];
        for c in CONTRACTIONS {
            if rest.starts_with(c) {
                return start + c.len();
            }
        }
        let mut chars = rest.chars();
        let first = chars.next().expect("non-empty");
        let second = chars.next();
        let (body_start, body_class) = match (first, second) {
            (' ', Some(c)) if class(c) != Class::Space => (start + 1, class(c)),
            (c, _) => (start, class(c)),
        };
        if body_class != Class::Space {
            return Self::run_end(text, body_start, body_class);
        }
        // `\s+(?!\S)` then `\s+`
        let end = Self::run_end(text, start, Class::Space);
        if end == text.len() {
            return end;
        }
        let last = text[start..end].chars().next_back().expect("non-empty run");
        if end - start > last.len_utf8() {
            end - last.len_utf8()
        } else {
            end
        }
    }
}

impl PreTokenize for Gpt2Split {
    fn split_str(&self, text: &str, out: &mut Vec<Range<usize>>) {
        let mut pos = 0;
        while pos < text.len() {
            let end = Self::next_piece(text, pos);
            out.push(pos..end);
            pos = end;
        }
    }
}

/// Splits arbitrary bytes: maximal valid UTF-8 runs go through `pre`, each
/// invalid sequence becomes its own piece. Ranges partition `bytes`.
pub fn split_bytes<P: PreTokenize + ?Sized>(pre: &P, bytes: &[u8], out: &mut Vec<Range<usize>>) {
    let mut offset = 0;
    while offset < bytes.len() {
        match core::str::from_utf8(&bytes[offset..]) {
            Ok(s) => {
                push_split(pre, s, offset, out);
                break;
            }
            Err(e) => {
                let valid = e.valid_up_to();
                if valid > 0 {
                    let s = core::str::from_utf8(&bytes[offset..offset + valid]).expect("validated prefix");
                    push_split(pre, s, offset, out);
                }
                let bad = e.error_len().unwrap_or(bytes.len() - offset - valid);
                out.push(offset + valid..offset + valid + bad);
                offset += valid + bad;
            }
        }
    }
}

fn push_split<P: PreTokenize + ?Sized>(pre: &P, s: &str, base: usize, out: &mut Vec<Range<usize>>) {
    let from = out.len();
    pre.split_str(s, out);
    for r in &mut out[from..] {
        r.start += base;
        r.end += base;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pieces(text: &str) -> Vec<&str> {
        let mut out = Vec::new();
        Gpt2Split.split_str(text, &mut out);
        out.into_iter().map(|r| &text[r]).collect()
    }

    #[test]
    fn gpt2_reference_splits() {
        assert_eq!(pieces("Hello world"), vec!["Hello", " world"]);
        assert_eq!(pieces("I'll go"), vec!["I", "'ll", " go"]);
        assert_eq!(pieces("a  b"), vec!["a", " ", " b"]);
        assert_eq!(pieces("x   "), vec!["x", "   "]);
        assert_eq!(pieces("12 ab!?"), vec!["12", " ab", "!?"]);
        assert_eq!(pieces("\n\nfoo"), vec!["\n", "\n", "foo"]);
        // vowel signs and virama are marks, not letters
        assert_eq!(pieces(" नमस्ते"), vec![" नमस", "\u{94D}", "त", "\u{947}"]);
        assert_eq!(pieces("ßé"), vec!["ßé"]);
        assert_eq!(pieces(""), Vec::<&str>::new());
    }

    #[test]
    fn whitespace_lookahead_backs_off_one_char() {
        assert_eq!(pieces("a \t b"), vec!["a", " \t", " b"]);
        assert_eq!(pieces("a\tb"), vec!["a", "\t", "b"]);
    }

    #[test]
    fn invalid_bytes_become_their_own_pieces() {
        let bytes = b"ab\xFFcd\xE0\xA4";
        let mut out = Vec::new();
        split_bytes(&Gpt2Split, bytes, &mut out);
        assert_eq!(out, vec![0..2, 2..3, 3..5, 5..7]);
    }

    proptest::proptest! {
        #[test]
        fn pieces_partition_input(s in "\\PC{0,40}", raw in proptest::collection::vec(proptest::num::u8::ANY, 0..40)) {
            for bytes in [s.as_bytes(), raw.as_slice()] {
                let mut out = Vec::new();
                split_bytes(&Gpt2Split, bytes, &mut out);
                let mut pos = 0;
                let mut joined = Vec::new();
                for r in &out {
                    proptest::prop_assert_eq!(r.start, pos);
                    proptest::prop_assert!(r.end > r.start);
                    joined.extend_from_slice(&bytes[r.clone()]);
                    pos = r.end;
                }
                proptest::prop_assert_eq!(joined, bytes.to_vec());
            }
        }
    }
}

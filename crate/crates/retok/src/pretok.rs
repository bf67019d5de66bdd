//! Regex pre-tokenization and tokenizer construction from a loaded model.

use std::ops::Range;

use fancy_regex::Regex;
use retok_core::bpe::EncoderError;
use retok_core::pretokenize::{Gpt2Split, PreTokenize, WholeText, GPT2_PATTERN};
use retok_core::{Tokenizer, TokenizerModel};

/// Segmentation pattern of the bundled synthetic fixtures: the GPT-2
/// alternation with combining marks kept inside letter runs and digits in
/// groups of at most three.
pub const FIXTURE_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?[\p{L}\p{M}]+| ?\p{N}{1,3}| ?[^\s\p{L}\p{M}\p{N}]+|\s+(?!\S)|\s+";

/// `Split { behavior: Isolated }` semantics: every match is a piece and so
/// is every gap between matches.
#[derive(Debug, Clone)]
pub struct RegexPreTokenizer {
    re: Regex,
}

impl RegexPreTokenizer {
    pub fn new(pattern: &str) -> Result<Self, Box<fancy_regex::Error>> {
        Ok(RegexPreTokenizer {
            re: Regex::new(pattern).map_err(Box::new)?,
        })
    }

    pub fn pattern(&self) -> &str {
        self.re.as_str()
    }
}

impl PreTokenize for RegexPreTokenizer {
    fn split_str(&self, text: &str, out: &mut Vec<Range<usize>>) {
        let mut last = 0;
        for m in self.re.find_iter(text) {
            // a backtracking-limit error leaves the rest as one piece
            let Ok(m) = m else { break };
            if m.start() > last {
                out.push(last..m.start());
            }
            if m.end() > m.start() {
                out.push(m.start()..m.end());
            }
            last = m.end();
        }
        if last < text.len() {
            out.push(last..text.len());
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("pre-tokenizer pattern: {0}")]
    Pattern(#[from] Box<fancy_regex::Error>),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// The pre-tokenizer a model's pattern calls for. The GPT-2 pattern gets
/// the hand-written matcher; an empty pattern means no segmentation.
pub fn pre_tokenizer_for(pattern: &str) -> Result<Box<dyn PreTokenize + Send + Sync>, BuildError> {
    Ok(match pattern {
        "" => Box::new(WholeText),
        GPT2_PATTERN => Box::new(Gpt2Split),
        p => Box::new(RegexPreTokenizer::new(p)?),
    })
}

pub fn build_tokenizer(model: &TokenizerModel) -> Result<Tokenizer, BuildError> {
    let pre = pre_tokenizer_for(&model.pretokenizer_pattern)?;
    let enc = retok_core::Encoder::new(model)?;
    Ok(Tokenizer::from_parts(enc, pre))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn split(p: &dyn PreTokenize, s: &str) -> Vec<String> {
        let mut r = Vec::new();
        p.split_str(s, &mut r);
        r.into_iter().map(|r| s[r].to_string()).collect()
    }

    #[test]
    fn fixture_pattern_groups_digits_and_keeps_marks() {
        let p = RegexPreTokenizer::new(FIXTURE_PATTERN).unwrap();
        assert_eq!(split(&p, "1234567890"), ["123", "456", "789", "0"]);
        assert_eq!(split(&p, " नमस्ते"), [" नमस्ते"]);
        assert_eq!(split(&p, "ଓଡ଼ିଆ ଭାଷା।"), ["ଓଡ଼ିଆ", " ଭାଷା", "।"]);
    }

    #[test]
    fn gaps_become_pieces() {
        let p = RegexPreTokenizer::new("a+").unwrap();
        assert_eq!(split(&p, "xaaybz"), ["x", "aa", "ybz"]);
        assert_eq!(split(&p, ""), Vec::<String>::new());
    }

    fn text() -> impl Strategy<Value = String> {
        let atoms = prop::sample::select(vec![
            "a", "Z", "'s", "'ll", "'", " ", "  ", "\t", "\n", "\r\n", "\u{a0}", "\u{3000}", "7", "٣", "½", "é",
            "e\u{301}", "न", "\u{94d}", "\u{93e}", "ଡ଼", "中", "😀", "!", ".", "-", "\u{200b}", "\u{feff}", "ǅ", "ʰ",
        ]);
        prop::collection::vec(atoms, 0..24).prop_map(|v| v.concat())
    }

    proptest! {
        // the hand-written GPT-2 matcher is the regex, piece for piece
        #[test]
        fn gpt2_split_matches_regex(s in text()) {
            let re = RegexPreTokenizer::new(GPT2_PATTERN).unwrap();
            prop_assert_eq!(split(&Gpt2Split, &s), split(&re, &s));
        }

        #[test]
        fn regex_pieces_partition(s in text()) {
            let re = RegexPreTokenizer::new(FIXTURE_PATTERN).unwrap();
            prop_assert_eq!(split(&re, &s).concat(), s);
        }
    }
}

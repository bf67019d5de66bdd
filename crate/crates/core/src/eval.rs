//! Compression evaluation: fertility, bytes per token, token volume,
//! broken-character traces, digit grouping and the three-regime classifier.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bpe::Tokenizer;

/// Whitespace-delimited word count; the one splitter every tokenizer is
/// measured against.
pub fn count_words(text: &[u8]) -> usize {
    String::from_utf8_lossy(text).split_whitespace().count()
}

/// Unicode scalar count; each invalid byte counts as one.
pub fn count_chars(text: &[u8]) -> usize {
    char_spans(text).len()
}

/// Byte spans of characters (invalid bytes are one-byte spans).
fn char_spans(text: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    for chunk in text.utf8_chunks() {
        for c in chunk.valid().chars() {
            out.push((i, i + c.len_utf8()));
            i += c.len_utf8();
        }
        for _ in chunk.invalid() {
            out.push((i, i + 1));
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("language {0} has no words")]
    EmptyLanguage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FertilityCell {
    pub tokens: u64,
    pub words: u64,
}

impl FertilityCell {
    pub fn fertility(&self) -> f64 {
        self.tokens as f64 / self.words as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FertilityRow {
    pub tokenizer: String,
    pub cells: BTreeMap<String, FertilityCell>,
    /// Unweighted mean of per-language fertility.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FertilityReport {
    /// Ascending mean fertility (best first); ties keep input order.
    pub rows: Vec<FertilityRow>,
}

/// One labelled group of documents: a language or a corpus class.
pub type Group<'a> = (&'a str, &'a [&'a [u8]]);

pub fn fertility(tokenizers: &[(&str, &Tokenizer)], corpus: &[Group<'_>]) -> Result<FertilityReport, EvalError> {
    let mut rows = Vec::new();
    for (name, tk) in tokenizers {
        let mut cells = BTreeMap::new();
        for (lang, docs) in corpus {
            let mut cell = FertilityCell::default();
            for d in *docs {
                cell.tokens += tk.encode_ids(d).len() as u64;
                cell.words += count_words(d) as u64;
            }
            if cell.words == 0 {
                return Err(EvalError::EmptyLanguage(String::from(*lang)));
            }
            cells.insert(String::from(*lang), cell);
        }
        let mean = if cells.is_empty() {
            0.0
        } else {
            cells.values().map(FertilityCell::fertility).sum::<f64>() / cells.len() as f64
        };
        rows.push(FertilityRow {
            tokenizer: String::from(*name),
            cells,
            mean,
        });
    }
    rows.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    Ok(FertilityReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompressionCell {
    pub utf8_bytes: u64,
    pub tokens: u64,
    pub chars: u64,
}

impl CompressionCell {
    pub fn bytes_per_token(&self) -> f64 {
        self.utf8_bytes as f64 / self.tokens as f64
    }

    pub fn tokens_per_char(&self) -> f64 {
        self.tokens as f64 / self.chars as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionRow {
    pub tokenizer: String,
    pub class: String,
    pub cell: CompressionCell,
}

pub fn bytes_per_token(tokenizers: &[(&str, &Tokenizer)], classes: &[Group<'_>]) -> Vec<CompressionRow> {
    let mut rows = Vec::new();
    for (name, tk) in tokenizers {
        for (class, docs) in classes {
            let mut cell = CompressionCell::default();
            for d in *docs {
                cell.utf8_bytes += d.len() as u64;
                cell.tokens += tk.encode_ids(d).len() as u64;
                cell.chars += count_chars(d) as u64;
            }
            rows.push(CompressionRow {
                tokenizer: String::from(*name),
                class: String::from(*class),
                cell,
            });
        }
    }
    rows
}

/// `(b - a) / a`, in percent.
pub fn delta_pct(a: u64, b: u64) -> f64 {
    if a == 0 {
        return 0.0;
    }
    (b as f64 - a as f64) / a as f64 * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub tokenizers: Vec<String>,
    /// language → tokens per tokenizer (in `tokenizers` order).
    pub per_language: BTreeMap<String, Vec<u64>>,
    pub totals: Vec<u64>,
}

impl VolumeReport {
    /// Per-language and total change of tokenizer `b` relative to `a`.
    pub fn deltas(&self, a: usize, b: usize) -> (BTreeMap<String, f64>, f64) {
        let per = self
            .per_language
            .iter()
            .map(|(l, v)| (l.clone(), delta_pct(v[a], v[b])))
            .collect();
        (per, delta_pct(self.totals[a], self.totals[b]))
    }
}

pub fn token_volume(tokenizers: &[(&str, &Tokenizer)], corpus: &[Group<'_>]) -> VolumeReport {
    let mut per_language = BTreeMap::new();
    let mut totals = alloc::vec![0u64; tokenizers.len()];
    for (lang, docs) in corpus {
        let counts: Vec<u64> = tokenizers
            .iter()
            .map(|(_, tk)| docs.iter().map(|d| tk.encode_ids(d).len() as u64).sum())
            .collect();
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
        let slot: &mut Vec<u64> = per_language
            .entry(String::from(*lang))
            .or_insert_with(|| alloc::vec![0; tokenizers.len()]);
        for (s, c) in slot.iter_mut().zip(counts) {
            *s += c;
        }
    }
    VolumeReport {
        tokenizers: tokenizers.iter().map(|(n, _)| String::from(*n)).collect(),
        per_language,
        totals,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTrace {
    pub tokenizer: String,
    pub tokens: usize,
    pub chars: usize,
    /// Characters whose bytes span two or more tokens.
    pub broken: usize,
    pub pieces: Vec<String>,
}

impl MergeTrace {
    pub fn pct_broken(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.broken as f64 / self.tokens as f64 * 100.0
        }
    }
}

/// Broken-character trace of one input. The percentage is over tokens, as
/// the worked comparison reports it.
pub fn merge_trace(name: &str, tokenizer: &Tokenizer, text: &[u8]) -> MergeTrace {
    let ids = tokenizer.encode_ids(text);
    let enc = tokenizer.encoder();
    let mut cuts = Vec::with_capacity(ids.len());
    let mut pos = 0;
    let mut pieces = Vec::with_capacity(ids.len());
    for &id in &ids {
        let b = enc.token_bytes(id).unwrap_or(&[]);
        pos += b.len();
        cuts.push(pos);
        pieces.push(String::from_utf8_lossy(b).into_owned());
    }
    let spans = char_spans(text);
    let broken = spans
        .iter()
        .filter(|(s, e)| {
            let first = cuts.partition_point(|&c| c <= *s);
            cuts.get(first).is_some_and(|&c| c < *e)
        })
        .count();
    MergeTrace {
        tokenizer: String::from(name),
        tokens: ids.len(),
        chars: spans.len(),
        broken,
        pieces,
    }
}

pub const DIGIT_PROBE: &str = "1234567890";

/// Decoded pieces of `text`, e.g. `["123", "456", "789", "0"]`.
pub fn grouping(tokenizer: &Tokenizer, text: &str) -> Vec<String> {
    let enc = tokenizer.encoder();
    tokenizer
        .encode_ids(text.as_bytes())
        .into_iter()
        .map(|id| String::from_utf8_lossy(enc.token_bytes(id).unwrap_or(&[])).into_owned())
        .collect()
}

pub fn digit_grouping_check(tokenizer: &Tokenizer) -> Vec<String> {
    grouping(tokenizer, DIGIT_PROBE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ByteFallback,
    Subword,
    WholeWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// At or above this many tokens per character: byte fallback.
    pub byte_fallback_tokens_per_char: f64,
    /// At or below this many tokens per word: whole word.
    pub whole_word_tokens_per_word: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            byte_fallback_tokens_per_char: 2.5,
            whole_word_tokens_per_word: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub tokens: u64,
    pub chars: u64,
    pub words: u64,
    pub tokens_per_char: f64,
    pub tokens_per_word: f64,
}

pub fn regime_classify(tokenizer: &Tokenizer, docs: &[&[u8]], thresholds: &RegimeThresholds) -> RegimeReport {
    let (mut tokens, mut chars, mut words) = (0u64, 0u64, 0u64);
    for d in docs {
        tokens += tokenizer.encode_ids(d).len() as u64;
        chars += count_chars(d) as u64;
        words += count_words(d) as u64;
    }
    let tpc = if chars == 0 { 0.0 } else { tokens as f64 / chars as f64 };
    let tpw = if words == 0 { 0.0 } else { tokens as f64 / words as f64 };
    let regime = if tpc >= thresholds.byte_fallback_tokens_per_char {
        Regime::ByteFallback
    } else if tpw <= thresholds.whole_word_tokens_per_word {
        Regime::WholeWord
    } else {
        Regime::Subword
    };
    RegimeReport {
        regime,
        tokens,
        chars,
        words,
        tokens_per_char: tpc,
        tokens_per_word: tpw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bijection::ByteBijection;
    use crate::model::TokenizerModel;
    use crate::pretokenize::{Gpt2Split, WholeText};
    use crate::testutil::{with_merges, GPT2_PATTERN};
    use alloc::vec;

    fn bytes_only() -> Tokenizer {
        Tokenizer::new(&TokenizerModel::byte_level_base(GPT2_PATTERN), Gpt2Split).unwrap()
    }

    #[test]
    fn fertility_basics() {
        let m = with_merges(&[("a", "b")]);
        let t = Tokenizer::new(&m, Gpt2Split).unwrap();
        let docs: [&[u8]; 1] = [b"abc"];
        let r = fertility(&[("t", &t)], &[("xx", &docs)]).unwrap();
        let cell = r.rows[0].cells["xx"];
        assert_eq!((cell.tokens, cell.words), (2, 1));
        assert_eq!(cell.fertility(), 2.0);
        let empty: [&[u8]; 1] = [b"   "];
        assert_eq!(
            fertility(&[("t", &t)], &[("yy", &empty)]),
            Err(EvalError::EmptyLanguage("yy".into()))
        );
    }

    #[test]
    fn bytes_per_token_bookkeeping() {
        let word = "भारत";
        let m = with_merges(&[]);
        let mut m2 = m.clone();
        m2.vocab.insert(ByteBijection.encode(word.as_bytes()), 256);
        m2.ignore_merges = true;
        let t = Tokenizer::new(&m2, WholeText).unwrap();
        let docs: [&[u8]; 1] = [word.as_bytes()];
        let rows = bytes_per_token(&[("t", &t)], &[("hi", &docs)]);
        assert_eq!(rows[0].cell.utf8_bytes, 12);
        assert_eq!(rows[0].cell.tokens, 1);
        assert_eq!(rows[0].cell.bytes_per_token(), 12.0);
        assert_eq!(rows[0].cell.chars, 4);
    }

    #[test]
    fn volume_deltas() {
        assert_eq!(delta_pct(100, 127), 27.0);
        let t = bytes_only();
        let docs: [&[u8]; 2] = [b"abc", b"de"];
        let v = token_volume(&[("a", &t), ("b", &t)], &[("en", &docs)]);
        assert_eq!(v.totals, vec![5, 5]);
        assert_eq!(v.deltas(0, 1).1, 0.0);
    }

    #[test]
    fn trace_counts_split_characters() {
        let t = bytes_only();
        // one 3-byte char as three byte tokens: broken once
        let r = merge_trace("b", &t, "न".as_bytes());
        assert_eq!((r.tokens, r.chars, r.broken), (3, 1, 1));
        // split 1 + 2
        let na = ByteBijection.encode("न".as_bytes());
        let tail: String = na.chars().skip(1).collect();
        let head: String = na.chars().take(1).collect();
        let chars: Vec<String> = tail.chars().map(String::from).collect();
        let m = with_merges(&[(&chars[0], &chars[1])]);
        let r = merge_trace("m", &Tokenizer::new(&m, WholeText).unwrap(), "न".as_bytes());
        assert_eq!(r.tokens, 2);
        assert_eq!(r.broken, 1);
        let _ = head;
        // whole token
        let mut m = with_merges(&[]);
        m.vocab.insert(na, 256);
        m.ignore_merges = true;
        let r = merge_trace("w", &Tokenizer::new(&m, WholeText).unwrap(), "न".as_bytes());
        assert_eq!((r.tokens, r.broken), (1, 0));
        assert_eq!(r.pct_broken(), 0.0);
    }

    #[test]
    fn digits_without_merges() {
        let t = bytes_only();
        assert_eq!(
            digit_grouping_check(&t),
            ["1", "2", "3", "4", "5", "6", "7", "8", "9", "0"]
        );
        assert_eq!(grouping(&t, "0"), ["0"]);
    }

    #[test]
    fn regimes() {
        let th = RegimeThresholds::default();
        let t = bytes_only();
        let docs: [&[u8]; 1] = ["नमन कमल".as_bytes()];
        assert_eq!(regime_classify(&t, &docs, &th).regime, Regime::ByteFallback);

        let mut m = with_merges(&[]);
        m.ignore_merges = true;
        for (i, w) in ["नमन", " कमल"].iter().enumerate() {
            m.vocab.insert(ByteBijection.encode(w.as_bytes()), 256 + i as u32);
        }
        let t = Tokenizer::new(&m, Gpt2Split).unwrap();
        assert_eq!(regime_classify(&t, &docs, &th).regime, Regime::WholeWord);

        // two Bengali chars at 3 tokens, three Devanagari at 2 (E0 A4
        // merged): 12 tokens over 5 chars = 2.4 tokens/char
        let docs: [&[u8]; 1] = ["\u{995}\u{995}\u{928}\u{92E}\u{928}".as_bytes()];
        let mut m = with_merges(&[]);
        let na = ByteBijection.encode("न".as_bytes());
        let c: Vec<String> = na.chars().map(String::from).collect();
        m.vocab.insert(alloc::format!("{}{}", c[0], c[1]), 256);
        m.merges.push(crate::model::Merge::new(c[0].clone(), c[1].clone()));
        let t = Tokenizer::new(&m, WholeText).unwrap();
        let r = regime_classify(&t, &docs, &th);
        assert_eq!((r.tokens, r.chars), (12, 5));
        assert_eq!(r.regime, Regime::Subword);
    }
}

//! Byte-level BPE encode/decode.
//!
//! Each pre-token is mapped through the byte bijection. With
//! `ignore_merges`, a pre-token that is itself a vocabulary entry is emitted
//! as that single ID. Otherwise the pre-token starts as single-byte tokens and
//! the applicable pair with the lowest merge rank (leftmost on ties) is merged
//! until none applies.

use alloc::boxed::Box;
use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::ops::Range;

use hashbrown::HashMap;

use crate::bijection::ByteBijection;
use crate::model::{token_bytes_into, TokenAlphabet, TokenRef, TokenizerModel};
use crate::pretokenize::{split_bytes, PreTokenize};
use crate::TokenId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncoderError {
    #[error("single-byte token for {0:#04x} is missing from the vocabulary")]
    MissingByteToken(u8),
    #[error("encoding requires a byte-level vocabulary, got {0:?}")]
    UnsupportedAlphabet(TokenAlphabet),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unknown token id {0}")]
    UnknownId(TokenId),
}

/// Encoded output: IDs plus their vocabulary strings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub ids: Vec<TokenId>,
    pub surfaces: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Clone, Copy)]
struct MergeTarget {
    rank: u32,
    new_id: TokenId,
}

/// Compiled lookup tables for one model. Owns its data so it can be shared
/// across threads independently of the source model.
#[derive(Clone)]
pub struct Encoder {
    ignore_merges: bool,
    vocab: HashMap<String, TokenId>,
    merges: HashMap<(TokenId, TokenId), MergeTarget>,
    byte_ids: [TokenId; 256],
    /// Raw bytes per ID (specials decode to their literal content).
    id_bytes: Vec<Option<Box<[u8]>>>,
    id_surface: Vec<Option<Box<str>>>,
}

impl core::fmt::Debug for Encoder {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Encoder")
            .field("vocab", &self.vocab.len())
            .field("merges", &self.merges.len())
            .field("ignore_merges", &self.ignore_merges)
            .finish()
    }
}

impl Encoder {
    pub fn new(model: &TokenizerModel) -> Result<Self, EncoderError> {
        if model.alphabet != TokenAlphabet::ByteLevel {
            return Err(EncoderError::UnsupportedAlphabet(model.alphabet));
        }
        let mut byte_ids = [0; 256];
        for (b, id) in model.byte_fallback_ids().iter().enumerate() {
            byte_ids[b] = id.ok_or(EncoderError::MissingByteToken(b as u8))?;
        }
        let mut merges = HashMap::with_capacity(model.merges.len());
        let mut composed = String::new();
        for (rank, m) in model.merges.iter().enumerate() {
            composed.clear();
            composed.push_str(&m.left);
            composed.push_str(&m.right);
            let (Some(&l), Some(&r), Some(&n)) = (
                model.vocab.get(&m.left),
                model.vocab.get(&m.right),
                model.vocab.get(composed.as_str()),
            ) else {
                continue;
            };
            // duplicates keep the lowest rank
            merges.entry((l, r)).or_insert(MergeTarget {
                rank: rank as u32,
                new_id: n,
            });
        }
        let table = model.id_table();
        let mut id_bytes = Vec::with_capacity(table.len());
        let mut id_surface = Vec::with_capacity(table.len());
        for entry in &table {
            match entry {
                Some(TokenRef::Normal(tok)) => {
                    let mut buf = Vec::new();
                    token_bytes_into(model.alphabet, tok, &mut buf);
                    id_bytes.push(Some(buf.into_boxed_slice()));
                    id_surface.push(Some(Box::from(*tok)));
                }
                Some(TokenRef::Special(s)) => {
                    id_bytes.push(Some(Box::from(s.content.as_bytes())));
                    id_surface.push(Some(Box::from(s.content.as_str())));
                }
                None => {
                    id_bytes.push(None);
                    id_surface.push(None);
                }
            }
        }
        Ok(Encoder {
            ignore_merges: model.ignore_merges,
            vocab: model.vocab.clone(),
            merges,
            byte_ids,
            id_bytes,
            id_surface,
        })
    }

    /// Size of the ID space (highest ID + 1).
    pub fn id_space(&self) -> usize {
        self.id_bytes.len()
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        self.id_bytes.get(id as usize).is_some_and(Option::is_some)
    }

    pub fn token_bytes(&self, id: TokenId) -> Option<&[u8]> {
        self.id_bytes.get(id as usize)?.as_deref()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.id_surface.get(id as usize)?.as_deref()
    }

    pub fn byte_id(&self, b: u8) -> TokenId {
        self.byte_ids[b as usize]
    }

    /// Encodes one pre-token's bytes, appending IDs to `out`.
    pub fn encode_piece(&self, piece: &[u8], out: &mut Vec<TokenId>) {
        if piece.is_empty() {
            return;
        }
        if piece.len() == 1 {
            out.push(self.byte_ids[piece[0] as usize]);
            return;
        }
        if self.ignore_merges {
            let mapped = ByteBijection.encode(piece);
            if let Some(&id) = self.vocab.get(mapped.as_str()) {
                out.push(id);
                return;
            }
        }
        self.merge_symbols(piece, out);
    }

    fn merge_symbols(&self, piece: &[u8], out: &mut Vec<TokenId>) {
        let n = piece.len();
        let mut ids: Vec<TokenId> = piece.iter().map(|&b| self.byte_ids[b as usize]).collect();
        let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
        let mut next: Vec<usize> = (1..=n).collect();
        let mut alive = vec![true; n];

        let mut heap: BinaryHeap<Reverse<(u32, usize, TokenId)>> = BinaryHeap::new();
        for i in 0..n - 1 {
            if let Some(t) = self.merges.get(&(ids[i], ids[i + 1])) {
                heap.push(Reverse((t.rank, i, t.new_id)));
            }
        }
        while let Some(Reverse((rank, pos, new_id))) = heap.pop() {
            if !alive[pos] || next[pos] >= n {
                continue;
            }
            let right = next[pos];
            match self.merges.get(&(ids[pos], ids[right])) {
                Some(t) if t.rank == rank && t.new_id == new_id => {}
                _ => continue,
            }
            ids[pos] = new_id;
            alive[right] = false;
            next[pos] = next[right];
            if next[pos] < n {
                prev[next[pos]] = pos;
            }
            let p = prev[pos];
            if p < n {
                if let Some(t) = self.merges.get(&(ids[p], ids[pos])) {
                    heap.push(Reverse((t.rank, p, t.new_id)));
                }
            }
            if next[pos] < n {
                if let Some(t) = self.merges.get(&(ids[pos], ids[next[pos]])) {
                    heap.push(Reverse((t.rank, pos, t.new_id)));
                }
            }
        }
        let mut i = 0;
        while i < n {
            out.push(ids[i]);
            i = next[i];
        }
    }

    pub fn decode_into(&self, ids: &[TokenId], out: &mut Vec<u8>) -> Result<(), DecodeError> {
        for &id in ids {
            out.extend_from_slice(self.token_bytes(id).ok_or(DecodeError::UnknownId(id))?);
        }
        Ok(())
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<u8>, DecodeError> {
        let mut out = Vec::new();
        self.decode_into(ids, &mut out)?;
        Ok(out)
    }
}

/// An [`Encoder`] paired with its pre-tokenizer.
pub struct Tokenizer {
    encoder: Encoder,
    pre: Box<dyn PreTokenize + Send + Sync>,
}

impl core::fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Tokenizer")
            .field("encoder", &self.encoder)
            .finish_non_exhaustive()
    }
}

impl Tokenizer {
    pub fn new(model: &TokenizerModel, pre: impl PreTokenize + Send + Sync + 'static) -> Result<Self, EncoderError> {
        Ok(Tokenizer {
            encoder: Encoder::new(model)?,
            pre: Box::new(pre),
        })
    }

    pub fn from_parts(encoder: Encoder, pre: Box<dyn PreTokenize + Send + Sync>) -> Self {
        Tokenizer { encoder, pre }
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn pre_tokenizer(&self) -> &(dyn PreTokenize + Send + Sync) {
        &*self.pre
    }

    /// Pre-token byte ranges of `text`.
    pub fn pieces(&self, text: &[u8]) -> Vec<Range<usize>> {
        let mut ranges = Vec::new();
        split_bytes(&*self.pre, text, &mut ranges);
        ranges
    }

    pub fn encode_ids_into(&self, text: &[u8], out: &mut Vec<TokenId>) {
        let mut ranges = Vec::new();
        split_bytes(&*self.pre, text, &mut ranges);
        for r in ranges {
            self.encoder.encode_piece(&text[r], out);
        }
    }

    pub fn encode_ids(&self, text: &[u8]) -> Vec<TokenId> {
        let mut out = Vec::new();
        self.encode_ids_into(text, &mut out);
        out
    }

    pub fn encode(&self, text: &[u8]) -> TokenSequence {
        let ids = self.encode_ids(text);
        let surfaces = ids
            .iter()
            .map(|&id| String::from(self.encoder.surface(id).expect("encoder emits known ids")))
            .collect();
        TokenSequence { ids, surfaces }
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<u8>, DecodeError> {
        self.encoder.decode(ids)
    }

    /// Encoded pieces as decoded text (lossy for partial characters).
    pub fn encode_to_strings(&self, text: &[u8]) -> Vec<String> {
        self.encode_ids(text)
            .into_iter()
            .map(|id| String::from_utf8_lossy(self.encoder.token_bytes(id).unwrap_or_default()).into_owned())
            .collect()
    }
}

/// Quadratic reference: repeatedly merge the lowest-rank, leftmost pair.
/// Kept for cross-checking the heap implementation.
pub fn naive_merge(model: &TokenizerModel, piece: &[u8]) -> Vec<String> {
    let rank_of = |l: &str, r: &str| -> Option<usize> {
        model.merges.iter().position(|m| {
            m.left == l && m.right == r && {
                let mut c = String::from(l);
                c.push_str(r);
                model.vocab.contains_key(&c)
            }
        })
    };
    let mut syms: Vec<String> = piece.iter().map(|&b| model.byte_token(b)).collect();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..syms.len().saturating_sub(1) {
            if let Some(r) = rank_of(&syms[i], &syms[i + 1]) {
                if best.map_or(true, |(br, _)| r.cmp(&br) == Ordering::Less) {
                    best = Some((r, i));
                }
            }
        }
        match best {
            None => return syms,
            Some((_, i)) => {
                let right = syms.remove(i + 1);
                syms[i].push_str(&right);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Merge;
    use crate::pretokenize::{Gpt2Split, WholeText};
    use crate::testutil::{with_merges, GPT2_PATTERN};
    use alloc::format;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn tk(model: &TokenizerModel) -> Tokenizer {
        Tokenizer::new(model, Gpt2Split).unwrap()
    }

    #[test]
    fn merge_free_model_is_byte_fallback() {
        let m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        let t = tk(&m);
        for b in 0..=255u8 {
            assert_eq!(t.encode_ids(&[b]).len(), 1);
        }
        assert_eq!(t.encode_ids("न".as_bytes()).len(), 3);
        assert_eq!(t.encode(b"").ids, Vec::<TokenId>::new());
        assert_eq!(t.decode(&[]).unwrap(), b"");
    }

    #[test]
    fn whole_token_priority() {
        // "aa" is in vocab but the merge path would first build "ab".
        let mut m = with_merges(&[("a", "b"), ("a", "a")]);
        let t = tk(&m);
        assert_eq!(t.encode(b"aab").surfaces, vec!["a", "ab"]);
        m.vocab.insert("aab".into(), 400);
        m.ignore_merges = true;
        let t = tk(&m);
        assert_eq!(t.encode(b"aab").surfaces, vec!["aab"]);
        m.ignore_merges = false;
        let t = tk(&m);
        assert_eq!(t.encode(b"aab").surfaces, vec!["a", "ab"]);
    }

    #[test]
    fn rank_priority_not_sequential() {
        // (b,c) outranks (a,b): "abc" -> a + bc
        let m = with_merges(&[("b", "c"), ("a", "b")]);
        assert_eq!(tk(&m).encode(b"abc").surfaces, vec!["a", "bc"]);
        let m = with_merges(&[("a", "b"), ("b", "c")]);
        assert_eq!(tk(&m).encode(b"abc").surfaces, vec!["ab", "c"]);
    }

    #[test]
    fn leftmost_wins_ties() {
        let m = with_merges(&[("a", "a")]);
        assert_eq!(tk(&m).encode(b"aaa").surfaces, vec!["aa", "a"]);
    }

    #[test]
    fn unknown_id_fails_decode() {
        let m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        assert_eq!(tk(&m).decode(&[999]), Err(DecodeError::UnknownId(999)));
    }

    #[test]
    fn missing_byte_token_is_rejected() {
        let mut m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        m.vocab.remove("a");
        assert!(matches!(Encoder::new(&m), Err(EncoderError::MissingByteToken(b'a'))));
    }

    #[test]
    fn devanagari_character_tokens() {
        let na = ByteBijection.encode("न".as_bytes());
        let chars: Vec<char> = na.chars().collect();
        let m = with_merges(&[
            (&chars[0].to_string(), &chars[1].to_string()),
            (&format!("{}{}", chars[0], chars[1]), &chars[2].to_string()),
        ]);
        let t = tk(&m);
        assert_eq!(t.encode("ननन".as_bytes()).surfaces, vec![na.clone(), na.clone(), na]);
    }

    #[test]
    fn duplicate_merges_do_not_change_output() {
        let mut m = with_merges(&[("a", "b"), ("b", "c"), ("ab", "c")]);
        let before = tk(&m).encode(b"abcabc");
        m.merges.push(Merge::new("b", "c"));
        m.merges.insert(0, Merge::new("ab", "c"));
        m.merges.push(Merge::new("a", "b"));
        let t = Tokenizer::new(&m, WholeText).unwrap();
        let mut m2 = m.clone();
        m2.dedup_merges();
        let t2 = Tokenizer::new(&m2, WholeText).unwrap();
        assert_eq!(t.encode(b"abcabc"), t2.encode(b"abcabc"));
        assert_eq!(before.ids.len(), 2);
    }

    fn random_model(pairs: &[(u8, u8)]) -> TokenizerModel {
        // Build merges over a small alphabet, composing earlier products.
        let mut m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        let mut pool: Vec<String> = "abcd".chars().map(String::from).collect();
        let mut next_id = 256;
        for &(l, r) in pairs {
            let left = pool[l as usize % pool.len()].clone();
            let right = pool[r as usize % pool.len()].clone();
            let composed = format!("{left}{right}");
            if composed.len() > 12 {
                continue;
            }
            if !m.vocab.contains_key(&composed) {
                m.vocab.insert(composed.clone(), next_id);
                next_id += 1;
                pool.push(composed.clone());
            }
            m.merges.push(Merge::new(left, right));
        }
        m
    }

    proptest! {
        #[test]
        fn heap_matches_naive_reference(
            pairs in prop::collection::vec((0u8..40, 0u8..40), 0..30),
            text in "[abcd]{0,64}",
        ) {
            let m = random_model(&pairs);
            let t = Tokenizer::new(&m, WholeText).unwrap();
            let got = t.encode(text.as_bytes()).surfaces;
            let want = if text.is_empty() { Vec::new() } else { naive_merge(&m, text.as_bytes()) };
            prop_assert_eq!(got, want);
        }

        #[test]
        fn round_trip_any_bytes(
            pairs in prop::collection::vec((0u8..40, 0u8..40), 0..20),
            bytes in prop::collection::vec(any::<u8>(), 0..128),
        ) {
            let m = random_model(&pairs);
            let t = tk(&m);
            let ids = t.encode_ids(&bytes);
            prop_assert_eq!(t.decode(&ids).unwrap(), bytes);
        }
    }
}

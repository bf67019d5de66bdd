//! Builders for the bundled synthetic tokenizers.
//!
//! The base is a small byte-level BPE trained on the fixture corpora, with
//! the kinds of defects a large inherited vocabulary carries: a Thai token
//! longer than 32 bytes and a merge joining a Han character to a Latin
//! letter. Both sit in scripts the default crop prunes.

use retok_core::model::{Merge, SpecialToken, TokenizerModel};
use retok_core::surgery::{train_candidates, SurgeryError, TrainConfig};
use retok_core::{ByteBijection, TokenId};

use crate::pretok::{RegexPreTokenizer, FIXTURE_PATTERN};

/// 15 Thai characters, 45 bytes.
pub const LONG_THAI: &str = "ภาษาไทยเป็นภาษา";
/// Han + Latin in one token.
pub const CROSS_SCRIPT: &str = "中a";

pub const BASE_TRAIN: TrainConfig = TrainConfig {
    max_candidates: 3000,
    min_count: 2,
    max_token_bytes: 32,
};

fn next_id(m: &TokenizerModel) -> TokenId {
    m.declared_size() as TokenId
}

/// Adds `text` as a left-to-right chain of byte merges, creating every
/// prefix token that is missing.
pub fn add_chain(m: &mut TokenizerModel, text: &[u8]) {
    let bt = ByteBijection;
    let mut left = bt.encode(&text[..1]);
    for i in 1..text.len() {
        let right = bt.encode(&text[i..=i]);
        let composed = format!("{left}{right}");
        if !m.vocab.contains_key(&composed) {
            let id = next_id(m);
            m.vocab.insert(composed.clone(), id);
            m.merges.push(Merge::new(left, right));
        }
        left = composed;
    }
}

/// Byte base plus trained merges (IDs in training order), the two defect
/// chains, and two specials.
pub fn build_base(docs: &[&[u8]]) -> Result<TokenizerModel, SurgeryError> {
    let pre = RegexPreTokenizer::new(FIXTURE_PATTERN).expect("fixture pattern compiles");
    let cands = train_candidates(docs.iter().copied(), &pre, &BASE_TRAIN)?;
    let mut m = TokenizerModel::byte_level_base(FIXTURE_PATTERN);
    m.ignore_merges = true;
    for c in cands {
        let id = next_id(&m);
        m.vocab.insert(c.composed.clone(), id);
        m.merges.push(c.merge());
    }
    add_chain(&mut m, LONG_THAI.as_bytes());
    add_chain(&mut m, CROSS_SCRIPT.as_bytes());
    add_specials(&mut m);
    m.check()?;
    Ok(m)
}

fn add_specials(m: &mut TokenizerModel) {
    for (content, pinned) in [("<|endoftext|>", true), ("<|pad|>", false)] {
        let id = next_id(m);
        m.special_tokens.push(SpecialToken {
            content: content.into(),
            id,
            pinned,
        });
    }
}

/// Byte base with only the two defect chains.
pub fn build_dirty() -> TokenizerModel {
    let mut m = TokenizerModel::byte_level_base(FIXTURE_PATTERN);
    add_chain(&mut m, LONG_THAI.as_bytes());
    add_chain(&mut m, CROSS_SCRIPT.as_bytes());
    add_specials(&mut m);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_creates_every_prefix() {
        let mut m = TokenizerModel::byte_level_base("");
        add_chain(&mut m, b"abc");
        assert_eq!(m.merges, vec![Merge::new("a", "b"), Merge::new("ab", "c")]);
        assert_eq!(m.token_id("abc"), Some(257));
        add_chain(&mut m, b"abd");
        assert_eq!(m.merges.len(), 3);
        m.check().unwrap();
    }

    #[test]
    fn dirty_fixture_has_both_defects() {
        let m = build_dirty();
        let bt = ByteBijection;
        assert!(m.vocab.contains_key(&bt.encode(LONG_THAI.as_bytes())));
        assert!(LONG_THAI.len() > 32);
        assert_eq!(m.merges.last().unwrap().composed(), bt.encode(CROSS_SCRIPT.as_bytes()));
        m.check().unwrap();
    }
}

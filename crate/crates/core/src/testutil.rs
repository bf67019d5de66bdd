use alloc::string::String;

use crate::model::{Merge, TokenizerModel};

pub use crate::pretokenize::GPT2_PATTERN;

/// Byte base plus the given merges; composed tokens get IDs from 256 up in
/// merge order.
pub fn with_merges(pairs: &[(&str, &str)]) -> TokenizerModel {
    let mut m = TokenizerModel::byte_level_base(GPT2_PATTERN);
    let mut next = 256;
    for &(l, r) in pairs {
        let mut c = String::from(l);
        c.push_str(r);
        if !m.vocab.contains_key(&c) {
            m.vocab.insert(c, next);
            next += 1;
        }
        m.merges.push(Merge::new(l, r));
    }
    m
}

//! Script-prune crop: drop every token touching a pruned writing system,
//! then the lowest-firing remaining tokens until the vocabulary is exactly
//! the target size.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashSet;
use serde::{Deserialize, Serialize};

use crate::audit::FireCounts;
use crate::model::TokenizerModel;
use crate::script::ScriptTable;
use crate::TokenId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CropError {
    #[error("{0}")]
    UnknownScript(String),
    #[error("target budget {budget} exceeds vocabulary size {size}")]
    BudgetAboveSize { budget: usize, size: usize },
    #[error("script removal leaves {remaining} tokens, below the target budget {budget}")]
    Overshoot { remaining: usize, budget: usize },
    #[error("{needed} filler removals needed but only {available} removable tokens remain")]
    Unreachable { needed: usize, available: usize },
    #[error("filler removal of {0} tokens needs fire counts")]
    MissingFires(usize),
    #[error("plan removes {0:?}, which is not a removable token of this model")]
    PlanMismatch(String),
    #[error("crop produced {got} tokens instead of {want}")]
    SizeMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropPlan {
    pub prune_scripts: Vec<String>,
    pub target_budget: usize,
    pub original_size: usize,
    /// Removed-token count per writing-system class.
    pub script_removed: BTreeMap<String, usize>,
    /// Script-matched tokens, in ID order.
    pub script_matched: Vec<String>,
    /// Filler removals, lowest fire count first.
    pub filler_removed: Vec<String>,
    pub resulting_size: usize,
}

impl CropPlan {
    pub fn script_total(&self) -> usize {
        self.script_matched.len()
    }

    pub fn removed(&self) -> impl Iterator<Item = &str> {
        self.script_matched
            .iter()
            .chain(&self.filler_removed)
            .map(String::as_str)
    }
}

/// Plans the crop. Byte tokens and specials are never removed.
pub fn plan_crop(
    model: &TokenizerModel,
    table: &ScriptTable,
    prune_scripts: &[impl AsRef<str>],
    target_budget: usize,
    fires: Option<&FireCounts>,
) -> Result<CropPlan, CropError> {
    let size = model.vocab_size();
    if target_budget > size {
        return Err(CropError::BudgetAboveSize {
            budget: target_budget,
            size,
        });
    }
    let prune = table.resolve(prune_scripts).map_err(CropError::UnknownScript)?;
    let protected = model.byte_token_set();

    let mut matched = Vec::new();
    let mut script_removed: BTreeMap<String, usize> = BTreeMap::new();
    let mut rest: Vec<(&str, TokenId)> = Vec::new();
    for (tok, id) in model.vocab_by_id() {
        if protected.contains(tok) {
            continue;
        }
        let profile = table.profile_bytes(&model.token_bytes(tok));
        match profile.scripts.iter().find(|s| prune.contains(s)) {
            Some(&s) => {
                let class = table.class_name(table.class_of(s));
                *script_removed.entry(String::from(class)).or_default() += 1;
                matched.push(String::from(tok));
            }
            None => rest.push((tok, id)),
        }
    }

    let remaining = size - matched.len();
    if remaining < target_budget {
        return Err(CropError::Overshoot {
            remaining,
            budget: target_budget,
        });
    }
    let needed = remaining - target_budget;
    let mut filler = Vec::new();
    if needed > 0 {
        let fires = fires.ok_or(CropError::MissingFires(needed))?;
        if rest.len() < needed {
            return Err(CropError::Unreachable {
                needed,
                available: rest.len(),
            });
        }
        rest.sort_by_key(|&(_, id)| (fires.get(id), id));
        filler.extend(rest[..needed].iter().map(|&(t, _)| String::from(t)));
    }

    Ok(CropPlan {
        prune_scripts: prune_scripts.iter().map(|s| String::from(s.as_ref())).collect(),
        target_budget,
        original_size: size,
        script_removed,
        script_matched: matched,
        filler_removed: filler,
        resulting_size: target_budget,
    })
}

/// Applies a crop plan: removes the planned tokens, drops every merge that
/// touches a removed token, and renumbers IDs densely in their old order.
pub fn apply_crop(model: &TokenizerModel, plan: &CropPlan) -> Result<TokenizerModel, CropError> {
    let protected = model.byte_token_set();
    let removed: HashSet<&str> = plan.removed().collect();
    for tok in plan.removed() {
        if protected.contains(tok) || !model.vocab.contains_key(tok) {
            return Err(CropError::PlanMismatch(String::from(tok)));
        }
    }
    let mut out = model.clone();
    out.vocab.retain(|t, _| !removed.contains(t.as_str()));
    out.repair_closure();
    out.compact_ids();
    let got = out.vocab_size();
    if got != plan.resulting_size {
        return Err(CropError::SizeMismatch {
            got,
            want: plan.resulting_size,
        });
    }
    Ok(out)
}

/// Per-class removal table, sorted by count descending then name.
pub fn removal_table(plan: &CropPlan) -> Vec<(String, usize)> {
    let mut rows: Vec<(String, usize)> = plan.script_removed.iter().map(|(k, &v)| (k.clone(), v)).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

/// Tokens of `model` whose decoded text touches any of `scripts`.
pub fn tokens_touching(model: &TokenizerModel, table: &ScriptTable, scripts: &[impl AsRef<str>]) -> BTreeSet<String> {
    let Ok(set) = table.resolve(scripts) else {
        return BTreeSet::new();
    };
    model
        .vocab
        .keys()
        .filter(|t| {
            table
                .profile_bytes(&model.token_bytes(t))
                .scripts
                .iter()
                .any(|s| set.contains(s))
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bijection::ByteBijection;
    use crate::bpe::Tokenizer;
    use crate::model::{validate_model, Merge, SpecialToken};
    use crate::pretokenize::Gpt2Split;
    use crate::script::PRUNE_CLASSES;
    use crate::testutil::GPT2_PATTERN;
    use alloc::format;

    /// 256 bytes + 4 special-free Latin words + 40 CJK tokens = 300.
    fn fixture() -> TokenizerModel {
        let mut m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        let bt = ByteBijection;
        let mut id = 256;
        for w in ["th", "the", "he", "in"] {
            m.vocab.insert(w.into(), id);
            id += 1;
        }
        m.merges.push(Merge::new("t", "h"));
        m.merges.push(Merge::new("th", "e"));
        m.merges.push(Merge::new("h", "e"));
        m.merges.push(Merge::new("i", "n"));
        // 20 two-byte prefixes of CJK ideographs plus 20 full ideographs
        for k in 0..20u32 {
            let c = char::from_u32(0x4E00 + k * 64).unwrap();
            let bytes = format!("{c}");
            let enc = bt.encode(bytes.as_bytes());
            let chars: Vec<char> = enc.chars().collect();
            let head: String = chars[..2].iter().collect();
            let tail: String = chars[2..].iter().collect();
            if !m.vocab.contains_key(&head) {
                m.vocab.insert(head.clone(), id);
                id += 1;
                m.merges
                    .push(Merge::new(String::from(chars[0]), String::from(chars[1])));
            }
            m.vocab.insert(enc.clone(), id);
            id += 1;
            m.merges.push(Merge::new(head, tail));
        }
        assert!(m.check().is_ok());
        m
    }

    /// Removable (multi-byte-token) CJK entries.
    fn cjk_count(m: &TokenizerModel) -> usize {
        let bytes = m.byte_token_set();
        tokens_touching(m, &ScriptTable::default(), &["Han"])
            .iter()
            .filter(|t| !bytes.contains(t.as_str()))
            .count()
    }

    #[test]
    fn script_only_crop() {
        let m = fixture();
        let size = m.vocab_size();
        let n_cjk = cjk_count(&m);
        let plan = plan_crop(&m, &ScriptTable::default(), &PRUNE_CLASSES, size - n_cjk, None).unwrap();
        assert_eq!(plan.script_total(), n_cjk);
        assert!(plan.filler_removed.is_empty());
        assert_eq!(plan.script_removed.get("Han"), Some(&n_cjk));
        let out = apply_crop(&m, &plan).unwrap();
        assert_eq!(out.vocab_size(), size - n_cjk);
        assert!(validate_model(&out).is_clean());
        assert_eq!(cjk_count(&m), 40);
        assert_eq!(cjk_count(&out), 0);
    }

    #[test]
    fn filler_takes_lowest_fires() {
        let m = fixture();
        let size = m.vocab_size();
        let n_cjk = cjk_count(&m);
        let mut fires = FireCounts::new(m.declared_size());
        let t = Tokenizer::new(&m, Gpt2Split).unwrap();
        fires.add(None, &t.encode_ids(b"the then in in in hello"));
        let plan = plan_crop(
            &m,
            &ScriptTable::default(),
            &PRUNE_CLASSES,
            size - n_cjk - 2,
            Some(&fires),
        )
        .unwrap();
        assert_eq!(plan.filler_removed.len(), 2);
        // brute force: lowest (fires, id) among non-byte, non-CJK tokens
        let mut cands: Vec<(u64, TokenId, String)> = m
            .vocab
            .iter()
            .filter(|(t, &id)| id >= 256 && !tokens_touching(&m, &ScriptTable::default(), &["Han"]).contains(*t))
            .map(|(t, &id)| (fires.get(id), id, t.clone()))
            .collect();
        cands.sort();
        let want: Vec<String> = cands.into_iter().take(2).map(|c| c.2).collect();
        assert_eq!(plan.filler_removed, want);
        let out = apply_crop(&m, &plan).unwrap();
        assert!(validate_model(&out).is_clean());
    }

    #[test]
    fn filler_without_fires_is_an_error() {
        let m = fixture();
        let err = plan_crop(&m, &ScriptTable::default(), &PRUNE_CLASSES, 259, None).unwrap_err();
        assert!(matches!(err, CropError::MissingFires(_)));
    }

    #[test]
    fn identity_plan() {
        let m = fixture();
        let none: [&str; 0] = [];
        let plan = plan_crop(&m, &ScriptTable::default(), &none, m.vocab_size(), None).unwrap();
        assert_eq!(plan.script_total() + plan.filler_removed.len(), 0);
        assert_eq!(apply_crop(&m, &plan).unwrap(), m);
    }

    #[test]
    fn overshoot_and_unreachable() {
        let m = fixture();
        let err = plan_crop(&m, &ScriptTable::default(), &PRUNE_CLASSES, m.vocab_size() - 1, None).unwrap_err();
        assert!(matches!(err, CropError::Overshoot { .. }));
        let fires = FireCounts::new(m.declared_size());
        let err = plan_crop(&m, &ScriptTable::default(), &PRUNE_CLASSES, 200, Some(&fires)).unwrap_err();
        assert!(matches!(err, CropError::Unreachable { .. }));
    }

    #[test]
    fn cropped_script_falls_back_to_bytes() {
        let m = fixture();
        let n_cjk = cjk_count(&m);
        let plan = plan_crop(
            &m,
            &ScriptTable::default(),
            &PRUNE_CLASSES,
            m.vocab_size() - n_cjk,
            None,
        )
        .unwrap();
        let out = apply_crop(&m, &plan).unwrap();
        let t = Tokenizer::new(&out, Gpt2Split).unwrap();
        let text = "\u{4E00}\u{4E40}";
        assert_eq!(t.encode_ids(text.as_bytes()).len(), 6);
        // English encoding unchanged
        let before = Tokenizer::new(&m, Gpt2Split).unwrap();
        let s = b"the thin hen";
        assert_eq!(before.encode(s).surfaces, t.encode(s).surfaces);
    }

    #[test]
    fn specials_survive_and_are_renumbered() {
        let mut m = fixture();
        let top = m.declared_size() as TokenId;
        m.special_tokens.push(SpecialToken {
            content: "<|eot|>".into(),
            id: top,
            pinned: true,
        });
        let n_cjk = cjk_count(&m);
        let plan = plan_crop(
            &m,
            &ScriptTable::default(),
            &PRUNE_CLASSES,
            m.vocab_size() - n_cjk,
            None,
        )
        .unwrap();
        let out = apply_crop(&m, &plan).unwrap();
        assert_eq!(out.special_tokens[0].id as usize, out.vocab_size() - 1);
        assert_eq!(out.declared_size(), out.vocab_size());
    }
}

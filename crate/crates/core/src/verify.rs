//! Structural verification checks: cross-script merges, byte-length
//! ceiling, normal-vocabulary identity between two models, and the
//! multi-model summary table.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::TokenizerModel;
use crate::script::{ScriptTable, BRAHMIC_SCRIPTS};

pub const DEFAULT_CEILING: usize = 32;
const MAX_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    /// Passing, with differences confined to places the check tolerates.
    PassWithNotes,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub check: String,
    /// `(label, value)` lines, in print order.
    pub lines: Vec<(String, String)>,
    pub scanned: usize,
    pub violations: usize,
    pub verdict: Verdict,
    pub samples: Vec<String>,
    pub notes: Vec<String>,
    pub summary: String,
}

impl VerifyReport {
    fn new(check: &str, scanned: usize, violations: usize, samples: Vec<String>, pass: &str, fail: &str) -> Self {
        let verdict = if violations == 0 { Verdict::Pass } else { Verdict::Fail };
        VerifyReport {
            check: String::from(check),
            lines: Vec::new(),
            scanned,
            violations,
            verdict,
            samples,
            notes: Vec::new(),
            summary: String::from(if violations == 0 { pass } else { fail }),
        }
    }

    fn line(mut self, label: &str, value: impl fmt::Display) -> Self {
        self.lines.push((String::from(label), format!("{value}")));
        self
    }
}

/// Thousands separators, `131072` → `131,072`.
pub fn group_digits(n: usize) -> String {
    let s = format!("{n}");
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.lines.iter().map(|(l, _)| l.len() + 1).max().unwrap_or(0) + 2;
        for (label, value) in &self.lines {
            writeln!(f, "{:<width$}{value}", format!("{label}:"))?;
        }
        for s in &self.samples {
            writeln!(f, "  violation: {s}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        let tag = match self.verdict {
            Verdict::Pass | Verdict::PassWithNotes => "PASS",
            Verdict::Fail => "FAIL",
        };
        write!(f, "{tag}: {}", self.summary)
    }
}

/// Profiles every merge's composed surface; a merge whose result spans two
/// disjoint writing systems is a violation.
pub fn verify_no_cross_script_merges(model: &TokenizerModel, table: &ScriptTable) -> VerifyReport {
    let mut bytes = Vec::new();
    let mut violations = 0;
    let mut samples = Vec::new();
    for m in &model.merges {
        bytes.clear();
        crate::model::token_bytes_into(model.alphabet, &m.left, &mut bytes);
        crate::model::token_bytes_into(model.alphabet, &m.right, &mut bytes);
        if table.profile_bytes(&bytes).is_cross_script {
            violations += 1;
            if samples.len() < MAX_SAMPLES {
                samples.push(format!("{} {}", m.left, m.right));
            }
        }
    }
    VerifyReport::new(
        "merges",
        model.merges.len(),
        violations,
        samples,
        "no cross-script entries in the merge list.",
        "cross-script entries found in the merge list.",
    )
    .line("merge-rule entries", group_digits(model.merges.len()))
    .line("cross-script", violations)
}

/// Counts normal tokens whose decoded length exceeds `ceiling` bytes.
pub fn verify_max_byte_length(model: &TokenizerModel, ceiling: usize) -> VerifyReport {
    let mut over = 0;
    let mut max = 0;
    let mut samples = Vec::new();
    for (t, _) in model.vocab_by_id() {
        let n = model.token_bytes(t).len();
        max = max.max(n);
        if n > ceiling {
            over += 1;
            if samples.len() < MAX_SAMPLES {
                samples.push(format!("{t} ({n} bytes)"));
            }
        }
    }
    let normal = model.vocab.len();
    VerifyReport::new(
        "bytes",
        normal,
        over,
        samples,
        &format!("all {} normal tokens are within {ceiling} bytes.", group_digits(normal)),
        &format!("{over} normal tokens exceed {ceiling} bytes."),
    )
    .line("vocab size", group_digits(model.declared_size()))
    .line("max_bytes limit", ceiling)
    .line(&format!("tokens > {ceiling} bytes"), over)
    .line("longest token", format!("{max} bytes"))
}

/// Normal vocabulary (token → ID) and merge list must match exactly.
/// Special-token differences are reported as notes and do not fail.
pub fn verify_structural_identity(a: &TokenizerModel, b: &TokenizerModel) -> VerifyReport {
    let mut samples = Vec::new();
    let mut vocab_diffs = 0;
    for (t, id) in &a.vocab {
        if b.vocab.get(t) != Some(id) {
            vocab_diffs += 1;
            if samples.len() < MAX_SAMPLES {
                samples.push(format!("vocab {t:?}: {id} vs {:?}", b.vocab.get(t)));
            }
        }
    }
    for (t, id) in &b.vocab {
        if !a.vocab.contains_key(t) {
            vocab_diffs += 1;
            if samples.len() < MAX_SAMPLES {
                samples.push(format!("vocab {t:?}: absent vs {id}"));
            }
        }
    }
    let merge_diffs =
        a.merges.len().abs_diff(b.merges.len()) + a.merges.iter().zip(&b.merges).filter(|(x, y)| x != y).count();
    if merge_diffs > 0 && samples.len() < MAX_SAMPLES {
        if let Some((rank, (x, y))) = a.merges.iter().zip(&b.merges).enumerate().find(|(_, (x, y))| x != y) {
            samples.push(format!(
                "merge rank {rank}: {} {} vs {} {}",
                x.left, x.right, y.left, y.right
            ));
        } else {
            samples.push(format!("merge count {} vs {}", a.merges.len(), b.merges.len()));
        }
    }
    let mut special_notes = Vec::new();
    let sa: BTreeMap<&str, u32> = a.special_tokens.iter().map(|s| (s.content.as_str(), s.id)).collect();
    let sb: BTreeMap<&str, u32> = b.special_tokens.iter().map(|s| (s.content.as_str(), s.id)).collect();
    for (c, id) in &sa {
        match sb.get(c) {
            Some(j) if j == id => {}
            Some(j) => special_notes.push(format!("special {c:?}: {id} vs {j}")),
            None => special_notes.push(format!("special {c:?}: only in first ({id})")),
        }
    }
    for (c, id) in &sb {
        if !sa.contains_key(c) {
            special_notes.push(format!("special {c:?}: only in second ({id})"));
        }
    }
    let violations = vocab_diffs + merge_diffs;
    let mut r = VerifyReport::new(
        "identity",
        a.vocab.len() + a.merges.len(),
        violations,
        samples,
        "merge table and normal vocabulary are byte-identical.",
        "merge table or normal vocabulary differ.",
    )
    .line(
        "normal tokens",
        format!("{} vs {}", group_digits(a.vocab.len()), group_digits(b.vocab.len())),
    )
    .line(
        "merge-rule entries",
        format!("{} vs {}", group_digits(a.merges.len()), group_digits(b.merges.len())),
    )
    .line("vocab differences", vocab_diffs)
    .line("merge differences", merge_diffs)
    .line("special-slot differences", special_notes.len());
    if violations == 0 && !special_notes.is_empty() {
        r.verdict = Verdict::PassWithNotes;
        r.summary = String::from("byte-identical apart from special-token slots.");
    }
    r.notes = special_notes;
    r
}

/// One row of the multi-model structural table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedRow {
    pub name: String,
    pub pre_tokenizer: String,
    pub vocab: usize,
    pub max_bytes: usize,
    pub over_ceiling: usize,
    pub cross_script: usize,
    pub both_clean: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedReport {
    pub ceiling: usize,
    pub rows: Vec<UnifiedRow>,
}

impl UnifiedReport {
    pub fn all_clean(&self) -> bool {
        self.rows.iter().all(|r| r.both_clean)
    }
}

/// Per-model byte-ceiling and cross-script-token counts, in input order.
pub fn verify_unified(models: &[(&str, &TokenizerModel)], table: &ScriptTable, ceiling: usize) -> UnifiedReport {
    let rows = models
        .iter()
        .map(|(name, m)| {
            let mut max_bytes = 0;
            let mut over = 0;
            let mut cross = 0;
            for t in m.vocab.keys() {
                let bytes = m.token_bytes(t);
                max_bytes = max_bytes.max(bytes.len());
                over += usize::from(bytes.len() > ceiling);
                cross += usize::from(table.profile_bytes(&bytes).is_cross_script);
            }
            UnifiedRow {
                name: String::from(*name),
                pre_tokenizer: String::from(m.alphabet.family()),
                vocab: m.declared_size(),
                max_bytes,
                over_ceiling: over,
                cross_script: cross,
                both_clean: over == 0 && cross == 0,
            }
        })
        .collect();
    UnifiedReport { ceiling, rows }
}

/// Tokens containing at least one whole character of each Brahmic script,
/// plus the number of tokens containing any of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptCounts {
    pub per_script: BTreeMap<String, usize>,
    pub total: usize,
}

pub fn brahmic_token_counts(model: &TokenizerModel, table: &ScriptTable) -> ScriptCounts {
    let ids: Vec<(u16, &str)> = BRAHMIC_SCRIPTS
        .iter()
        .filter_map(|n| table.script_id(n).map(|id| (id, *n)))
        .collect();
    let mut per_script: BTreeMap<String, usize> = ids.iter().map(|(_, n)| (String::from(*n), 0)).collect();
    let mut total = 0;
    for t in model.vocab.keys() {
        let p = table.profile_bytes(&model.token_bytes(t));
        let mut any = false;
        for (id, name) in &ids {
            if p.whole_char_scripts.contains(id) {
                *per_script.get_mut(*name).expect("seeded") += 1;
                any = true;
            }
        }
        total += usize::from(any);
    }
    ScriptCounts { per_script, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bijection::ByteBijection;
    use crate::model::{Merge, SpecialToken, TokenAlphabet};
    use crate::testutil::{with_merges, GPT2_PATTERN};
    use alloc::string::ToString;

    fn enc(s: &str) -> String {
        ByteBijection.encode(s.as_bytes())
    }

    #[test]
    fn cross_script_merge_fails() {
        let table = ScriptTable::default();
        let m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        assert_eq!(verify_no_cross_script_merges(&m, &table).verdict, Verdict::Pass);
        let mut m = with_merges(&[("a", "b")]);
        let na = enc("न");
        m.vocab.insert(na.clone(), 300);
        m.vocab.insert(format!("a{na}"), 301);
        m.merges.push(Merge::new("a", na));
        let r = verify_no_cross_script_merges(&m, &table);
        assert_eq!((r.violations, r.verdict), (1, Verdict::Fail));
        assert!(r
            .to_string()
            .ends_with("FAIL: cross-script entries found in the merge list."));
    }

    #[test]
    fn byte_ceiling() {
        let m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        assert_eq!(verify_max_byte_length(&m, 1).verdict, Verdict::Pass);
        let mut m = m;
        m.vocab.insert("a".repeat(33), 256);
        let r = verify_max_byte_length(&m, 32);
        assert_eq!((r.violations, r.verdict), (1, Verdict::Fail));
        let text = verify_max_byte_length(&TokenizerModel::byte_level_base(GPT2_PATTERN), 32).to_string();
        assert!(text.contains("vocab size:"));
        assert!(text.ends_with("PASS: all 256 normal tokens are within 32 bytes."));
    }

    #[test]
    fn identity_and_special_notes() {
        let a = with_merges(&[("a", "b")]);
        assert_eq!(verify_structural_identity(&a, &a).verdict, Verdict::Pass);
        let mut b = a.clone();
        b.special_tokens.push(SpecialToken {
            content: "<s>".into(),
            id: 257,
            pinned: true,
        });
        let r = verify_structural_identity(&a, &b);
        assert_eq!(r.verdict, Verdict::PassWithNotes);
        assert_eq!(r.notes.len(), 1);
        let mut c = a.clone();
        c.vocab.remove("ab");
        c.vocab.insert("ba".into(), 256);
        assert_eq!(verify_structural_identity(&a, &c).verdict, Verdict::Fail);
    }

    #[test]
    fn unified_rows() {
        let table = ScriptTable::default();
        let clean = with_merges(&[("t", "h")]);
        let mut dirty = clean.clone();
        dirty.vocab.insert(format!("a{}", enc("中")), 257);
        let mut sp = TokenizerModel::byte_level_base(GPT2_PATTERN);
        sp.alphabet = TokenAlphabet::Metaspace;
        sp.vocab = [("▁hello".to_string(), 0), ("<0x41>".to_string(), 1)]
            .into_iter()
            .collect();
        let r = verify_unified(&[("clean", &clean), ("dirty", &dirty), ("sp", &sp)], &table, 32);
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows[0].both_clean);
        assert_eq!(r.rows[0].vocab, 257);
        assert!(!r.rows[1].both_clean);
        assert_eq!(r.rows[1].cross_script, 1);
        assert_eq!(r.rows[2].max_bytes, 6);
        assert!(!r.all_clean());
    }

    #[test]
    fn brahmic_counts() {
        let table = ScriptTable::default();
        let mut m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        for (i, w) in ["ଓଡ", "ଆ", "नम", "ক"].iter().enumerate() {
            m.vocab.insert(enc(w), 256 + i as u32);
        }
        // partial bytes do not count
        m.vocab.insert(enc("ଓ")[..2].to_string(), 260);
        let c = brahmic_token_counts(&m, &table);
        assert_eq!(c.per_script["Oriya"], 2);
        assert_eq!(c.per_script["Devanagari"], 1);
        assert_eq!(c.total, 4);
    }

    #[test]
    fn digit_grouping() {
        assert_eq!(group_digits(301398), "301,398");
        assert_eq!(group_digits(0), "0");
        assert_eq!(group_digits(999), "999");
    }
}

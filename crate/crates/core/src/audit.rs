//! Corpus fire counts, dead-slot detection, byte-fragment rates, the
//! garbage-token classifier and the machine-checkable audit suite.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bpe::Tokenizer;
use crate::model::{special_overlaps, validate_model, Finding, TokenAlphabet, TokenizerModel};
use crate::script::{ScriptTable, BRAHMIC_SCRIPTS};
use crate::TokenId;

/// One corpus document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Doc<'a> {
    pub lang: Option<&'a str>,
    pub text: &'a [u8],
}

impl<'a> Doc<'a> {
    pub fn new(lang: Option<&'a str>, text: &'a [u8]) -> Self {
        Doc { lang, text }
    }
}

/// Per-ID occurrence counts from tokenizing a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FireCounts {
    pub counts: Vec<u64>,
    pub total_tokens: u64,
    /// Language → per-ID counts, for documents that carried a language tag.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_language: BTreeMap<String, Vec<u64>>,
}

impl FireCounts {
    pub fn new(id_space: usize) -> Self {
        FireCounts {
            counts: vec![0; id_space],
            total_tokens: 0,
            per_language: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: TokenId) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn add(&mut self, lang: Option<&str>, ids: &[TokenId]) {
        for &id in ids {
            self.counts[id as usize] += 1;
        }
        self.total_tokens += ids.len() as u64;
        if let Some(lang) = lang {
            let size = self.counts.len();
            let per = self
                .per_language
                .entry(String::from(lang))
                .or_insert_with(|| vec![0; size]);
            for &id in ids {
                per[id as usize] += 1;
            }
        }
    }

    /// Adds `other` into `self`. Addition is associative and commutative, so
    /// any sharding of a corpus merges to the same counts.
    pub fn merge(&mut self, other: &FireCounts) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_tokens += other.total_tokens;
        for (lang, theirs) in &other.per_language {
            let mine = self.per_language.entry(lang.clone()).or_default();
            if mine.len() < theirs.len() {
                mine.resize(theirs.len(), 0);
            }
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }

    /// Occurrences per 10^9 corpus tokens.
    pub fn rate_per_billion(&self, id: TokenId) -> f64 {
        if self.total_tokens == 0 {
            return 0.0;
        }
        self.get(id) as f64 * 1e9 / self.total_tokens as f64
    }

    /// Exact `rate(id) <= floor` without floating point.
    pub fn rate_at_most(&self, id: TokenId, floor_per_billion: u64) -> bool {
        (self.get(id) as u128) * 1_000_000_000 <= (floor_per_billion as u128) * (self.total_tokens as u128)
    }
}

/// Sequential fire counting. See the `retok` crate for the parallel driver.
pub fn count_fires<'a>(tokenizer: &Tokenizer, docs: impl IntoIterator<Item = Doc<'a>>) -> FireCounts {
    let mut fires = FireCounts::new(tokenizer.encoder().id_space());
    let mut ids = Vec::new();
    for doc in docs {
        ids.clear();
        tokenizer.encode_ids_into(doc.text, &mut ids);
        fires.add(doc.lang, &ids);
    }
    fires
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadSlotReport {
    /// IDs that never fired.
    pub zero_fire: Vec<TokenId>,
    /// IDs with `0 < rate <= floor` that the policy allows removing,
    /// lowest count first.
    pub marginal: Vec<TokenId>,
    pub floor_per_billion: u64,
    pub kept_median: f64,
    pub dropped_median: f64,
}

impl DeadSlotReport {
    /// Zero-fire IDs, then marginal ones.
    pub fn candidates(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.zero_fire.iter().chain(&self.marginal).copied()
    }

    pub fn len(&self) -> usize {
        self.zero_fire.len() + self.marginal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits IDs into never-fired and marginal (at or under `floor`, per
/// billion). Marginal IDs are kept only where `policy(id)` holds.
pub fn find_dead_slots(fires: &FireCounts, floor_per_billion: u64, policy: impl Fn(TokenId) -> bool) -> DeadSlotReport {
    let mut zero = Vec::new();
    let mut marginal = Vec::new();
    let mut kept_rates = Vec::new();
    let mut dropped_rates = Vec::new();
    for id in 0..fires.counts.len() as TokenId {
        let rate = fires.rate_per_billion(id);
        if fires.get(id) == 0 {
            zero.push(id);
            dropped_rates.push(rate);
        } else if fires.rate_at_most(id, floor_per_billion) && policy(id) {
            marginal.push(id);
            dropped_rates.push(rate);
        } else {
            kept_rates.push(rate);
        }
    }
    marginal.sort_by_key(|&id| (fires.get(id), id));
    DeadSlotReport {
        zero_fire: zero,
        marginal,
        floor_per_billion,
        kept_median: median(&mut kept_rates),
        dropped_median: median(&mut dropped_rates),
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Fragment tallies for one language (or the whole corpus).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FragmentCount {
    pub fragments: u64,
    pub tokens: u64,
}

impl FragmentCount {
    pub fn rate(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.fragments as f64 / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FragmentReport {
    pub overall: FragmentCount,
    pub per_language: BTreeMap<String, FragmentCount>,
}

/// Counts emitted tokens that begin inside a character (first byte is a
/// UTF-8 continuation byte). A character split into `k` tokens contributes
/// `k - 1` fragments.
pub fn byte_fragment_rate<'a>(tokenizer: &Tokenizer, docs: impl IntoIterator<Item = Doc<'a>>) -> FragmentReport {
    let enc = tokenizer.encoder();
    let mut report = FragmentReport::default();
    let mut ids = Vec::new();
    for doc in docs {
        ids.clear();
        tokenizer.encode_ids_into(doc.text, &mut ids);
        let frags = ids
            .iter()
            .filter(|&&id| {
                enc.token_bytes(id)
                    .and_then(|b| b.first())
                    .is_some_and(|b| b & 0xC0 == 0x80)
            })
            .count() as u64;
        let add = |c: &mut FragmentCount| {
            c.fragments += frags;
            c.tokens += ids.len() as u64;
        };
        add(&mut report.overall);
        if let Some(lang) = doc.lang {
            add(report.per_language.entry(String::from(lang)).or_default());
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GarbageClass {
    BrokenUtf8,
    ZwspBidi,
    PrivateUse,
    HtmlEntity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarbageToken {
    pub id: TokenId,
    pub token: String,
    pub class: GarbageClass,
}

const CONTROL_MARKS: [char; 9] = [
    '\u{200B}', '\u{202A}', '\u{202B}', '\u{202C}', '\u{202D}', '\u{202E}', '\u{FEFF}', '\u{2060}', '\u{FFFD}',
];

fn is_private_use(c: char) -> bool {
    matches!(c as u32, 0xE000..=0xF8FF | 0xF0000..=0xFFFFD | 0x100000..=0x10FFFD)
}

fn has_html_entity(s: &str) -> bool {
    if s.contains("&#") {
        return true;
    }
    let b = s.as_bytes();
    for (i, _) in s.match_indices('&') {
        let name_len = b[i + 1..].iter().take_while(|c| c.is_ascii_alphabetic()).count();
        if (2..=8).contains(&name_len) && b.get(i + 1 + name_len) == Some(&b';') {
            return true;
        }
    }
    false
}

/// Classifies a token's raw bytes; `None` when clean.
pub fn garbage_class(bytes: &[u8]) -> Option<GarbageClass> {
    let text = String::from_utf8_lossy(bytes);
    if text.contains('\u{FFFD}') {
        return Some(GarbageClass::BrokenUtf8);
    }
    if text.chars().any(|c| CONTROL_MARKS[..8].contains(&c)) {
        return Some(GarbageClass::ZwspBidi);
    }
    if text.chars().any(is_private_use) {
        return Some(GarbageClass::PrivateUse);
    }
    if has_html_entity(&text) {
        return Some(GarbageClass::HtmlEntity);
    }
    None
}

/// Flags normal tokens in four garbage classes. The 256 single-byte tokens
/// are never flagged.
pub fn classify_garbage(model: &TokenizerModel) -> Vec<GarbageToken> {
    let bytes = model.byte_token_set();
    let mut out: Vec<GarbageToken> = model
        .vocab_by_id()
        .into_iter()
        .filter(|(t, _)| !bytes.contains(*t))
        .filter_map(|(t, id)| {
            garbage_class(&model.token_bytes(t)).map(|class| GarbageToken {
                id,
                token: String::from(t),
                class,
            })
        })
        .collect();
    out.sort_by_key(|g| g.id);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AuditStatus {
    Pass,
    Fail,
    /// Reported, not judged.
    Info,
    /// Needed input was not supplied.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditResult {
    pub test: u8,
    pub name: String,
    pub status: AuditStatus,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub results: Vec<AuditResult>,
}

impl AuditReport {
    pub fn count(&self, status: AuditStatus) -> usize {
        self.results.iter().filter(|r| r.status == status).count()
    }

    pub fn get(&self, test: u8) -> Option<&AuditResult> {
        self.results.iter().find(|r| r.test == test)
    }

    pub fn all_pass(&self) -> bool {
        self.count(AuditStatus::Fail) == 0
    }
}

/// Outcome of the file-level checks, supplied by the IO layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadEvidence {
    pub parsed: bool,
    /// Load → save → load reproduced an identical model.
    pub reloaded_identical: bool,
}

#[derive(Debug, Clone)]
pub struct AuditInputs<'a> {
    /// Round-trip and fragment-rate corpus.
    pub corpus: &'a [Doc<'a>],
    /// Expected segmentation pattern; `None` skips the comparison.
    pub reference_pattern: Option<&'a str>,
    /// `(surface, id)` placements the specials must occupy.
    pub expected_specials: &'a [(String, TokenId)],
    pub load: Option<LoadEvidence>,
    /// Largest acceptable byte-fragment rate per language.
    pub fragment_ceiling: f64,
    /// Largest acceptable fraction of garbage-classified tokens.
    pub garbage_ceiling: f64,
}

impl Default for AuditInputs<'_> {
    fn default() -> Self {
        AuditInputs {
            corpus: &[],
            reference_pattern: None,
            expected_specials: &[],
            load: None,
            fragment_ceiling: 0.005,
            garbage_ceiling: 0.001,
        }
    }
}

/// The thirteen edge-case inputs of the byte-fallback test.
pub fn edge_case_inputs() -> Vec<(&'static str, Vec<u8>)> {
    let mut zwsp = Vec::new();
    for _ in 0..50 {
        zwsp.extend_from_slice("ab\u{200B}".as_bytes());
    }
    vec![
        ("empty", Vec::new()),
        ("lone space", b" ".to_vec()),
        ("lone newline", b"\n".to_vec()),
        ("null bytes", b"\0a\0\0b\0".to_vec()),
        ("byte-order mark", "\u{FEFF}hello".as_bytes().to_vec()),
        ("10k ascii run", "a".repeat(10_000).into_bytes()),
        ("100 emoji", "😀".repeat(100).into_bytes()),
        ("50 zero-width spaces", zwsp),
        ("mixed scripts", "Hello नमस्ते ଓଡ଼ିଆ 你好 Привет 123 🎉".as_bytes().to_vec()),
        ("leading whitespace", b"   \t leading".to_vec()),
        ("trailing whitespace", b"trailing \t  ".to_vec()),
        ("crlf", b"line one\r\nline two\r\n".to_vec()),
        ("whitespace runs", b"\t\t  \n\n \n   ".to_vec()),
    ]
}

fn result(test: u8, name: &str, ok: bool, evidence: String) -> AuditResult {
    AuditResult {
        test,
        name: String::from(name),
        status: if ok { AuditStatus::Pass } else { AuditStatus::Fail },
        evidence,
    }
}

fn info(test: u8, name: &str, status: AuditStatus, evidence: String) -> AuditResult {
    AuditResult {
        test,
        name: String::from(name),
        status,
        evidence,
    }
}

/// Runs the audit catalog. Failures are findings, never errors.
pub fn run_audit_suite(
    model: &TokenizerModel,
    tokenizer: &Tokenizer,
    table: &ScriptTable,
    inputs: &AuditInputs<'_>,
) -> AuditReport {
    let enc = tokenizer.encoder();
    let validation = validate_model(model);
    let count = |pred: fn(&Finding) -> bool| validation.count(pred);
    let byte_set = model.byte_token_set();
    let mut r = Vec::with_capacity(23);

    // 1-5: vocabulary integrity
    let declared = model.declared_size();
    let distinct = model.vocab_size();
    r.push(result(
        1,
        "vocabulary count matches declaration",
        declared == distinct,
        format!("declared {declared}, distinct ids {distinct}"),
    ));
    let dups = count(|f| matches!(f, Finding::DuplicateId { .. }));
    r.push(result(
        2,
        "no duplicate token ids",
        dups == 0,
        format!("{dups} duplicate ids"),
    ));
    let invalid = count(|f| matches!(f, Finding::InvalidEncoding { .. }))
        + count(|f| matches!(f, Finding::MissingByteToken { .. }));
    r.push(result(
        3,
        "vocabulary entries are well-formed",
        invalid == 0,
        format!("{invalid} malformed or missing entries"),
    ));
    let controls = model
        .vocab
        .keys()
        .filter(|t| !byte_set.contains(*t))
        .filter(|t| {
            String::from_utf8_lossy(&model.token_bytes(t))
                .chars()
                .any(|c| c.is_control() && !matches!(c, '\t' | '\n' | '\r' | '\u{0B}' | '\u{0C}'))
        })
        .count();
    r.push(result(
        4,
        "no control characters beyond whitespace",
        controls == 0,
        format!("{controls} tokens with control characters"),
    ));
    r.push(match inputs.reference_pattern {
        Some(p) => result(
            5,
            "pre-tokenizer matches reference",
            p == model.pretokenizer_pattern,
            format!(
                "pattern {} reference",
                if p == model.pretokenizer_pattern {
                    "equals"
                } else {
                    "differs from"
                }
            ),
        ),
        None => info(
            5,
            "pre-tokenizer matches reference",
            AuditStatus::Skip,
            String::from("no reference pattern"),
        ),
    });

    // 6-10: special tokens
    let specials = &model.special_tokens;
    let mut ids: Vec<TokenId> = specials.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut surfaces: Vec<&str> = specials.iter().map(|s| s.content.as_str()).collect();
    surfaces.sort_unstable();
    surfaces.dedup();
    let unique = ids.len() == specials.len() && surfaces.len() == specials.len();
    r.push(result(
        6,
        "special tokens have unique ids and surfaces",
        unique,
        format!(
            "{} specials, {} distinct ids, {} distinct surfaces",
            specials.len(),
            ids.len(),
            surfaces.len()
        ),
    ));
    let bad_literal = specials
        .iter()
        .filter(|s| enc.decode(&[s.id]).map_or(true, |b| b != s.content.as_bytes()))
        .count();
    r.push(result(
        7,
        "special tokens decode to their literals",
        bad_literal == 0,
        format!("{bad_literal} specials decode differently"),
    ));
    let overlaps = special_overlaps(model).len();
    r.push(result(
        8,
        "no special-token overlap with normal tokens",
        overlaps == 0,
        format!("{overlaps} overlapping surfaces"),
    ));
    if inputs.expected_specials.is_empty() {
        r.push(info(
            9,
            "special-token placements",
            AuditStatus::Skip,
            String::from("no expected placements"),
        ));
    } else {
        let misplaced: Vec<String> = inputs
            .expected_specials
            .iter()
            .filter(|(surface, id)| !specials.iter().any(|s| &s.content == surface && s.id == *id))
            .map(|(s, id)| format!("{s}@{id}"))
            .collect();
        r.push(result(
            9,
            "special-token placements",
            misplaced.is_empty(),
            format!("misplaced: {misplaced:?}"),
        ));
    }
    let floor = model.vocab_size().saturating_sub(specials.len()) as TokenId;
    let low: Vec<TokenId> = specials
        .iter()
        .filter(|s| !inputs.expected_specials.iter().any(|(c, _)| *c == s.content))
        .filter(|s| s.id < floor)
        .map(|s| s.id)
        .collect();
    r.push(result(
        10,
        "reserved specials occupy the top id range",
        low.is_empty(),
        format!("{} specials below id {floor}", low.len()),
    ));

    // 11-13: edge cases and byte fallback
    let mut failed = Vec::new();
    for (name, input) in edge_case_inputs() {
        let ids = tokenizer.encode_ids(&input);
        let ok = ids.iter().all(|&id| enc.contains_id(id))
            && tokenizer.decode(&ids).as_deref() == Ok(input.as_slice())
            && (!input.is_empty() || ids.is_empty());
        if !ok {
            failed.push(name);
        }
    }
    r.push(result(
        11,
        "edge-case inputs encode and decode cleanly",
        failed.is_empty(),
        format!("13 inputs, failures: {failed:?}"),
    ));
    let trips = inputs
        .corpus
        .iter()
        .filter(|d| tokenizer.decode(&tokenizer.encode_ids(d.text)).as_deref() == Ok(d.text))
        .count();
    r.push(if inputs.corpus.is_empty() {
        info(12, "round-trip integrity", AuditStatus::Skip, String::from("no corpus"))
    } else {
        result(
            12,
            "round-trip integrity",
            trips == inputs.corpus.len(),
            format!("{trips}/{} byte-perfect", inputs.corpus.len()),
        )
    });
    let frag = byte_fragment_rate(tokenizer, inputs.corpus.iter().copied());
    r.push(if inputs.corpus.is_empty() {
        info(13, "byte-fragment rate", AuditStatus::Skip, String::from("no corpus"))
    } else {
        result(
            13,
            "byte-fragment rate",
            frag.overall.rate() <= inputs.fragment_ceiling,
            format!("corpus-wide {:.4}%", frag.overall.rate() * 100.0),
        )
    });

    // 14-18: multilingual coverage
    let mut per_script = BTreeMap::new();
    for name in BRAHMIC_SCRIPTS {
        if let Some(id) = table.script_id(name) {
            let n = model
                .vocab
                .keys()
                .filter(|t| {
                    table
                        .profile_bytes(&model.token_bytes(t))
                        .whole_char_scripts
                        .contains(&id)
                })
                .count();
            per_script.insert(name, n);
        }
    }
    r.push(info(
        14,
        "per-script vocabulary coverage",
        AuditStatus::Info,
        format!("{per_script:?}"),
    ));
    let worst = frag.per_language.iter().map(|(l, c)| (l.as_str(), c.rate())).fold(
        None,
        |acc: Option<(&str, f64)>, x| match acc {
            Some(a) if a.1 >= x.1 => Some(a),
            _ => Some(x),
        },
    );
    r.push(info(
        15,
        "per-language byte-fragment rates",
        AuditStatus::Info,
        match worst {
            Some((l, rate)) => format!("highest {l} at {:.4}%", rate * 100.0),
            None => String::from("no language-tagged corpus"),
        },
    ));
    let space_ok = model.alphabet != TokenAlphabet::ByteLevel
        || (model.byte_token(b' ') == "Ġ"
            && tokenizer
                .encode(b" hello")
                .surfaces
                .first()
                .is_some_and(|s| s.starts_with('Ġ')));
    r.push(result(
        16,
        "whitespace keeps the Ġ space-prefix convention",
        space_ok,
        format!("space token {:?}", model.byte_token(b' ')),
    ));
    r.push(info(
        17,
        "adversarial token injection",
        AuditStatus::Info,
        String::from("U+202E/U+200B pass through unchanged; sanitization is an application-layer concern"),
    ));
    let (docs, toks) = inputs.corpus.iter().fold((0u64, 0u64), |(d, t), doc| {
        (d + 1, t + tokenizer.encode_ids(doc.text).len() as u64)
    });
    r.push(info(
        18,
        "sequence-length distribution",
        AuditStatus::Info,
        if docs == 0 {
            String::from("no corpus")
        } else {
            format!("{docs} documents, mean {:.2} tokens", toks as f64 / docs as f64)
        },
    ));

    // 19-23: configuration and miscellaneous
    match inputs.load {
        Some(ev) => {
            r.push(result(19, "tokenizer JSON parses", ev.parsed, String::new()));
            r.push(result(
                20,
                "tokenizer reloads identically",
                ev.reloaded_identical,
                String::from("load → save → load"),
            ));
        }
        None => {
            r.push(info(
                19,
                "tokenizer JSON parses",
                AuditStatus::Skip,
                String::from("no file"),
            ));
            r.push(info(
                20,
                "tokenizer reloads identically",
                AuditStatus::Skip,
                String::from("no file"),
            ));
        }
    }
    r.push(info(
        21,
        "license file present",
        AuditStatus::Info,
        String::from("checked by the distribution, not the model"),
    ));
    let garbage = classify_garbage(model);
    let mut by_class: BTreeMap<GarbageClass, usize> = BTreeMap::new();
    for g in &garbage {
        *by_class.entry(g.class).or_default() += 1;
    }
    let frac = garbage.len() as f64 / model.vocab_size().max(1) as f64;
    r.push(result(
        22,
        "garbage-token audit",
        frac <= inputs.garbage_ceiling,
        format!(
            "{} flagged ({:.3}% of vocab): {by_class:?}",
            garbage.len(),
            frac * 100.0
        ),
    ));
    r.push(info(
        23,
        "EOS/BOS termination defaults",
        AuditStatus::Info,
        String::from("post-processor defaults are not part of the model"),
    ));

    AuditReport { results: r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bijection::ByteBijection;
    use crate::model::SpecialToken;
    use crate::pretokenize::Gpt2Split;
    use crate::testutil::{with_merges, GPT2_PATTERN};

    fn tk(m: &TokenizerModel) -> Tokenizer {
        Tokenizer::new(m, Gpt2Split).unwrap()
    }

    #[test]
    fn whole_token_priority_in_counts() {
        let mut m = with_merges(&[("a", "a")]);
        m.ignore_merges = true;
        let fires = count_fires(&tk(&m), [Doc::new(None, b"aa")]);
        assert_eq!(fires.get(m.vocab["aa"]), 1);
        assert_eq!(fires.get(m.vocab["a"]), 0);
        assert_eq!(fires.total_tokens, 1);
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        let m = with_merges(&[("a", "a")]);
        let fires = count_fires(&tk(&m), core::iter::empty());
        assert_eq!(fires.total_tokens, 0);
        assert!(fires.counts.iter().all(|&c| c == 0));
        assert_eq!(fires.counts.len(), 257);
    }

    #[test]
    fn merge_is_order_independent() {
        let m = with_merges(&[("a", "b"), ("ab", "c")]);
        let t = tk(&m);
        let docs = [
            Doc::new(Some("en"), b"abc ab a".as_slice()),
            Doc::new(Some("xx"), b"cab cab".as_slice()),
            Doc::new(None, b"abcabc".as_slice()),
        ];
        let whole = count_fires(&t, docs);
        let mut parts: Vec<FireCounts> = docs.iter().map(|d| count_fires(&t, [*d])).collect();
        parts.reverse();
        let mut merged = FireCounts::new(0);
        for p in &parts {
            merged.merge(p);
        }
        assert_eq!(merged, whole);
        assert_eq!(whole.counts.iter().sum::<u64>(), whole.total_tokens);
    }

    #[test]
    fn dead_slot_threshold_is_inclusive() {
        let mut fires = FireCounts::new(4);
        fires.counts = vec![0, 1, 2, 999_999_997];
        fires.total_tokens = 1_000_000_000;
        let report = find_dead_slots(&fires, 1, |_| true);
        assert_eq!(report.zero_fire, vec![0]);
        // id 1 is exactly at the floor, id 2 is floor + 1
        assert_eq!(report.marginal, vec![1]);
        let report = find_dead_slots(&fires, 1, |id| id != 1);
        assert!(report.marginal.is_empty());
    }

    #[test]
    fn fragment_definition() {
        let m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        let t = tk(&m);
        let report = byte_fragment_rate(&t, [Doc::new(Some("hi"), "न".as_bytes())]);
        assert_eq!(
            report.overall,
            FragmentCount {
                fragments: 2,
                tokens: 3
            }
        );
        assert!((report.overall.rate() - 2.0 / 3.0).abs() < 1e-12);

        let na = ByteBijection.encode("न".as_bytes());
        let chars: Vec<String> = na.chars().map(String::from).collect();
        let m = with_merges(&[
            (&chars[0], &chars[1]),
            (&format!("{}{}", chars[0], chars[1]), &chars[2]),
        ]);
        let report = byte_fragment_rate(&tk(&m), [Doc::new(None, "ननन".as_bytes())]);
        assert_eq!(report.overall.fragments, 0);
    }

    #[test]
    fn garbage_classes() {
        assert_eq!(garbage_class(&[0xE0, 0xA4]), Some(GarbageClass::BrokenUtf8));
        assert_eq!(garbage_class("\u{FFFD}x".as_bytes()), Some(GarbageClass::BrokenUtf8));
        assert_eq!(garbage_class("a\u{200B}".as_bytes()), Some(GarbageClass::ZwspBidi));
        assert_eq!(garbage_class("\u{E000}".as_bytes()), Some(GarbageClass::PrivateUse));
        assert_eq!(garbage_class(b"&#"), Some(GarbageClass::HtmlEntity));
        assert_eq!(garbage_class(b"&amp;"), Some(GarbageClass::HtmlEntity));
        assert_eq!(garbage_class(b"hello"), None);
        assert_eq!(garbage_class(b"R&D"), None);
        let m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        assert!(classify_garbage(&m).is_empty());
    }

    #[test]
    fn suite_on_clean_fixture() {
        let m = with_merges(&[("h", "e"), ("he", "l"), ("Ġ", "h")]);
        let t = tk(&m);
        let corpus = [Doc::new(Some("en"), b"hello there".as_slice())];
        let inputs = AuditInputs {
            corpus: &corpus,
            ..AuditInputs::default()
        };
        let report = run_audit_suite(&m, &t, &ScriptTable::default(), &inputs);
        assert_eq!(report.results.len(), 23);
        assert!(report.all_pass(), "{report:#?}");
        assert!(report.get(11).unwrap().status == AuditStatus::Pass);
    }

    #[test]
    fn duplicate_special_surface_fails_overlap_test() {
        let mut m = with_merges(&[("h", "e")]);
        m.special_tokens.push(SpecialToken {
            content: "he".into(),
            id: 257,
            pinned: true,
        });
        let t = tk(&m);
        let report = run_audit_suite(&m, &t, &ScriptTable::default(), &AuditInputs::default());
        assert_eq!(report.get(8).unwrap().status, AuditStatus::Fail);
        assert_eq!(report.get(6).unwrap().status, AuditStatus::Pass);
    }

    #[test]
    fn empty_string_edge_case() {
        let m = TokenizerModel::byte_level_base(GPT2_PATTERN);
        let t = tk(&m);
        assert!(t.encode_ids(b"").is_empty());
        assert_eq!(t.decode(&[]).unwrap(), b"");
        assert_eq!(edge_case_inputs().len(), 13);
    }
}

//! In-memory byte-level BPE tokenizer definition.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use serde::{Deserialize, Serialize};

use crate::bijection::ByteBijection;
use crate::TokenId;

/// How vocabulary strings map to raw bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenAlphabet {
    /// GPT-2 ByteLevel printable alphabet.
    #[default]
    ByteLevel,
    /// SentencePiece style: `▁` stands for a space, `<0xNN>` for raw bytes.
    Metaspace,
    /// Vocabulary strings are the literal text.
    Plain,
}

impl TokenAlphabet {
    pub fn family(self) -> &'static str {
        match self {
            TokenAlphabet::ByteLevel => "ByteLevel",
            TokenAlphabet::Metaspace => "Metaspace",
            TokenAlphabet::Plain => "Plain",
        }
    }
}

/// A merge rule. Its rank is its position in [`TokenizerModel::merges`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Merge {
    pub left: String,
    pub right: String,
}

impl Merge {
    pub fn new(left: impl Into<String>, right: impl Into<String>) -> Self {
        Merge {
            left: left.into(),
            right: right.into(),
        }
    }

    pub fn composed(&self) -> String {
        let mut s = String::with_capacity(self.left.len() + self.right.len());
        s.push_str(&self.left);
        s.push_str(&self.right);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialToken {
    /// Literal surface text (not bijection-encoded).
    pub content: String,
    pub id: TokenId,
    /// Pinned specials keep their ID under frequency permutation.
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("merge #{rank} ({left:?}, {right:?}) references absent token {missing:?}")]
    Closure {
        rank: usize,
        left: String,
        right: String,
        missing: String,
    },
    #[error("id {id} assigned to both {first:?} and {second:?}")]
    DuplicateId { id: TokenId, first: String, second: String },
}

/// Byte-level BPE tokenizer: vocabulary, ranked merges, special tokens and
/// the pre-tokenizer segmentation pattern.
///
/// Merges refer to token strings, never IDs, so renumbering the vocabulary
/// leaves the merge list untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerModel {
    /// Normal tokens, in the model's alphabet.
    pub vocab: HashMap<String, TokenId>,
    pub merges: Vec<Merge>,
    /// Whole-pretoken vocabulary matches win over merge application.
    pub ignore_merges: bool,
    /// In ID order.
    pub special_tokens: Vec<SpecialToken>,
    /// Segmentation regex text, kept verbatim from the source file.
    pub pretokenizer_pattern: String,
    pub alphabet: TokenAlphabet,
}

/// Reference to the entry occupying an ID.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenRef<'a> {
    Normal(&'a str),
    Special(&'a SpecialToken),
}

impl<'a> TokenRef<'a> {
    pub fn is_special(&self) -> bool {
        matches!(self, TokenRef::Special(_))
    }
}

impl TokenizerModel {
    /// A model holding only the 256 single-byte tokens, with ID = byte value.
    pub fn byte_level_base(pattern: impl Into<String>) -> Self {
        let t = ByteBijection;
        let vocab = (0..=255u8)
            .map(|b| (String::from(t.forward(b)), b as TokenId))
            .collect();
        TokenizerModel {
            vocab,
            merges: Vec::new(),
            ignore_merges: false,
            special_tokens: Vec::new(),
            pretokenizer_pattern: pattern.into(),
            alphabet: TokenAlphabet::ByteLevel,
        }
    }

    /// Load-time checks: duplicate IDs and merge closure.
    pub fn check(&self) -> Result<(), ModelError> {
        if let Some(f) = duplicate_ids(self).into_iter().next() {
            return Err(ModelError::DuplicateId {
                id: f.0,
                first: f.1,
                second: f.2,
            });
        }
        if let Some((rank, m, missing)) = closure_violations(self).into_iter().next() {
            return Err(ModelError::Closure {
                rank,
                left: m.left.clone(),
                right: m.right.clone(),
                missing,
            });
        }
        Ok(())
    }

    /// Number of distinct IDs across normal and special tokens.
    pub fn vocab_size(&self) -> usize {
        let mut ids: HashSet<TokenId> = self.vocab.values().copied().collect();
        ids.extend(self.special_tokens.iter().map(|s| s.id));
        ids.len()
    }

    /// Size implied by the ID range: highest ID + 1.
    pub fn declared_size(&self) -> usize {
        self.vocab
            .values()
            .copied()
            .chain(self.special_tokens.iter().map(|s| s.id))
            .max()
            .map_or(0, |m| m as usize + 1)
    }

    pub fn normal_count(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.vocab.get(token).copied()
    }

    pub fn is_special_id(&self, id: TokenId) -> bool {
        self.special_tokens.iter().any(|s| s.id == id) && !self.vocab.values().any(|&v| v == id)
    }

    /// ID-indexed view. Normal tokens take precedence where a special shares
    /// an ID with an identical normal entry.
    pub fn id_table(&self) -> Vec<Option<TokenRef<'_>>> {
        let mut table = vec![None; self.declared_size()];
        for s in &self.special_tokens {
            table[s.id as usize] = Some(TokenRef::Special(s));
        }
        for (tok, &id) in &self.vocab {
            table[id as usize] = Some(TokenRef::Normal(tok.as_str()));
        }
        table
    }

    /// Normal tokens sorted by ID (then string) for deterministic output.
    pub fn vocab_by_id(&self) -> Vec<(&str, TokenId)> {
        let mut v: Vec<(&str, TokenId)> = self.vocab.iter().map(|(t, &i)| (t.as_str(), i)).collect();
        v.sort_unstable_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
        v
    }

    /// Raw bytes a vocabulary string stands for.
    pub fn token_bytes(&self, token: &str) -> Vec<u8> {
        let mut out = Vec::with_capacity(token.len());
        token_bytes_into(self.alphabet, token, &mut out);
        out
    }

    /// Printable form of a single raw byte in this model's alphabet.
    pub fn byte_token(&self, byte: u8) -> String {
        match self.alphabet {
            TokenAlphabet::ByteLevel => String::from(ByteBijection.forward(byte)),
            TokenAlphabet::Metaspace => format!("<0x{byte:02X}>"),
            TokenAlphabet::Plain => {
                if byte.is_ascii() {
                    String::from(byte as char)
                } else {
                    format!("<0x{byte:02X}>")
                }
            }
        }
    }

    /// IDs of the 256 single-byte tokens (`None` where one is missing).
    pub fn byte_fallback_ids(&self) -> [Option<TokenId>; 256] {
        let mut ids = [None; 256];
        for (b, slot) in ids.iter_mut().enumerate() {
            *slot = self.token_id(&self.byte_token(b as u8));
        }
        ids
    }

    /// Set of single-byte token strings.
    pub fn byte_token_set(&self) -> HashSet<String> {
        (0..=255u8).map(|b| self.byte_token(b)).collect()
    }

    /// Renumbers normal and special tokens to `0..n`, preserving ID order.
    pub fn compact_ids(&mut self) {
        let mut ids: Vec<TokenId> = self
            .vocab
            .values()
            .copied()
            .chain(self.special_tokens.iter().map(|s| s.id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let remap: HashMap<TokenId, TokenId> = ids.iter().enumerate().map(|(i, &id)| (id, i as TokenId)).collect();
        for id in self.vocab.values_mut() {
            *id = remap[id];
        }
        for s in &mut self.special_tokens {
            s.id = remap[&s.id];
        }
    }

    /// Removes merges whose left, right or composed token is absent.
    /// Returns how many were dropped.
    pub fn repair_closure(&mut self) -> usize {
        let before = self.merges.len();
        let vocab = &self.vocab;
        let mut composed = String::new();
        self.merges.retain(|m| {
            composed.clear();
            composed.push_str(&m.left);
            composed.push_str(&m.right);
            vocab.contains_key(&m.left) && vocab.contains_key(&m.right) && vocab.contains_key(composed.as_str())
        });
        before - self.merges.len()
    }

    /// Drops repeated merge entries, keeping the first (lowest-rank) copy.
    pub fn dedup_merges(&mut self) -> usize {
        let before = self.merges.len();
        let mut seen = HashSet::with_capacity(before);
        self.merges.retain(|m| seen.insert(m.clone()));
        before - self.merges.len()
    }
}

pub(crate) fn token_bytes_into(alphabet: TokenAlphabet, token: &str, out: &mut Vec<u8>) {
    match alphabet {
        TokenAlphabet::ByteLevel => {
            for c in token.chars() {
                match ByteBijection.inverse(c) {
                    Some(b) => out.push(b),
                    None => {
                        let mut buf = [0u8; 4];
                        out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                    }
                }
            }
        }
        TokenAlphabet::Metaspace | TokenAlphabet::Plain => {
            if let Some(b) = parse_hex_byte(token) {
                out.push(b);
                return;
            }
            if alphabet == TokenAlphabet::Metaspace {
                for c in token.chars() {
                    if c == '\u{2581}' {
                        out.push(b' ');
                    } else {
                        let mut buf = [0u8; 4];
                        out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
                    }
                }
            } else {
                out.extend_from_slice(token.as_bytes());
            }
        }
    }
}

fn parse_hex_byte(token: &str) -> Option<u8> {
    let hex = token.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

fn duplicate_ids(model: &TokenizerModel) -> Vec<(TokenId, String, String)> {
    let mut owners: BTreeMap<TokenId, Vec<String>> = BTreeMap::new();
    for (tok, &id) in &model.vocab {
        owners.entry(id).or_default().push(tok.clone());
    }
    let bt = ByteBijection;
    for s in &model.special_tokens {
        let list = owners.entry(s.id).or_default();
        // A special mirrored in the normal vocab under the same ID is one entry.
        let mirrored = match model.alphabet {
            TokenAlphabet::ByteLevel => bt.encode(s.content.as_bytes()),
            _ => s.content.clone(),
        };
        if !list.iter().any(|t| *t == mirrored || *t == s.content) {
            list.push(s.content.clone());
        }
    }
    let mut out = Vec::new();
    for (id, mut list) in owners {
        if list.len() > 1 {
            list.sort();
            out.push((id, list[0].clone(), list[1].clone()));
        }
    }
    out
}

fn closure_violations(model: &TokenizerModel) -> Vec<(usize, &Merge, String)> {
    let mut out = Vec::new();
    let mut composed = String::new();
    for (rank, m) in model.merges.iter().enumerate() {
        composed.clear();
        composed.push_str(&m.left);
        composed.push_str(&m.right);
        for part in [m.left.as_str(), m.right.as_str(), composed.as_str()] {
            if !model.vocab.contains_key(part) {
                out.push((rank, m, String::from(part)));
                break;
            }
        }
    }
    out
}

/// One failed model invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Finding {
    SizeMismatch {
        declared: usize,
        distinct_ids: usize,
    },
    DuplicateId {
        id: TokenId,
        first: String,
        second: String,
    },
    Closure {
        rank: usize,
        left: String,
        right: String,
        missing: String,
    },
    MissingByteToken {
        byte: u8,
    },
    InvalidEncoding {
        token: String,
    },
    SpecialOverlap {
        special: String,
        special_id: TokenId,
        normal_id: TokenId,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn count(&self, pred: impl Fn(&Finding) -> bool) -> usize {
        self.findings.iter().filter(|f| pred(f)).count()
    }
}

/// Lists every violated model invariant. Never fails.
pub fn validate_model(model: &TokenizerModel) -> ValidationReport {
    let mut findings = Vec::new();

    let declared = model.declared_size();
    let distinct = model.vocab_size();
    if declared != distinct {
        findings.push(Finding::SizeMismatch {
            declared,
            distinct_ids: distinct,
        });
    }
    for (id, first, second) in duplicate_ids(model) {
        findings.push(Finding::DuplicateId { id, first, second });
    }
    for (rank, m, missing) in closure_violations(model) {
        findings.push(Finding::Closure {
            rank,
            left: m.left.clone(),
            right: m.right.clone(),
            missing,
        });
    }
    for (b, id) in model.byte_fallback_ids().iter().enumerate() {
        if id.is_none() {
            findings.push(Finding::MissingByteToken { byte: b as u8 });
        }
    }
    if model.alphabet == TokenAlphabet::ByteLevel {
        let mut bad: Vec<&String> = model
            .vocab
            .keys()
            .filter(|t| t.is_empty() || !ByteBijection.is_encoded(t))
            .collect();
        bad.sort();
        findings.extend(bad.into_iter().map(|t| Finding::InvalidEncoding { token: t.clone() }));
    }
    findings.extend(special_overlaps(model));
    ValidationReport { findings }
}

/// Specials whose surface equals a normal token held under a different ID.
pub(crate) fn special_overlaps(model: &TokenizerModel) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for s in &model.special_tokens {
        let surface = match model.alphabet {
            TokenAlphabet::ByteLevel => ByteBijection.encode(s.content.as_bytes()),
            _ => s.content.clone(),
        };
        if let Some(&nid) = model.vocab.get(&surface) {
            if nid != s.id && seen.insert((s.content.clone(), s.id)) {
                out.push(Finding::SpecialOverlap {
                    special: s.content.clone(),
                    special_id: s.id,
                    normal_id: nid,
                });
            }
        }
    }
    out
}

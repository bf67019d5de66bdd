//! Unicode-block script classification.
//!
//! A [`ScriptTable`] maps inclusive code-point ranges to named scripts. Each
//! script belongs to a writing-system class; two scripts are disjoint when
//! their classes differ. Ranges marked `neutral` (digits, ASCII punctuation,
//! danda, joiners, shared combining marks) and unlisted code points never
//! make a token cross-script.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

/// Name reserved for neutral ranges in table files.
pub const NEUTRAL: &str = "neutral";

/// The nine Brahmic scripts of the retrofit target set.
pub const BRAHMIC_SCRIPTS: [&str; 9] = [
    "Devanagari",
    "Bengali",
    "Gurmukhi",
    "Gujarati",
    "Oriya",
    "Tamil",
    "Telugu",
    "Kannada",
    "Malayalam",
];

/// Writing-system classes removed by the default script-prune crop.
pub const PRUNE_CLASSES: [&str; 9] = [
    "Han", "Hangul", "Japanese", "Arabic", "Cyrillic", "Thai", "Greek", "Hebrew", "Sinhala",
];

pub type ScriptId = u16;
pub type ClassId = u16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptInfo {
    pub name: String,
    pub class: ClassId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRange {
    pub start: u32,
    /// Inclusive.
    pub end: u32,
    /// `None` marks a neutral range.
    pub script: Option<ScriptId>,
}

/// Result of classifying one code point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodepointClass {
    Script(ScriptId),
    /// Explicitly shared across scripts.
    Neutral,
    /// Not covered by the table; treated as neutral.
    Other,
}

impl CodepointClass {
    pub fn script(self) -> Option<ScriptId> {
        match self {
            CodepointClass::Script(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptTableError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("ranges {a:#06X}..={a_end:#06X} and {b:#06X}..={b_end:#06X} overlap")]
    Overlap { a: u32, a_end: u32, b: u32, b_end: u32 },
    #[error("range {start:#06X}..={end:#06X} is empty or beyond U+10FFFF")]
    BadRange { start: u32, end: u32 },
    #[error("unsupported table version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptTable {
    pub version: u32,
    scripts: Vec<ScriptInfo>,
    classes: Vec<String>,
    ranges: Vec<BlockRange>,
}

/// `(start, end, script, class)`; class `""` means same as script.
type Row = (u32, u32, &'static str, &'static str);

#[rustfmt::skip]
const DEFAULT_ROWS: &[Row] = &[
    (0x0000, 0x0040, NEUTRAL, ""),
    (0x0041, 0x005A, "Latin", ""),
    (0x005B, 0x0060, NEUTRAL, ""),
    (0x0061, 0x007A, "Latin", ""),
    (0x007B, 0x00BF, NEUTRAL, ""),
    (0x00C0, 0x00D6, "Latin", ""),
    (0x00D7, 0x00D7, NEUTRAL, ""),
    (0x00D8, 0x00F6, "Latin", ""),
    (0x00F7, 0x00F7, NEUTRAL, ""),
    (0x00F8, 0x024F, "Latin", ""),
    (0x0300, 0x036F, NEUTRAL, ""),
    (0x0370, 0x03FF, "Greek", ""),
    (0x0400, 0x052F, "Cyrillic", ""),
    (0x0590, 0x05FF, "Hebrew", ""),
    (0x0600, 0x06FF, "Arabic", ""),
    (0x0750, 0x077F, "Arabic", ""),
    (0x0870, 0x08FF, "Arabic", ""),
    (0x0900, 0x0963, "Devanagari", ""),
    (0x0964, 0x0965, NEUTRAL, ""),
    (0x0966, 0x097F, "Devanagari", ""),
    (0x0980, 0x09FF, "Bengali", ""),
    (0x0A00, 0x0A7F, "Gurmukhi", ""),
    (0x0A80, 0x0AFF, "Gujarati", ""),
    (0x0B00, 0x0B7F, "Oriya", ""),
    (0x0B80, 0x0BFF, "Tamil", ""),
    (0x0C00, 0x0C7F, "Telugu", ""),
    (0x0C80, 0x0CFF, "Kannada", ""),
    (0x0D00, 0x0D7F, "Malayalam", ""),
    (0x0D80, 0x0DFF, "Sinhala", ""),
    (0x0E00, 0x0E7F, "Thai", ""),
    (0x1100, 0x11FF, "Hangul", ""),
    (0x1C80, 0x1C8F, "Cyrillic", ""),
    (0x1CD0, 0x1CFF, NEUTRAL, ""),
    (0x1E00, 0x1EFF, "Latin", ""),
    (0x1F00, 0x1FFF, "Greek", ""),
    (0x2000, 0x206F, NEUTRAL, ""),
    (0x20A0, 0x20CF, NEUTRAL, ""),
    (0x2C60, 0x2C7F, "Latin", ""),
    (0x2DE0, 0x2DFF, "Cyrillic", ""),
    (0x2E80, 0x2FDF, "Han", ""),
    (0x3000, 0x303F, NEUTRAL, ""),
    (0x3040, 0x309F, "Hiragana", "Japanese"),
    (0x30A0, 0x30FF, "Katakana", "Japanese"),
    (0x3130, 0x318F, "Hangul", ""),
    (0x31F0, 0x31FF, "Katakana", "Japanese"),
    (0x3400, 0x4DBF, "Han", ""),
    (0x4E00, 0x9FFF, "Han", ""),
    (0xA640, 0xA69F, "Cyrillic", ""),
    (0xA720, 0xA7FF, "Latin", ""),
    (0xA8E0, 0xA8FF, "Devanagari", ""),
    (0xA960, 0xA97F, "Hangul", ""),
    (0xAC00, 0xD7AF, "Hangul", ""),
    (0xD7B0, 0xD7FF, "Hangul", ""),
    (0xF900, 0xFAFF, "Han", ""),
    (0xFB1D, 0xFB4F, "Hebrew", ""),
    (0xFB50, 0xFDFF, "Arabic", ""),
    (0xFE00, 0xFE0F, NEUTRAL, ""),
    (0xFE70, 0xFEFE, "Arabic", ""),
    (0xFEFF, 0xFEFF, NEUTRAL, ""),
    (0xFF21, 0xFF3A, "Latin", ""),
    (0xFF41, 0xFF5A, "Latin", ""),
    (0xFF66, 0xFF9F, "Katakana", "Japanese"),
    (0xFFA0, 0xFFDC, "Hangul", ""),
    (0x20000, 0x2FA1F, "Han", ""),
    (0x30000, 0x323AF, "Han", ""),
];

impl Default for ScriptTable {
    fn default() -> Self {
        let rows = DEFAULT_ROWS.iter().map(|&(s, e, name, class)| {
            let class = if class.is_empty() { name } else { class };
            (s, e, String::from(name), String::from(class))
        });
        ScriptTable::from_rows(rows).expect("built-in table is well formed")
    }
}

impl ScriptTable {
    /// Builds a table from `(start, end, script, class)` rows. Rows whose
    /// script is [`NEUTRAL`] become neutral ranges.
    pub fn from_rows(rows: impl IntoIterator<Item = (u32, u32, String, String)>) -> Result<Self, ScriptTableError> {
        let mut table = ScriptTable {
            version: 1,
            scripts: Vec::new(),
            classes: Vec::new(),
            ranges: Vec::new(),
        };
        for (start, end, name, class) in rows {
            if start > end || end > 0x10FFFF {
                return Err(ScriptTableError::BadRange { start, end });
            }
            let script = if name == NEUTRAL {
                None
            } else {
                Some(table.intern_script(&name, &class))
            };
            table.ranges.push(BlockRange { start, end, script });
        }
        table.ranges.sort_by_key(|r| r.start);
        for w in table.ranges.windows(2) {
            if w[1].start <= w[0].end {
                return Err(ScriptTableError::Overlap {
                    a: w[0].start,
                    a_end: w[0].end,
                    b: w[1].start,
                    b_end: w[1].end,
                });
            }
        }
        Ok(table)
    }

    fn intern_script(&mut self, name: &str, class: &str) -> ScriptId {
        if let Some(i) = self.scripts.iter().position(|s| s.name == name) {
            return i as ScriptId;
        }
        let class_id = match self.classes.iter().position(|c| c == class) {
            Some(i) => i as ClassId,
            None => {
                self.classes.push(String::from(class));
                (self.classes.len() - 1) as ClassId
            }
        };
        self.scripts.push(ScriptInfo {
            name: String::from(name),
            class: class_id,
        });
        (self.scripts.len() - 1) as ScriptId
    }

    /// Parses the versioned text format produced by [`ScriptTable::to_text`].
    ///
    /// ```text
    /// version 1
    /// # start end script class
    /// 0B00 0B7F Oriya Oriya
    /// 0964 0965 neutral neutral
    /// ```
    pub fn parse(text: &str) -> Result<Self, ScriptTableError> {
        let mut version = None;
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| ScriptTableError::Parse {
                line: i + 1,
                msg: String::from(msg),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "version" {
                let v: u32 = fields
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| err("bad version"))?;
                if v != 1 {
                    return Err(ScriptTableError::Version(v));
                }
                version = Some(v);
                continue;
            }
            if version.is_none() {
                return Err(err("missing `version` header"));
            }
            if fields.len() < 3 || fields.len() > 4 {
                return Err(err("expected: start end script [class]"));
            }
            let start = u32::from_str_radix(fields[0].trim_start_matches("U+"), 16).map_err(|_| err("bad start"))?;
            let end = u32::from_str_radix(fields[1].trim_start_matches("U+"), 16).map_err(|_| err("bad end"))?;
            let name = fields[2].to_string();
            let class = fields.get(3).map_or_else(|| name.clone(), |c| c.to_string());
            rows.push((start, end, name, class));
        }
        if version.is_none() {
            return Err(ScriptTableError::Parse {
                line: 0,
                msg: String::from("missing `version` header"),
            });
        }
        ScriptTable::from_rows(rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version {}", self.version);
        out.push_str("# start end script class\n");
        for r in &self.ranges {
            let (name, class) = match r.script {
                Some(s) => (
                    self.scripts[s as usize].name.as_str(),
                    self.class_name(self.scripts[s as usize].class),
                ),
                None => (NEUTRAL, NEUTRAL),
            };
            let _ = writeln!(out, "{:04X} {:04X} {} {}", r.start, r.end, name, class);
        }
        out
    }

    pub fn ranges(&self) -> &[BlockRange] {
        &self.ranges
    }

    pub fn scripts(&self) -> &[ScriptInfo] {
        &self.scripts
    }

    pub fn script_name(&self, id: ScriptId) -> &str {
        &self.scripts[id as usize].name
    }

    pub fn class_of(&self, id: ScriptId) -> ClassId {
        self.scripts[id as usize].class
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        &self.classes[id as usize]
    }

    pub fn script_id(&self, name: &str) -> Option<ScriptId> {
        self.scripts.iter().position(|s| s.name == name).map(|i| i as ScriptId)
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().position(|c| c == name).map(|i| i as ClassId)
    }

    /// Scripts whose name or class is in `names`.
    pub fn resolve(&self, names: &[impl AsRef<str>]) -> Result<BTreeSet<ScriptId>, String> {
        let mut out = BTreeSet::new();
        for n in names {
            let n = n.as_ref();
            let mut hit = false;
            for (i, s) in self.scripts.iter().enumerate() {
                if s.name == n || self.classes[s.class as usize] == n {
                    out.insert(i as ScriptId);
                    hit = true;
                }
            }
            if !hit {
                return Err(format!("unknown script or class {n:?}"));
            }
        }
        Ok(out)
    }

    /// Names from `required` that the table lacks (as script or class).
    pub fn missing(&self, required: &[&str]) -> Vec<String> {
        required
            .iter()
            .filter(|n| self.script_id(n).is_none() && self.class_id(n).is_none())
            .map(|n| String::from(*n))
            .collect()
    }

    fn range_index(&self, cp: u32) -> Option<usize> {
        let i = self.ranges.partition_point(|r| r.start <= cp);
        (i > 0 && self.ranges[i - 1].end >= cp).then(|| i - 1)
    }

    pub fn classify_u32(&self, cp: u32) -> CodepointClass {
        match self.range_index(cp) {
            Some(i) => match self.ranges[i].script {
                Some(s) => CodepointClass::Script(s),
                None => CodepointClass::Neutral,
            },
            None => CodepointClass::Other,
        }
    }

    pub fn classify_codepoint(&self, c: char) -> CodepointClass {
        self.classify_u32(c as u32)
    }

    /// The script covering every code point in `lo..=hi`, if there is one.
    pub fn script_for_span(&self, lo: u32, hi: u32) -> Option<ScriptId> {
        let mut i = self.range_index(lo)?;
        let script = self.ranges[i].script?;
        let mut covered = self.ranges[i].end;
        while covered < hi {
            i += 1;
            let r = self.ranges.get(i)?;
            if r.start != covered + 1 || r.script != Some(script) {
                return None;
            }
            covered = r.end;
        }
        Some(script)
    }

    /// Profiles a token from its raw bytes.
    pub fn profile_bytes(&self, bytes: &[u8]) -> TokenProfile {
        let mut scripts = BTreeSet::new();
        let mut whole = BTreeSet::new();
        let mut partial = false;
        let mut i = 0;
        while i < bytes.len() {
            let lead = bytes[i];
            let need = utf8_len(lead);
            if need == 0 {
                // stray continuation or invalid lead
                partial = true;
                i += 1;
                continue;
            }
            let avail = bytes[i..]
                .iter()
                .skip(1)
                .take(need - 1)
                .take_while(|b| is_cont(**b))
                .count()
                + 1;
            if avail == need {
                match core::str::from_utf8(&bytes[i..i + need]) {
                    Ok(s) => {
                        let c = s.chars().next().expect("one char");
                        if let CodepointClass::Script(id) = self.classify_codepoint(c) {
                            scripts.insert(id);
                            whole.insert(id);
                        }
                    }
                    Err(_) => partial = true,
                }
                i += need;
                continue;
            }
            partial = true;
            if i + avail == bytes.len() {
                // truncated at the token's right edge: the known prefix pins a span
                let (lo, hi) = prefix_span(&bytes[i..], need);
                if let Some(id) = self.script_for_span(lo, hi) {
                    scripts.insert(id);
                }
            }
            i += avail;
        }
        let classes: BTreeSet<ClassId> = scripts.iter().map(|&s| self.class_of(s)).collect();
        TokenProfile {
            byte_length: bytes.len(),
            scripts: scripts.into_iter().collect(),
            whole_char_scripts: whole.into_iter().collect(),
            is_cross_script: classes.len() >= 2,
            is_partial_char: partial,
        }
    }
}

#[inline]
fn is_cont(b: u8) -> bool {
    b & 0xC0 == 0x80
}

fn utf8_len(lead: u8) -> usize {
    match lead {
        0x00..=0x7F => 1,
        0xC2..=0xDF => 2,
        0xE0..=0xEF => 3,
        0xF0..=0xF4 => 4,
        _ => 0,
    }
}

/// Code-point span consistent with a truncated UTF-8 prefix.
fn prefix_span(prefix: &[u8], need: usize) -> (u32, u32) {
    let lead_bits = match need {
        2 => (prefix[0] & 0x1F) as u32,
        3 => (prefix[0] & 0x0F) as u32,
        _ => (prefix[0] & 0x07) as u32,
    };
    let mut value = lead_bits;
    for &b in &prefix[1..] {
        value = (value << 6) | (b & 0x3F) as u32;
    }
    let missing = (need - prefix.len()) as u32;
    let lo = value << (6 * missing);
    let hi = lo | ((1u32 << (6 * missing)) - 1);
    (lo, hi.min(0x10FFFF))
}

/// Script content of one token.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenProfile {
    pub byte_length: usize,
    /// Non-neutral scripts, including ones implied by a truncated trailing
    /// character whose known bytes pin a single block.
    pub scripts: Vec<ScriptId>,
    /// Non-neutral scripts of complete characters only.
    pub whole_char_scripts: Vec<ScriptId>,
    pub is_cross_script: bool,
    /// Some character is split at a token edge (or the bytes are not UTF-8).
    pub is_partial_char: bool,
}

/// Profiles a vocabulary string of `model`.
pub fn profile_token(model: &crate::TokenizerModel, table: &ScriptTable, token: &str) -> TokenProfile {
    table.profile_bytes(&model.token_bytes(token))
}

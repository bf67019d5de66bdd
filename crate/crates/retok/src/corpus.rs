//! Corpus files and manifests.
//!
//! A corpus file is either JSON Lines (`.jsonl`, one object per line with a
//! `text` field and optional `lang`) or plain text with one document per
//! line. Plain lines are kept as raw bytes, so broken UTF-8 survives.
//!
//! A manifest is a JSON object mapping a language or corpus class to one
//! path or a list of paths, relative to the manifest's directory:
//!
//! ```json
//! {"hi": ["hi.txt"], "code": "code.txt"}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use retok_core::audit::Doc;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub lang: Option<String>,
    pub text: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub docs: Vec<Document>,
}

#[derive(Deserialize)]
struct JsonDoc {
    text: String,
    #[serde(default, alias = "language")]
    lang: Option<String>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CorpusError> {
    fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Corpus {
    /// Reads one corpus file. `lang` tags documents that carry no tag of
    /// their own.
    pub fn read(path: impl AsRef<Path>, lang: Option<&str>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let bytes = read_bytes(path)?;
        let jsonl = path.extension().is_some_and(|e| e == "jsonl");
        let mut docs = Vec::new();
        for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
            let line = line.strip_suffix(b"\r").unwrap_or(line);
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            if jsonl {
                let d: JsonDoc = serde_json::from_slice(line).map_err(|e| CorpusError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: e.to_string(),
                })?;
                docs.push(Document {
                    lang: d.lang.or_else(|| lang.map(str::to_string)),
                    text: d.text.into_bytes(),
                });
            } else {
                docs.push(Document {
                    lang: lang.map(str::to_string),
                    text: line.to_vec(),
                });
            }
        }
        Ok(Corpus { docs })
    }

    pub fn docs(&self) -> Vec<Doc<'_>> {
        self.docs.iter().map(|d| Doc::new(d.lang.as_deref(), &d.text)).collect()
    }

    pub fn texts(&self) -> Vec<&[u8]> {
        self.docs.iter().map(|d| d.text.as_slice()).collect()
    }

    pub fn extend(&mut self, other: Corpus) {
        self.docs.extend(other.docs);
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn utf8_bytes(&self) -> usize {
        self.docs.iter().map(|d| d.text.len()).sum()
    }

    /// Documents grouped by language tag (`"-"` for untagged), in tag
    /// order.
    pub fn by_language(&self) -> BTreeMap<String, Vec<&[u8]>> {
        let mut out: BTreeMap<String, Vec<&[u8]>> = BTreeMap::new();
        for d in &self.docs {
            out.entry(d.lang.clone().unwrap_or_else(|| "-".into()))
                .or_default()
                .push(&d.text);
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

/// Language or corpus class → files.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub groups: BTreeMap<String, Vec<PathBuf>>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let bytes = read_bytes(path)?;
        let raw: BTreeMap<String, OneOrMany> = serde_json::from_slice(&bytes).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let groups = raw
            .into_iter()
            .map(|(k, v)| {
                let paths = match v {
                    OneOrMany::One(p) => vec![p],
                    OneOrMany::Many(ps) => ps,
                };
                (k, paths.into_iter().map(|p| base.join(p)).collect())
            })
            .collect();
        Ok(Manifest { groups })
    }

    /// Reads every group; documents are tagged with their group name
    /// unless the file tags them itself.
    pub fn read_groups(&self) -> Result<Vec<(String, Corpus)>, CorpusError> {
        self.groups
            .iter()
            .map(|(name, paths)| {
                let mut c = Corpus::default();
                for p in paths {
                    c.extend(Corpus::read(p, Some(name))?);
                }
                Ok((name.clone(), c))
            })
            .collect()
    }

    /// All groups concatenated in group order.
    pub fn read_all(&self) -> Result<Corpus, CorpusError> {
        let mut all = Corpus::default();
        for (_, c) in self.read_groups()? {
            all.extend(c);
        }
        Ok(all)
    }
}

/// Corpus from either a manifest (`.json`) or a single corpus file.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        Manifest::load(path)?.read_all()
    } else {
        Corpus::read(path, None)
    }
}

/// One entry per non-empty line; `\xNN` escapes allow raw bytes (for
/// broken-UTF-8 artifact entries).
pub fn read_entry_list(path: impl AsRef<Path>) -> Result<Vec<Vec<u8>>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(unescape(line).ok_or_else(|| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: "bad \\x escape".into(),
        })?);
    }
    Ok(out)
}

fn unescape(s: &str) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(s.len());
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'\\' && b.get(i + 1) == Some(&b'x') {
            let hex = s.get(i + 2..i + 4)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 4;
        } else {
            out.push(b[i]);
            i += 1;
        }
    }
    Some(out)
}

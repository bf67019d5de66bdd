//! Tokenizer-definition JSON (the `tokenizer.json` layout): load, save and
//! pre-tokenizer mapping.
//!
//! Loading keeps the parsed document next to the model, and saving patches
//! only the fields the model owns (`model.vocab`, `model.merges`,
//! `model.ignore_merges`, `added_tokens`, and `pre_tokenizer` when the
//! pattern changed). Everything else is written back as it was read.

use std::fs;
use std::path::{Path, PathBuf};

use retok_core::model::{Merge, ModelError, SpecialToken, TokenAlphabet, TokenizerModel};
use retok_core::pretokenize::GPT2_PATTERN;
use retok_core::TokenId;
use serde_json::{json, Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn schema(msg: impl Into<String>) -> FormatError {
    FormatError::Schema(msg.into())
}

/// How the source file spelled its merges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeStyle {
    /// `["left", "right"]`
    #[default]
    Pair,
    /// `"left right"`
    Joined,
}

/// A loaded tokenizer: the model plus the source document it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerFile {
    pub model: TokenizerModel,
    pub raw: Value,
    pub merge_style: MergeStyle,
}

impl TokenizerFile {
    /// A fresh document for a model with no source file.
    pub fn new(model: TokenizerModel) -> Self {
        TokenizerFile {
            model,
            raw: Value::Null,
            merge_style: MergeStyle::Pair,
        }
    }

    /// Same source document, different model (crop and surgery outputs).
    pub fn with_model(&self, model: TokenizerModel) -> Self {
        TokenizerFile {
            model,
            raw: self.raw.clone(),
            merge_style: self.merge_style,
        }
    }

    pub fn to_value(&self) -> Value {
        render(&self.model, &self.raw, self.merge_style)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("JSON values always serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| FormatError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        fs::write(path, self.to_json_string()).map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn load_tokenizer(path: impl AsRef<Path>) -> Result<TokenizerFile, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_tokenizer(&text)
}

pub fn save_tokenizer(model: &TokenizerModel, path: impl AsRef<Path>) -> Result<(), FormatError> {
    TokenizerFile::new(model.clone()).save(path)
}

pub fn parse_tokenizer(text: &str) -> Result<TokenizerFile, FormatError> {
    let raw: Value = serde_json::from_str(text)?;
    let m = raw.get("model").ok_or_else(|| schema("missing `model` section"))?;
    match m.get("type").and_then(Value::as_str) {
        Some("BPE") | None => {}
        Some(other) => return Err(schema(format!("model type {other} is not BPE"))),
    }

    let vocab_obj = m
        .get("vocab")
        .and_then(Value::as_object)
        .ok_or_else(|| schema("`model.vocab` must be an object"))?;
    let mut vocab = hashbrown::HashMap::with_capacity(vocab_obj.len());
    for (tok, id) in vocab_obj {
        let id = id
            .as_u64()
            .and_then(|v| TokenId::try_from(v).ok())
            .ok_or_else(|| schema(format!("vocab entry {tok:?} has a non-integer id")))?;
        vocab.insert(tok.clone(), id);
    }

    let mut merge_style = MergeStyle::Pair;
    let mut merges = Vec::new();
    if let Some(list) = m.get("merges") {
        let list = list
            .as_array()
            .ok_or_else(|| schema("`model.merges` must be an array"))?;
        merges.reserve(list.len());
        for (i, entry) in list.iter().enumerate() {
            let merge = match entry {
                Value::String(s) => {
                    merge_style = MergeStyle::Joined;
                    let (l, r) = s
                        .split_once(' ')
                        .ok_or_else(|| schema(format!("merge #{i} {s:?} has no space")))?;
                    Merge::new(l, r)
                }
                Value::Array(pair) => match pair.as_slice() {
                    [Value::String(l), Value::String(r)] => Merge::new(l.as_str(), r.as_str()),
                    _ => return Err(schema(format!("merge #{i} is not a pair of strings"))),
                },
                _ => return Err(schema(format!("merge #{i} is neither a string nor a pair"))),
            };
            merges.push(merge);
        }
    }

    let mut special_tokens = Vec::new();
    if let Some(list) = raw.get("added_tokens").and_then(Value::as_array) {
        for t in list {
            let content = t
                .get("content")
                .and_then(Value::as_str)
                .ok_or_else(|| schema("added token without `content`"))?;
            let id = t
                .get("id")
                .and_then(Value::as_u64)
                .and_then(|v| TokenId::try_from(v).ok())
                .ok_or_else(|| schema(format!("added token {content:?} without an integer `id`")))?;
            let pinned = t.get("pinned").and_then(Value::as_bool).unwrap_or(true);
            special_tokens.push(SpecialToken {
                content: content.to_string(),
                id,
                pinned,
            });
        }
    }

    special_tokens.sort_by_key(|s| s.id);
    let (pretokenizer_pattern, alphabet) = read_pre_tokenizer(&raw, &vocab);
    let model = TokenizerModel {
        vocab,
        merges,
        ignore_merges: m.get("ignore_merges").and_then(Value::as_bool).unwrap_or(false),
        special_tokens,
        pretokenizer_pattern,
        alphabet,
    };
    model.check()?;
    Ok(TokenizerFile {
        model,
        raw,
        merge_style,
    })
}

/// Collects every `"type"` tag in a JSON subtree.
fn types_in(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(o) => {
            if let Some(Value::String(t)) = o.get("type") {
                out.push(t.clone());
            }
            o.values().for_each(|c| types_in(c, out));
        }
        Value::Array(a) => a.iter().for_each(|c| types_in(c, out)),
        _ => {}
    }
}

/// First `Split` regex (or literal) in a pre-tokenizer subtree.
fn split_pattern(v: &Value) -> Option<String> {
    match v {
        Value::Object(o) => {
            if o.get("type").and_then(Value::as_str) == Some("Split") {
                let p = o.get("pattern")?;
                if let Some(re) = p.get("Regex").and_then(Value::as_str) {
                    return Some(re.to_string());
                }
                if let Some(lit) = p.get("String").and_then(Value::as_str) {
                    return Some(fancy_regex::escape(lit).into_owned());
                }
            }
            o.values().find_map(split_pattern)
        }
        Value::Array(a) => a.iter().find_map(split_pattern),
        _ => None,
    }
}

fn byte_level_uses_regex(v: &Value) -> bool {
    match v {
        Value::Object(o) => {
            if o.get("type").and_then(Value::as_str) == Some("ByteLevel") {
                return o.get("use_regex").and_then(Value::as_bool).unwrap_or(true);
            }
            o.values().any(byte_level_uses_regex)
        }
        Value::Array(a) => a.iter().any(byte_level_uses_regex),
        _ => false,
    }
}

/// Maps the `pre_tokenizer` (and, for the alphabet, `normalizer` and
/// `decoder`) sections to a segmentation pattern and a token alphabet.
fn read_pre_tokenizer(raw: &Value, vocab: &hashbrown::HashMap<String, TokenId>) -> (String, TokenAlphabet) {
    let pre = raw.get("pre_tokenizer").unwrap_or(&Value::Null);
    let mut types = Vec::new();
    for key in ["pre_tokenizer", "normalizer", "decoder"] {
        if let Some(v) = raw.get(key) {
            types_in(v, &mut types);
        }
    }
    let has = |t: &str| types.iter().any(|x| x == t);
    let alphabet = if has("ByteLevel") {
        TokenAlphabet::ByteLevel
    } else if has("Metaspace") || vocab.keys().any(|t| t.contains('\u{2581}')) {
        TokenAlphabet::Metaspace
    } else if types.is_empty() && vocab.contains_key("Ġ") {
        // bare files without pre-tokenizer metadata but a GPT-2 alphabet
        TokenAlphabet::ByteLevel
    } else {
        TokenAlphabet::Plain
    };
    let pattern = match split_pattern(pre) {
        Some(p) => p,
        None if byte_level_uses_regex(pre) => GPT2_PATTERN.to_string(),
        None => String::new(),
    };
    (pattern, alphabet)
}

fn pre_tokenizer_value(pattern: &str) -> Value {
    if pattern == GPT2_PATTERN {
        return json!({"type": "ByteLevel", "add_prefix_space": false, "trim_offsets": true, "use_regex": true});
    }
    json!({
        "type": "Sequence",
        "pretokenizers": [
            {"type": "Split", "pattern": {"Regex": pattern}, "behavior": "Isolated", "invert": false},
            {"type": "ByteLevel", "add_prefix_space": false, "trim_offsets": true, "use_regex": false}
        ]
    })
}

fn added_token_value(s: &SpecialToken, template: Option<&Value>) -> Value {
    let mut o = match template {
        Some(Value::Object(o)) => o.clone(),
        _ => {
            let mut o = Map::new();
            o.insert("id".into(), Value::Null);
            o.insert("content".into(), Value::Null);
            o.insert("single_word".into(), false.into());
            o.insert("lstrip".into(), false.into());
            o.insert("rstrip".into(), false.into());
            o.insert("normalized".into(), false.into());
            o.insert("special".into(), true.into());
            o
        }
    };
    o.insert("id".into(), s.id.into());
    o.insert("content".into(), s.content.clone().into());
    if s.pinned {
        o.remove("pinned");
    } else {
        o.insert("pinned".into(), false.into());
    }
    Value::Object(o)
}

fn render(model: &TokenizerModel, raw: &Value, style: MergeStyle) -> Value {
    let mut root = match raw {
        Value::Object(o) => o.clone(),
        _ => {
            let mut o = Map::new();
            o.insert("version".into(), "1.0".into());
            o.insert("truncation".into(), Value::Null);
            o.insert("padding".into(), Value::Null);
            o.insert("added_tokens".into(), Value::Array(Vec::new()));
            o.insert("normalizer".into(), Value::Null);
            o.insert("pre_tokenizer".into(), Value::Null);
            o.insert("post_processor".into(), Value::Null);
            o.insert(
                "decoder".into(),
                json!({"type": "ByteLevel", "add_prefix_space": true, "trim_offsets": true, "use_regex": true}),
            );
            o.insert("model".into(), Value::Null);
            o
        }
    };

    let old_specials: Vec<Value> = raw
        .get("added_tokens")
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();
    let mut specials: Vec<&SpecialToken> = model.special_tokens.iter().collect();
    specials.sort_by_key(|s| s.id);
    let added: Vec<Value> = specials
        .into_iter()
        .map(|s| {
            let template = old_specials
                .iter()
                .find(|t| t.get("content").and_then(Value::as_str) == Some(s.content.as_str()));
            added_token_value(s, template)
        })
        .collect();
    root.insert("added_tokens".into(), Value::Array(added));

    let (old_pattern, _) = read_pre_tokenizer(raw, &model.vocab);
    if raw.is_null() || old_pattern != model.pretokenizer_pattern {
        let v = if model.pretokenizer_pattern.is_empty() {
            Value::Null
        } else {
            pre_tokenizer_value(&model.pretokenizer_pattern)
        };
        root.insert("pre_tokenizer".into(), v);
    }

    let mut m = match raw.get("model") {
        Some(Value::Object(o)) => o.clone(),
        _ => {
            let mut o = Map::new();
            o.insert("type".into(), "BPE".into());
            o.insert("dropout".into(), Value::Null);
            o.insert("unk_token".into(), Value::Null);
            o.insert("continuing_subword_prefix".into(), Value::Null);
            o.insert("end_of_word_suffix".into(), Value::Null);
            o.insert("fuse_unk".into(), false.into());
            o.insert("byte_fallback".into(), false.into());
            o
        }
    };
    m.insert("ignore_merges".into(), model.ignore_merges.into());
    let vocab: Map<String, Value> = model
        .vocab_by_id()
        .into_iter()
        .map(|(t, id)| (t.to_string(), Value::from(id)))
        .collect();
    m.insert("vocab".into(), Value::Object(vocab));
    let merges: Vec<Value> = model
        .merges
        .iter()
        .map(|mg| match style {
            MergeStyle::Pair => json!([mg.left, mg.right]),
            MergeStyle::Joined => Value::String(format!("{} {}", mg.left, mg.right)),
        })
        .collect();
    m.insert("merges".into(), Value::Array(merges));
    root.insert("model".into(), Value::Object(m));
    Value::Object(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn byte_base() -> TokenizerModel {
        TokenizerModel::byte_level_base(GPT2_PATTERN)
    }

    #[test]
    fn byte_fixture_has_256_entries() {
        let f = TokenizerFile::new(byte_base());
        let back = parse_tokenizer(&f.to_json_string()).unwrap();
        assert_eq!(back.model.vocab_size(), 256);
        assert_eq!(back.model, f.model);
    }

    #[test]
    fn closure_violation_is_a_load_error() {
        let mut v = TokenizerFile::new(byte_base()).to_value();
        v["model"]["merges"] = json!([["a", "b"]]);
        let err = parse_tokenizer(&v.to_string()).unwrap_err();
        assert!(matches!(err, FormatError::Model(ModelError::Closure { .. })), "{err}");
    }

    #[test]
    fn duplicate_id_is_a_load_error() {
        let mut v = TokenizerFile::new(byte_base()).to_value();
        v["model"]["vocab"]["xx"] = json!(5);
        let err = parse_tokenizer(&v.to_string()).unwrap_err();
        assert!(
            matches!(err, FormatError::Model(ModelError::DuplicateId { id: 5, .. })),
            "{err}"
        );
    }

    #[test]
    fn both_merge_spellings_load() {
        let mut m = byte_base();
        m.vocab.insert("ab".into(), 256);
        m.merges.push(Merge::new("a", "b"));
        let mut v = TokenizerFile::new(m.clone()).to_value();
        let pair = parse_tokenizer(&v.to_string()).unwrap();
        v["model"]["merges"] = json!(["a b"]);
        let joined = parse_tokenizer(&v.to_string()).unwrap();
        assert_eq!(pair.model, joined.model);
        assert_eq!(joined.merge_style, MergeStyle::Joined);
        // the spelling survives a save
        assert_eq!(joined.to_value()["model"]["merges"], json!(["a b"]));
    }

    #[test]
    fn one_special_gives_one_added_token() {
        let mut m = byte_base();
        m.special_tokens.push(SpecialToken {
            content: "<|end|>".into(),
            id: 256,
            pinned: true,
        });
        let v = TokenizerFile::new(m.clone()).to_value();
        assert_eq!(v["added_tokens"].as_array().unwrap().len(), 1);
        assert!(v["added_tokens"][0].get("pinned").is_none());
        assert_eq!(parse_tokenizer(&v.to_string()).unwrap().model, m);

        m.special_tokens[0].pinned = false;
        let v = TokenizerFile::new(m.clone()).to_value();
        assert_eq!(v["added_tokens"][0]["pinned"], json!(false));
        assert_eq!(parse_tokenizer(&v.to_string()).unwrap().model, m);
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let mut v = TokenizerFile::new(byte_base()).to_value();
        v["post_processor"] = json!({"type": "TemplateProcessing", "single": []});
        v["model"]["dropout"] = json!(0.25);
        v["added_tokens"] = json!([{"id": 256, "content": "<s>", "special": true, "lstrip": true}]);
        let f = parse_tokenizer(&v.to_string()).unwrap();
        assert_eq!(f.to_value(), v);
    }

    #[test]
    fn pre_tokenizer_mapping() {
        let mut v = TokenizerFile::new(byte_base()).to_value();
        assert_eq!(v["pre_tokenizer"]["type"], "ByteLevel");
        v["pre_tokenizer"] = json!({
            "type": "Sequence",
            "pretokenizers": [
                {"type": "Split", "pattern": {"Regex": "\\p{N}{1,3}"}, "behavior": "Isolated", "invert": false},
                {"type": "ByteLevel", "use_regex": false}
            ]
        });
        let f = parse_tokenizer(&v.to_string()).unwrap();
        assert_eq!(f.model.pretokenizer_pattern, r"\p{N}{1,3}");
        assert_eq!(f.model.alphabet, TokenAlphabet::ByteLevel);

        let sp = json!({
            "model": {"type": "BPE", "vocab": {"<0x41>": 0, "\u{2581}the": 1}, "merges": []},
            "pre_tokenizer": {"type": "Metaspace", "replacement": "\u{2581}"}
        });
        let f = parse_tokenizer(&sp.to_string()).unwrap();
        assert_eq!(f.model.alphabet, TokenAlphabet::Metaspace);
        assert_eq!(f.model.pretokenizer_pattern, "");
    }

    #[test]
    fn changed_pattern_rewrites_pre_tokenizer() {
        let f = TokenizerFile::new(byte_base());
        let mut m = f.model.clone();
        m.pretokenizer_pattern = r" ?\p{L}+|\s+".into();
        let g = f.with_model(m.clone());
        let back = parse_tokenizer(&g.to_json_string()).unwrap();
        assert_eq!(back.model, m);
    }

    #[test]
    fn non_bpe_model_is_rejected() {
        let v = json!({"model": {"type": "Unigram", "vocab": []}});
        assert!(matches!(parse_tokenizer(&v.to_string()), Err(FormatError::Schema(_))));
    }
}

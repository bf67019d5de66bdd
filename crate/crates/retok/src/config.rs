//! Versioned pipeline configuration (TOML).
//!
//! Relative paths resolve against the config file's directory. Any field
//! can be overridden with `section.key=value` strings (TOML values), which
//! is how the CLI's `--set` flag works.

use std::fs;
use std::path::{Path, PathBuf};

use retok_core::allocation::Policy;
use retok_core::eval::RegimeThresholds;
use retok_core::script::PRUNE_CLASSES;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("override {0:?}: expected section.key=value")]
    Override(String),
    #[error("unsupported config version {0} (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub crop: CropConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub allocation: AllocationConfig,
    #[serde(default)]
    pub surgery: SurgeryConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub tokenizer: Option<PathBuf>,
    /// Script table file; the built-in table when absent.
    pub script_table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    pub prune_scripts: Vec<String>,
    pub target_budget: Option<usize>,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig {
            prune_scripts: PRUNE_CLASSES.iter().map(|s| s.to_string()).collect(),
            target_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Corpus manifest or corpus file.
    pub corpus: Option<PathBuf>,
    /// Dead-slot floor, occurrences per 10^9 tokens.
    pub floor_per_billion: u64,
    /// Scripts whose marginal (non-zero) tokens are never dropped.
    pub protect_scripts: Vec<String>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            corpus: None,
            floor_per_billion: 0,
            protect_scripts: retok_core::script::BRAHMIC_SCRIPTS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    /// Script slots to allocate; `None` uses every available dead slot.
    pub budget: Option<usize>,
    pub policy: String,
    /// Scripts that compete for slots; empty means every candidate pool.
    pub scripts: Vec<String>,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        AllocationConfig {
            budget: None,
            policy: Policy::Greedy.name().to_string(),
            scripts: retok_core::script::BRAHMIC_SCRIPTS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl AllocationConfig {
    pub fn policy(&self) -> Result<Policy, ConfigError> {
        Policy::parse(&self.policy).ok_or_else(|| ConfigError::Invalid(format!("unknown policy {:?}", self.policy)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurgeryConfig {
    /// Candidate-merge training corpus.
    pub train_corpus: Option<PathBuf>,
    pub max_candidates: usize,
    pub min_count: u64,
    pub max_token_bytes: usize,
    /// Entry lists, one per line.
    pub words: Option<PathBuf>,
    pub numerals: Option<PathBuf>,
    pub punctuation: Option<PathBuf>,
    pub artifacts: Option<PathBuf>,
    /// Renumber IDs by post-surgery frequency.
    pub permute: bool,
}

impl Default for SurgeryConfig {
    fn default() -> Self {
        let t = retok_core::surgery::TrainConfig::default();
        SurgeryConfig {
            train_corpus: None,
            max_candidates: t.max_candidates,
            min_count: t.min_count,
            max_token_bytes: t.max_token_bytes,
            words: None,
            numerals: None,
            punctuation: None,
            artifacts: None,
            permute: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub ceiling: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            ceiling: retok_core::verify::DEFAULT_CEILING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub corpus: Option<PathBuf>,
    pub byte_fallback_tokens_per_char: f64,
    pub whole_word_tokens_per_word: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let t = RegimeThresholds::default();
        EvalConfig {
            corpus: None,
            byte_fallback_tokens_per_char: t.byte_fallback_tokens_per_char,
            whole_word_tokens_per_word: t.whole_word_tokens_per_word,
        }
    }
}

impl EvalConfig {
    pub fn thresholds(&self) -> RegimeThresholds {
        RegimeThresholds {
            byte_fallback_tokens_per_char: self.byte_fallback_tokens_per_char,
            whole_word_tokens_per_word: self.whole_word_tokens_per_word,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "retok-out".into(),
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            input: InputConfig::default(),
            crop: CropConfig::default(),
            audit: AuditConfig::default(),
            allocation: AllocationConfig::default(),
            surgery: SurgeryConfig::default(),
            verify: VerifyConfig::default(),
            eval: EvalConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts = key.split('.').collect::<Vec<_>>();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConfigError::Override(key.into()))?;
    let mut t = table;
    for p in parts {
        t = t
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(key.into()))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`; values that are not valid TOML are taken as strings.
fn parse_override(s: &str) -> Result<(String, toml::Value), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Override(s.into()))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

impl PipelineConfig {
    /// Parses TOML text, applies overrides, and resolves relative paths
    /// against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text)?;
        if !table.contains_key("version") {
            table.insert("version".into(), toml::Value::Integer(CONFIG_VERSION as i64));
        }
        for o in overrides {
            let (k, v) = parse_override(o)?;
            set_path(&mut table, &k, v)?;
        }
        let mut cfg: PipelineConfig = toml::Value::Table(table).try_into()?;
        if cfg.version != CONFIG_VERSION {
            return Err(ConfigError::Version(cfg.version));
        }
        cfg.resolve(base_dir);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        PipelineConfig::from_toml(&text, path.parent().unwrap_or(Path::new("")), overrides)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.input.tokenizer);
        fix(&mut self.input.script_table);
        fix(&mut self.audit.corpus);
        fix(&mut self.surgery.train_corpus);
        fix(&mut self.surgery.words);
        fix(&mut self.surgery.numerals);
        fix(&mut self.surgery.punctuation);
        fix(&mut self.surgery.artifacts);
        fix(&mut self.eval.corpus);
        if self.output.dir.is_relative() {
            self.output.dir = base.join(&self.output.dir);
        }
    }

    /// Run-start checks: referenced files exist, budgets are positive.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let files = [
            ("input.tokenizer", &self.input.tokenizer),
            ("input.script_table", &self.input.script_table),
            ("audit.corpus", &self.audit.corpus),
            ("surgery.train_corpus", &self.surgery.train_corpus),
            ("surgery.words", &self.surgery.words),
            ("surgery.numerals", &self.surgery.numerals),
            ("surgery.punctuation", &self.surgery.punctuation),
            ("surgery.artifacts", &self.surgery.artifacts),
            ("eval.corpus", &self.eval.corpus),
        ];
        for (name, p) in files {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(ConfigError::Invalid(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        if self.crop.target_budget == Some(0) || self.allocation.budget == Some(0) {
            return Err(ConfigError::Invalid("budgets must be positive".into()));
        }
        if self.verify.ceiling == 0 {
            return Err(ConfigError::Invalid("verify.ceiling must be positive".into()));
        }
        self.allocation.policy()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

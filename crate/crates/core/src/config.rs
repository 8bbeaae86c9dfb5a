//! Runtime configuration.
//!
//! Layers, later ones winning: built-in defaults, a TOML file, environment
//! variables `KGQA_<KEY>` (nested keys joined with `__`, e.g.
//! `KGQA_SCORING__EXACT_MAIN`), and `key=value` overrides from the command
//! line or a request. Values are read as TOML scalars when they parse as
//! such and as plain strings otherwise.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generator::GenerationParams;
use crate::index::ScoringWeights;
use crate::ranker::MAX_IDENTIFIERS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankerKind {
    Lm,
    Lexical,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Lm,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub temperature: f64,
    pub top_p: f64,
    pub beam_width: usize,
    pub keep_skeletons: usize,
    pub search_top_k: usize,
    pub max_steps: usize,
    pub question_timeout_secs: f64,
    pub kg_timeout_secs: f64,
    pub candidate_limit: usize,
    pub max_tokens: usize,

    /// Remote SPARQL endpoint; used when `kg_path` is unset.
    pub endpoint_url: Option<String>,
    /// Triples for the embedded store.
    pub kg_path: Option<PathBuf>,
    pub entity_index: Option<PathBuf>,
    pub property_index: Option<PathBuf>,

    pub lm_url: Option<String>,
    pub lm_timeout_secs: f64,
    pub lm_max_in_flight: usize,

    pub ranker: RankerKind,
    pub generator: GeneratorKind,
    /// Fixture file for the mock generator.
    pub mock_path: Option<PathBuf>,
    pub few_shot_path: Option<PathBuf>,

    /// Concurrent questions in `serve` and `eval`.
    pub workers: usize,
    pub scoring: ScoringWeights,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            temperature: 0.4,
            top_p: 0.9,
            beam_width: 8,
            keep_skeletons: 3,
            search_top_k: 10,
            max_steps: 200,
            question_timeout_secs: 60.0,
            kg_timeout_secs: 30.0,
            candidate_limit: 100_000,
            max_tokens: 256,
            endpoint_url: None,
            kg_path: None,
            entity_index: None,
            property_index: None,
            lm_url: None,
            lm_timeout_secs: 30.0,
            lm_max_in_flight: 4,
            ranker: RankerKind::Lm,
            generator: GeneratorKind::Lm,
            mock_path: None,
            few_shot_path: None,
            workers: 4,
            scoring: ScoringWeights::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("override {0:?} is not of the form key=value")]
    Override(String),
    #[error("{0}")]
    Type(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').map(str::trim).collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| ConfigError::Override(key.to_string()))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Type(format!("{p} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl Config {
    /// Builds a configuration from all layers and validates it.
    pub fn load(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[String],
    ) -> Result<Config, ConfigError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                toml::from_str::<toml::Table>(&text).map_err(|e| ConfigError::Syntax {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?
            }
            None => toml::Table::new(),
        };
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix("KGQA_").map(|k| (k.to_ascii_lowercase().replace("__", "."), v)))
            .collect();
        env.sort();
        for (key, value) in env {
            set_path(&mut table, &key, parse_scalar(&value))?;
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            set_path(&mut table, k.trim(), parse_scalar(v.trim()))?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Type(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides on top of this configuration.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Config, ConfigError> {
        let text = toml::to_string(self).map_err(|e| ConfigError::Type(e.to_string()))?;
        let mut table: toml::Table = toml::from_str(&text).map_err(|e| ConfigError::Type(e.to_string()))?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            set_path(&mut table, k.trim(), parse_scalar(v.trim()))?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Type(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p must lie in (0, 1], got {}", self.top_p));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be a non-negative number, got {}", self.temperature));
        }
        if self.keep_skeletons < 1 {
            return bad("keep_skeletons must be at least 1".into());
        }
        if self.beam_width < self.keep_skeletons {
            return bad(format!(
                "beam_width ({}) must be at least keep_skeletons ({}); raise beam_width or lower keep_skeletons",
                self.beam_width, self.keep_skeletons
            ));
        }
        if self.search_top_k < 1 {
            return bad("search_top_k must be at least 1".into());
        }
        if self.search_top_k + 1 > MAX_IDENTIFIERS {
            return bad(format!(
                "search_top_k ({}) plus the None alternative exceeds the {MAX_IDENTIFIERS} letter identifiers; use at most {}",
                self.search_top_k,
                MAX_IDENTIFIERS - 1
            ));
        }
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1".into());
        }
        for (name, v) in [
            ("question_timeout_secs", self.question_timeout_secs),
            ("kg_timeout_secs", self.kg_timeout_secs),
            ("lm_timeout_secs", self.lm_timeout_secs),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a positive number of seconds, got {v}"));
            }
        }
        if self.candidate_limit < 1 || self.workers < 1 || self.lm_max_in_flight < 1 || self.max_tokens < 1 {
            return bad("candidate_limit, workers, lm_max_in_flight and max_tokens must be at least 1".into());
        }
        self.scoring.validate().map_err(|m| ConfigError::Invalid(format!("scoring: {m}")))?;
        for (name, path) in [
            ("kg_path", &self.kg_path),
            ("entity_index", &self.entity_index),
            ("property_index", &self.property_index),
            ("mock_path", &self.mock_path),
            ("few_shot_path", &self.few_shot_path),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return bad(format!("{name} {} does not exist or is not a file", p.display()));
                }
            }
        }
        Ok(())
    }

    /// Checks what answering questions needs, before any network use.
    pub fn validate_for_answering(&self) -> Result<(), ConfigError> {
        self.validate()?;
        let missing = |what: &str| Err(ConfigError::Invalid(format!("{what} is required")));
        if self.entity_index.is_none() {
            return missing("entity_index");
        }
        if self.property_index.is_none() {
            return missing("property_index");
        }
        if self.kg_path.is_none() && self.endpoint_url.is_none() {
            return missing("kg_path or endpoint_url");
        }
        if self.generator == GeneratorKind::Mock && self.mock_path.is_none() {
            return missing("mock_path (generator = \"mock\")");
        }
        let needs_lm = self.generator == GeneratorKind::Lm || self.ranker == RankerKind::Lm;
        if needs_lm && self.lm_url.is_none() {
            return missing("lm_url (generator or ranker = \"lm\")");
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn generation_params(&self) -> GenerationParams {
        GenerationParams {
            beam_width: self.beam_width,
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_tokens,
        }
    }

    pub fn question_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.question_timeout_secs)
    }

    pub fn kg_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.kg_timeout_secs)
    }

    pub fn lm_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.lm_timeout_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(overrides: &[&str]) -> Result<Config, ConfigError> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        Config::load(None, Vec::new(), &o)
    }

    #[test]
    fn defaults_match_inference_hyperparameters() {
        let c = Config::default();
        assert_eq!(c.temperature, 0.4);
        assert_eq!(c.top_p, 0.9);
        assert_eq!(c.beam_width, 8);
        assert_eq!(c.keep_skeletons, 3);
        assert_eq!(c.search_top_k, 10);
        assert_eq!(c.max_steps, 200);
        assert_eq!(c.question_timeout_secs, 60.0);
        c.validate().unwrap();
        assert_eq!(load(&[]).unwrap(), c);
    }

    #[test]
    fn rejects_invariant_violations() {
        assert!(load(&["search_top_k=26"]).is_err());
        assert!(load(&["search_top_k=25"]).is_ok());
        assert!(load(&["keep_skeletons=9"]).is_err());
        assert!(load(&["keep_skeletons=0"]).is_err());
        assert!(load(&["top_p=0"]).is_err());
        assert!(load(&["top_p=1.0"]).is_ok());
        assert!(load(&["entity_index=/definitely/missing.tsv"]).is_err());
        assert!(load(&["no_such_key=1"]).is_err());
        assert!(load(&["beam_width"]).is_err());
        let e = load(&["search_top_k=30"]).unwrap_err().to_string();
        assert!(e.contains("at most 25"), "{e}");
    }

    #[test]
    fn precedence_file_env_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kgqa.toml");
        std::fs::write(&path, "beam_width = 5\nsearch_top_k = 4\nranker = \"lexical\"\n[scoring]\nngram_min = 0.5\n").unwrap();
        let env = vec![
            ("KGQA_SEARCH_TOP_K".to_string(), "6".to_string()),
            ("KGQA_SCORING__NGRAM_MIN".to_string(), "0.4".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let c = Config::load(Some(&path), env.clone(), &["search_top_k=7".into()]).unwrap();
        assert_eq!(c.beam_width, 5);
        assert_eq!(c.search_top_k, 7);
        assert_eq!(c.ranker, RankerKind::Lexical);
        assert_eq!(c.scoring.ngram_min, 0.4);
        let c = Config::load(Some(&path), env, &[]).unwrap();
        assert_eq!(c.search_top_k, 6);
    }

    #[test]
    fn overrides_and_hash() {
        let base = Config::default();
        let changed = base.with_overrides(&["temperature=0.7".into(), "lm_url=http://x".into()]).unwrap();
        assert_eq!(changed.temperature, 0.7);
        assert_eq!(changed.lm_url.as_deref(), Some("http://x"));
        assert_ne!(base.hash(), changed.hash());
        assert_eq!(base.hash(), Config::default().hash());
        assert_eq!(base.hash().len(), 16);
    }

    #[test]
    fn answering_requires_paths() {
        let e = Config::default().validate_for_answering().unwrap_err().to_string();
        assert!(e.contains("entity_index"), "{e}");
    }
}

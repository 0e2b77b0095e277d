//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! topics = ["id", "name"]          # or: topics_file = "topics.txt"
//! seed = 42
//! out = "out"
//! workers = 4
//! threshold = 0.5
//! allowlist = "licenses.txt"       # optional, newline-delimited
//! pii_policy = "pii.json"          # optional
//!
//! [backend]
//! kind = "simulated"               # or "live"
//! path = "sim"
//!
//! [[registries]]
//! path = "dbpedia.jsonl"
//! ontology = "dbpedia"
//!
//! [embedding]
//! vector_file = "vectors.txt"      # optional; hashed n-grams otherwise
//! dim = 64
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! The API token is never part of the file; it comes from the environment.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotate::DEFAULT_THRESHOLD;
use crate::curate::{LicenseAllowlist, PiiPolicy};
use crate::embed::{
    EmbeddingProvider, NgramParams, DEFAULT_BUCKETS, DEFAULT_DIM, DEFAULT_MAX_N, DEFAULT_MIN_N, HASH_SEED,
};
use crate::harvest::TopicQuery;
use crate::ontology::{load_registry, Ontology, TypeRegistry};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{what} not found: {path}")]
    Missing { what: &'static str, path: PathBuf },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Live,
    Simulated { path: PathBuf },
}

impl BackendConfig {
    /// `live`, `simulated:<path>` or a bare directory path.
    pub fn parse(value: &str) -> Self {
        match value.trim() {
            "live" => BackendConfig::Live,
            s => BackendConfig::Simulated { path: PathBuf::from(s.strip_prefix("simulated:").unwrap_or(s)) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryConfig {
    pub path: PathBuf,
    pub ontology: Ontology,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub vector_file: Option<PathBuf>,
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u64,
    pub hash_seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            vector_file: None,
            dim: DEFAULT_DIM,
            min_n: DEFAULT_MIN_N,
            max_n: DEFAULT_MAX_N,
            buckets: DEFAULT_BUCKETS,
            hash_seed: HASH_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub topics: Vec<String>,
    pub topics_file: Option<PathBuf>,
    pub topic_blocklist: Vec<String>,
    pub backend: BackendConfig,
    pub registries: Vec<RegistryConfig>,
    pub embedding: EmbeddingConfig,
    pub threshold: f64,
    pub allowlist: Option<PathBuf>,
    pub pii_policy: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            topics: Vec::new(),
            topics_file: None,
            topic_blocklist: Vec::new(),
            backend: BackendConfig::Live,
            registries: Vec::new(),
            embedding: EmbeddingConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            allowlist: None,
            pii_policy: None,
            seed: 0,
            out: PathBuf::from("out"),
            workers: 4,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn require(what: &'static str, path: &Path) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(ConfigError::Missing { what, path: path.to_path_buf() })
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

impl PipelineConfig {
    /// Reads, resolves and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &mut self.topics_file {
            resolve(base, p);
        }
        if let BackendConfig::Simulated { path } = &mut self.backend {
            resolve(base, path);
        }
        for r in &mut self.registries {
            resolve(base, &mut r.path);
        }
        if let Some(p) = &mut self.embedding.vector_file {
            resolve(base, p);
        }
        for p in [&mut self.allowlist, &mut self.pii_policy].into_iter().flatten() {
            resolve(base, p);
        }
        resolve(base, &mut self.out);
    }

    /// Checks ranges and that every referenced input exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if let Some(p) = &self.topics_file {
            require("topics file", p)?;
        }
        if let BackendConfig::Simulated { path } = &self.backend {
            require("simulated backend directory", path)?;
        }
        for r in &self.registries {
            require("registry", &r.path)?;
        }
        if let Some(p) = &self.embedding.vector_file {
            require("vector file", p)?;
        }
        if let Some(p) = &self.allowlist {
            require("license allowlist", p)?;
        }
        if let Some(p) = &self.pii_policy {
            require("PII policy", p)?;
        }
        for t in &self.topics {
            TopicQuery::new(t).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Topics from the list and the topics file, blocklist removed,
    /// deduplicated in first-seen order.
    pub fn topics(&self) -> Result<Vec<TopicQuery>, ConfigError> {
        let mut raw: Vec<String> = self.topics.clone();
        if let Some(p) = &self.topics_file {
            raw.extend(
                read(p)?.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from),
            );
        }
        let blocked: Vec<String> = self.topic_blocklist.iter().map(|t| t.trim().to_lowercase()).collect();
        let mut out: Vec<TopicQuery> = Vec::new();
        for t in raw {
            let q = TopicQuery::new(&t).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if !blocked.iter().any(|b| b == q.topic()) && !out.iter().any(|o| o.topic() == q.topic()) {
                out.push(q);
            }
        }
        Ok(out)
    }

    pub fn provider(&self) -> Result<EmbeddingProvider, ConfigError> {
        let e = &self.embedding;
        let params = NgramParams { min_n: e.min_n, max_n: e.max_n, buckets: e.buckets, seed: e.hash_seed };
        match &e.vector_file {
            Some(p) => EmbeddingProvider::from_vector_file(p, params),
            None => EmbeddingProvider::hashed(e.dim, params),
        }
        .map_err(|err| ConfigError::Invalid(format!("embedding: {err}")))
    }

    pub fn load_registries(&self) -> Result<Vec<TypeRegistry>, ConfigError> {
        self.registries
            .iter()
            .map(|r| load_registry(&r.path, r.ontology).map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect()
    }

    pub fn allowlist(&self) -> Result<LicenseAllowlist, ConfigError> {
        match &self.allowlist {
            Some(p) => LicenseAllowlist::from_text(&read(p)?).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(LicenseAllowlist::default()),
        }
    }

    pub fn pii_policy(&self) -> Result<PiiPolicy, ConfigError> {
        match &self.pii_policy {
            Some(p) => PiiPolicy::from_json(&read(p)?).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(PiiPolicy::default()),
        }
    }

    /// Hex SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(json.to_string().as_bytes()))
    }
}

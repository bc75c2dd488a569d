//! Run configuration, loaded from TOML with environment overrides.
//!
//! ```toml
//! top_k = 10
//! seed = 7
//! reproducible_output = true
//!
//! [gateway]
//! backend = "remote"
//! endpoint = "https://api.example.com/v1/chat/completions"
//! model = "some-model"
//!
//! [embedding]
//! backend = "mock"
//! dim = 64
//! ```
//!
//! API keys are read from `RAD_API_KEY` and `RAD_EMBEDDING_API_KEY` only.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClusterConfig, CustomHeading, HeadingDetector};
use crate::gateway::{Gateway, RemoteBackend, RemoteConfig};
use crate::index::{EmbeddingProvider, MockEmbedder, RemoteEmbedder, DEFAULT_MOCK_DIM};
use crate::panel::EXPERT_COUNT;

pub const DEFAULT_TOP_K: usize = 10;

pub const ENV_GATEWAY_ENDPOINT: &str = "RAD_GATEWAY_ENDPOINT";
pub const ENV_GATEWAY_MODEL: &str = "RAD_GATEWAY_MODEL";
pub const ENV_API_KEY: &str = "RAD_API_KEY";
pub const ENV_EMBEDDING_ENDPOINT: &str = "RAD_EMBEDDING_ENDPOINT";
pub const ENV_EMBEDDING_MODEL: &str = "RAD_EMBEDDING_MODEL";
pub const ENV_EMBEDDING_API_KEY: &str = "RAD_EMBEDDING_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(Self::Mock),
            "remote" => Ok(Self::Remote),
            other => Err(format!("unknown backend `{other}` (expected mock or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteSettings {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: None,
            temperature: 0.0,
            max_in_flight: 4,
            timeout_secs: 120,
            api_key: None,
        }
    }
}

impl RemoteSettings {
    fn remote_config(&self, what: &str) -> Result<RemoteConfig, ConfigError> {
        let need = |v: &Option<String>, field: &str| {
            v.clone()
                .filter(|s| !s.trim().is_empty())
                .ok_or_else(|| ConfigError::Invalid(format!("remote {what} needs `{field}`")))
        };
        Ok(RemoteConfig {
            endpoint: need(&self.endpoint, "endpoint")?,
            model: need(&self.model, "model")?,
            api_key: self.api_key.clone(),
            temperature: self.temperature,
            max_in_flight: self.max_in_flight.max(1),
            timeout_secs: self.timeout_secs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewaySettings {
    pub backend: BackendKind,
    #[serde(flatten)]
    pub remote: RemoteSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSettings {
    pub backend: BackendKind,
    /// Mock vector length.
    pub dim: usize,
    #[serde(flatten)]
    pub remote: RemoteSettings,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            dim: DEFAULT_MOCK_DIM,
            remote: RemoteSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSettings {
    #[serde(flatten)]
    pub cluster: ClusterConfig,
    pub custom_headings: Vec<CustomHeading>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub store: PathBuf,
    pub model: PathBuf,
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            store: "rad-store".into(),
            model: "model.json".into(),
            report: "report.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub top_k: usize,
    pub seed: Option<u64>,
    pub reproducible_output: bool,
    pub experts: usize,
    pub gateway: GatewaySettings,
    pub embedding: EmbeddingSettings,
    pub corpus: CorpusSettings,
    pub paths: Paths,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            seed: None,
            reproducible_output: false,
            experts: EXPERT_COUNT,
            gateway: GatewaySettings::default(),
            embedding: EmbeddingSettings::default(),
            corpus: CorpusSettings::default(),
            paths: Paths::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Applies the `RAD_*` overrides through `lookup` (normally
    /// `std::env::var`).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let set = |slot: &mut Option<String>, key: &str| {
            if let Some(v) = lookup(key).filter(|v| !v.is_empty()) {
                *slot = Some(v);
            }
        };
        set(&mut self.gateway.remote.endpoint, ENV_GATEWAY_ENDPOINT);
        set(&mut self.gateway.remote.model, ENV_GATEWAY_MODEL);
        set(&mut self.gateway.remote.api_key, ENV_API_KEY);
        set(&mut self.embedding.remote.endpoint, ENV_EMBEDDING_ENDPOINT);
        set(&mut self.embedding.remote.model, ENV_EMBEDDING_MODEL);
        set(&mut self.embedding.remote.api_key, ENV_EMBEDDING_API_KEY);
        // one key for both services unless a separate one is given
        if self.embedding.remote.api_key.is_none() {
            self.embedding.remote.api_key = self.gateway.remote.api_key.clone();
        }
    }

    pub fn apply_process_env(&mut self) {
        self.apply_env(|k| std::env::var(k).ok());
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        if self.experts == 0 {
            return bad("experts must be at least 1");
        }
        let any_mock = self.gateway.backend == BackendKind::Mock || self.embedding.backend == BackendKind::Mock;
        if any_mock && self.seed.is_none() {
            return bad("a seed is required when a mock backend is selected");
        }
        if self.embedding.backend == BackendKind::Mock && self.embedding.dim == 0 {
            return bad("embedding dim must be at least 1");
        }
        let c = &self.corpus.cluster;
        if !(0.0..=2.0).contains(&c.level2_cut) || !(0.0..=2.0).contains(&c.level1_cut) {
            return bad("cluster cuts are cosine distances in [0, 2]");
        }
        if c.level2_cut > c.level1_cut {
            return bad("level2_cut must not exceed level1_cut");
        }
        if self.gateway.backend == BackendKind::Remote {
            self.gateway.remote.remote_config("gateway")?;
        }
        if self.embedding.backend == BackendKind::Remote {
            self.embedding.remote.remote_config("embedding")?;
        }
        HeadingDetector::new(&self.corpus.custom_headings)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn gateway(&self) -> Result<Gateway, ConfigError> {
        Ok(match self.gateway.backend {
            BackendKind::Mock => Gateway::mock(self.seed()),
            BackendKind::Remote => Gateway::new(RemoteBackend::new(self.gateway.remote.remote_config("gateway")?)),
        })
    }

    pub fn embedder(&self) -> Result<Box<dyn EmbeddingProvider>, ConfigError> {
        Ok(match self.embedding.backend {
            BackendKind::Mock => Box::new(MockEmbedder::new(self.seed(), self.embedding.dim)),
            BackendKind::Remote => Box::new(RemoteEmbedder::new(
                self.embedding.remote.remote_config("embedding")?,
            )),
        })
    }

    pub fn detector(&self) -> Result<HeadingDetector, ConfigError> {
        HeadingDetector::new(&self.corpus.custom_headings).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Short description of the embedding provider, stored in the manifest.
    pub fn embedding_label(&self) -> String {
        match self.embedding.backend {
            BackendKind::Mock => format!("mock(seed={}, dim={})", self.seed(), self.embedding.dim),
            BackendKind::Remote => format!("remote({})", self.embedding.remote.model.as_deref().unwrap_or("?")),
        }
    }

    /// Settings that affect model content. Paths, keys and the output flag
    /// are left out so the snapshot does not depend on where files live.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("paths");
            obj.remove("reproducible_output");
        }
        v
    }
}

//! Run configuration file (TOML) with `[pipeline]` and `[backend]` tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::http::DEFAULT_TIMEOUT_MS;
use crate::backends::{Backends, HttpBackend};
use crate::error::{Error, Result};
use crate::types::PipelineConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Deterministic reference backends.
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: Option<String>,
    pub timeout_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            base_url: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

impl BackendConfig {
    /// Interprets a `--backend` argument: `mock` or a service base URL.
    pub fn from_flag(flag: &str, timeout_ms: u64) -> Result<Self> {
        if flag == "mock" {
            return Ok(BackendConfig {
                kind: BackendKind::Mock,
                base_url: None,
                timeout_ms,
            });
        }
        let cfg = BackendConfig {
            kind: BackendKind::Http,
            base_url: Some(flag.to_string()),
            timeout_ms,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::Config("backend.timeout_ms must be positive".into()));
        }
        if self.kind == BackendKind::Http {
            // the client is built without TLS
            match self.base_url.as_deref() {
                Some(url) if url.starts_with("http://") && url.len() > "http://".len() => {}
                Some(url) => {
                    return Err(Error::Config(format!(
                        "backend must be \"mock\" or an http:// URL, got {url:?}"
                    )))
                }
                None => {
                    return Err(Error::Config("backend.base_url is required for kind = \"http\"".into()))
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Backends> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => Backends::reference(),
            BackendKind::Http => Backends::http(HttpBackend::new(
                self.base_url.clone().unwrap_or_default(),
                self.timeout_ms,
            )),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub backend: BackendConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.backend.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [pipeline]
            n_pairs = 4
            top_p = 0.9
            k_retrieve = 3
            span_multiplier = 2
            max_generation_rounds = 2
            rng_seed = 17

            [backend]
            kind = "http"
            base_url = "http://127.0.0.1:8000"
            timeout_ms = 500
            "#,
        )
        .unwrap();
        assert_eq!(cfg.pipeline.n_pairs, 4);
        assert_eq!(cfg.pipeline.rng_seed, 17);
        assert_eq!(cfg.backend.kind, BackendKind::Http);
        assert_eq!(cfg.backend.timeout_ms, 500);
    }

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml_str("[pipeline]\nk_retrieve = 0\n").is_err());
        assert!(RunConfig::from_toml_str("[pipeline]\nbeam = 3\n").is_err());
        assert!(RunConfig::from_toml_str("[backend]\nkind = \"http\"\n").is_err());
        assert!(RunConfig::from_toml_str("[backend]\nkind = \"grpc\"\n").is_err());
    }

    #[test]
    fn backend_flag() {
        assert_eq!(BackendConfig::from_flag("mock", 10).unwrap().kind, BackendKind::Mock);
        let h = BackendConfig::from_flag("http://localhost:9", 10).unwrap();
        assert_eq!(h.base_url.as_deref(), Some("http://localhost:9"));
        assert!(BackendConfig::from_flag("localhost", 10).is_err());
        assert!(BackendConfig::from_flag("https://example.org", 10).is_err());
    }
}

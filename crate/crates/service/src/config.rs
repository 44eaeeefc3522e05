use std::path::PathBuf;

use crate::error::ServiceError;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub model_dir: Option<PathBuf>,
    pub expert_tokens: Vec<String>,
    pub dict_file: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("data"),
            model_dir: None,
            expert_tokens: Vec::new(),
            dict_file: None,
        }
    }
}

impl ServiceConfig {
    /// Read `MTLOOP_PORT`, `MTLOOP_DATA_DIR`, `MTLOOP_MODEL_DIR`,
    /// `MTLOOP_EXPERT_TOKENS` (comma separated) and `MTLOOP_DICT_FILE`.
    pub fn from_env() -> Result<Self, ServiceError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        let mut config = ServiceConfig::default();
        if let Some(port) = get("MTLOOP_PORT") {
            config.port = port
                .trim()
                .parse()
                .map_err(|_| ServiceError::Config(format!("MTLOOP_PORT is not a port number: {port:?}")))?;
        }
        if let Some(dir) = get("MTLOOP_DATA_DIR").filter(|s| !s.is_empty()) {
            config.data_dir = dir.into();
        }
        config.model_dir = get("MTLOOP_MODEL_DIR").filter(|s| !s.is_empty()).map(PathBuf::from);
        config.dict_file = get("MTLOOP_DICT_FILE").filter(|s| !s.is_empty()).map(PathBuf::from);
        if let Some(tokens) = get("MTLOOP_EXPERT_TOKENS") {
            config.expert_tokens = tokens.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned).collect();
        }
        Ok(config)
    }
}

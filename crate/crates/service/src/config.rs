use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use trends_core::{Error, Result};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

/// Listen address and corpus directories. Read from a `key = value` file
/// (`listen`, `corpora` as a comma-separated list), then overridden by flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub corpora: Vec<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            corpora: Vec::new(),
        }
    }
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ServiceConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let value = value.trim();
            match key.trim() {
                "listen" => config.listen = parse_listen(value)?,
                "corpora" => {
                    config.corpora = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(PathBuf::from)
                        .collect()
                }
                other => {
                    return Err(Error::Config(format!("line {}: unknown key {other:?}", i + 1)))
                }
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Apply command-line overrides; an empty list keeps the file's corpora.
    pub fn with_overrides(mut self, listen: Option<SocketAddr>, corpora: Vec<PathBuf>) -> Self {
        if let Some(addr) = listen {
            self.listen = addr;
        }
        if !corpora.is_empty() {
            self.corpora = corpora;
        }
        self
    }
}

pub fn parse_listen(s: &str) -> Result<SocketAddr> {
    s.parse()
        .map_err(|_| Error::Config(format!("invalid listen address {s:?}")))
}

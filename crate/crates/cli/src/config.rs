//! Flat key=value experiment configuration with documented defaults.
//!
//! Precedence: built-in defaults, then the config file, then command-line
//! overrides. Every key the run consumed is echoed into the JSON report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// keys actually read by the experiment, with the values used
    consumed: std::cell::RefCell<BTreeMap<String, String>>,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config io error: {e}"),
            ConfigError::Parse(s) => write!(f, "config parse error: {s}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn from_file(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        let mut cfg = Config::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Parse(format!(
                    "line {}: expected key=value, got {line:?}",
                    lineno + 1
                )));
            };
            cfg.values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        let v = self
            .values
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string());
        self.consumed.borrow_mut().insert(key.to_string(), v.clone());
        v
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        let v = self.get_str(key, &default.to_string());
        v.parse()
            .map_err(|_| ConfigError::Parse(format!("{key}: expected integer, got {v:?}")))
    }

    pub fn get_i64(&self, key: &str, default: i64) -> Result<i64, ConfigError> {
        let v = self.get_str(key, &default.to_string());
        v.parse()
            .map_err(|_| ConfigError::Parse(format!("{key}: expected integer, got {v:?}")))
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.get_str(key, &default.to_string());
        v.parse()
            .map_err(|_| ConfigError::Parse(format!("{key}: expected number, got {v:?}")))
    }

    pub fn get_u64_list(&self, key: &str, default: &str) -> Result<Vec<u64>, ConfigError> {
        let v = self.get_str(key, default);
        v.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    ConfigError::Parse(format!("{key}: expected integer list, got {v:?}"))
                })
            })
            .collect()
    }

    pub fn get_path(&self, key: &str) -> Option<PathBuf> {
        let v = self.values.get(key).cloned();
        if let Some(ref v) = v {
            self.consumed.borrow_mut().insert(key.to_string(), v.clone());
        }
        v.map(PathBuf::from)
    }

    /// Everything the experiment read, for the report echo.
    pub fn consumed(&self) -> BTreeMap<String, String> {
        self.consumed.borrow().clone()
    }
}

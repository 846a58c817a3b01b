//! Flat `key = value` configuration files with CLI-flag overrides.
//!
//! Recognised base keys: `m`, `omega`, `theta`, `hbar`, `seed`. Any other
//! key is kept verbatim so subcommands can pull their own numeric knobs.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::params::{ParamError, PhysParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("key `{key}`: cannot parse `{value}` as a number")]
    BadNumber { key: String, value: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Parsed configuration: ordered so that serialization is deterministic.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Config::default()
    }

    /// Parse flat `key = value` text. `#` starts a comment; blank lines are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&text)
    }

    /// Apply an override (CLI flags win over file values).
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse_with(key, str::parse::<f64>)
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.parse_with(key, str::parse::<u64>)
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parse_with(key, str::parse::<usize>)
    }

    fn parse_with<T, E>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<Option<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).map_err(|_| ConfigError::BadNumber {
                key: key.to_string(),
                value: v.clone(),
            }),
        }
    }

    /// Assemble validated physical parameters (normalized units) from the
    /// base keys, defaulting to the unit set.
    pub fn phys_params(&self) -> Result<PhysParams, ConfigError> {
        let p = PhysParams::new(
            self.get_f64("m")?.unwrap_or(1.0),
            self.get_f64("omega")?.unwrap_or(1.0),
            self.get_f64("theta")?.unwrap_or(1.0),
            self.get_f64("hbar")?.unwrap_or(1.0),
        )?;
        Ok(p.normalized())
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        Ok(self.get_u64("seed")?.unwrap_or(0))
    }

    /// Stable `key = value` rendering (sorted by key).
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut c = Config::parse("m = 2\nomega = 0.5\n# comment\ntheta = 3 # inline\n").unwrap();
        assert_eq!(c.get_f64("m").unwrap(), Some(2.0));
        c.set("m", 4.0);
        assert_eq!(c.get_f64("m").unwrap(), Some(4.0));
        let p = c.phys_params().unwrap();
        assert!((p.m * p.omega - 1.0).abs() < 1e-15);
        assert!((p.ell_theta().powi(2) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_line() {
        assert!(Config::parse("just words\n").is_err());
    }

    #[test]
    fn rejects_bad_number() {
        let c = Config::parse("m = banana\n").unwrap();
        assert!(c.get_f64("m").is_err());
    }

    #[test]
    fn defaults_to_unit_params_and_zero_seed() {
        let c = Config::new();
        let p = c.phys_params().unwrap();
        assert_eq!(p, PhysParams::unit());
        assert_eq!(c.seed().unwrap(), 0);
    }
}

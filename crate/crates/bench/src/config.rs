//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. List values are
//! comma separated. Unknown keys are rejected so that typos do not silently
//! fall back to defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{BenchError, Result};

pub const KEYS: &[&str] = &[
    "p",
    "s",
    "n_over_q",
    "runs",
    "samples",
    "burn_in",
    "alpha",
    "beta",
    "mass_method",
    "cover",
    "sigma_e",
    "folds",
    "grid_size",
    "train_fraction",
    // Extensions beyond the core key set.
    "prelim",
    "iterations",
    "data",
    "clique_budget",
    "tol",
    "warmup",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(BenchError::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(BenchError::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets or replaces a key; used to build configs programmatically.
    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        assert!(KEYS.contains(&key), "unknown key {key}");
        self.values.insert(key.to_string(), value.to_string());
        self
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn string(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| BenchError::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn list<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|item| item.trim().parse().map_err(|_| BenchError::Config(format!("{key}: cannot parse {item:?}"))))
                .collect(),
        }
    }
}

/// Broadcasts a scalar list to `len` cases; longer lists must match.
pub fn expand<T: Clone>(key: &str, values: Vec<T>, len: usize) -> Result<Vec<T>> {
    match values.len() {
        n if n == len => Ok(values),
        1 => Ok(vec![values[0].clone(); len]),
        n => Err(BenchError::Config(format!("{key}: {n} values for {len} cases"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_and_lists() {
        let c = Config::parse("# comment\np = 10, 25,50\ns=0.5\n\nmass_method = wishart\n").unwrap();
        assert_eq!(c.list::<usize>("p", &[]).unwrap(), vec![10, 25, 50]);
        assert_eq!(c.get("s", 0.0).unwrap(), 0.5);
        assert_eq!(c.get("runs", 3usize).unwrap(), 3);
        assert_eq!(c.string("mass_method"), Some("wishart"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("q = 1").is_err());
        assert!(Config::parse("p 10").is_err());
        assert!(Config::parse("p = 1\np = 2").is_err());
        assert!(Config::parse("p = x").unwrap().get("p", 0usize).is_err());
    }

    #[test]
    fn broadcasting() {
        assert_eq!(expand("s", vec![7], 3).unwrap(), vec![7, 7, 7]);
        assert_eq!(expand("s", vec![1, 2, 3], 3).unwrap(), vec![1, 2, 3]);
        assert!(expand("s", vec![1, 2], 3).is_err());
    }
}

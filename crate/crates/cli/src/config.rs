//! `key = value` run files. Keys are long flag names; `-` and `_` are
//! interchangeable. Blank lines and lines starting with `#` are ignored.
//! Command-line flags take precedence over the file.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;

use crate::UsageError;

const KEYS: &[&str] = &[
    "seed",
    "out",
    "quiet",
    "family",
    "n",
    "a",
    "b",
    "c",
    "surface",
    "noise_level",
    "noise_scale_u",
    "margin",
    "shift_c",
    "epsilon",
    "delta",
    "bandwidth",
    "kernel",
    "directions",
    "max_length",
    "k",
    "start",
    "coords",
    "chart",
    "grid_side",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key `{key}`", i + 1));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key `{key}`", i + 1));
            }
        }
        Ok(ConfigFile { values })
    }

    /// The flag if given, else the parsed file value, else `None`.
    pub fn pick<T, E: std::fmt::Display>(
        &self,
        flag: Option<T>,
        key: &str,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<Option<T>, UsageError> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| parse(v).map_err(|e| UsageError(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    pub fn pick_str<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(flag, key, str::parse)
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool, UsageError> {
        Ok(self.pick_str(flag.then_some(true), key)?.unwrap_or(false))
    }
}

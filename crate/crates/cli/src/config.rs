//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Keys use the long flag names with `-` or `_` interchangeably. Unknown
//! and repeated keys are rejected. Values given on the command line take
//! precedence over the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every key a config file may set.
pub const KEYS: &[&str] = &[
    "mu",
    "L",
    "alpha",
    "eta_d",
    "p_d",
    "f",
    "var",
    "lo",
    "hi",
    "step",
    "ie_compare",
    "workers",
    "mu_lo",
    "mu_hi",
    "method",
    "seed",
    "population",
    "generations",
    "mutation_sigma",
    "l_hi",
    "rounds",
    "basis_policy",
    "check_fraction",
    "attack",
    "flip",
    "ie",
];

fn normalize(key: &str) -> String {
    let k = key.trim().replace('-', "_");
    if k.eq_ignore_ascii_case("l") || k == "length_km" {
        "L".to_string()
    } else {
        k
    }
}

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {line_no}: expected key = value"))?;
            let key = normalize(k);
            if !KEYS.contains(&key.as_str()) {
                bail!("line {line_no}: unknown key {:?}", k.trim());
            }
            let value = v.trim();
            if value.is_empty() {
                bail!("line {line_no}: empty value for {key}");
            }
            if values.insert(key.clone(), (value.to_string(), line_no)).is_some() {
                bail!("line {line_no}: duplicate key {key}");
            }
        }
        Ok(Self { values })
    }

    /// `flag` if given, otherwise the parsed file value, if any.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some((v, line)) => {
                v.parse().map(Some).map_err(|e| anyhow!("config line {line}: bad value {v:?} for {key}: {e}"))
            }
        }
    }

    pub fn or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }
}

//! Optional `key = value` config files. Flags always win; the file
//! only supplies defaults for keys the command would otherwise fill
//! from its built-ins.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    /// Loads a config file if one was named. Lines are `key = value`;
    /// `#` starts a comment; blank lines are ignored.
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    number + 1
                );
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T> {
        raw.parse()
            .map_err(|_| anyhow::anyhow!("config key `{key}` has unusable value `{raw}`"))
    }

    /// The file's value for `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|raw| Self::parse(key, raw))
            .transpose()
    }

    /// A comma-separated list value for `key`, if present.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(raw) = self.values.get(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(|part| Self::parse(key, part.trim()))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Flag value if given, else file value, else the default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// List-valued counterpart of [`FileConfig::resolve`].
    pub fn resolve_list<T: FromStr>(
        &self,
        flag: Option<Vec<T>>,
        key: &str,
        default: Vec<T>,
    ) -> Result<Vec<T>> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get_list(key)?.unwrap_or(default)),
        }
    }
}

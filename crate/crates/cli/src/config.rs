//! Flat `key = value` configuration files with one section per command.
//!
//! ```text
//! # lines starting with '#' are comments
//! [generate]
//! kind = sines
//! n = 2500
//!
//! [train]
//! dataset = data/sines.csv
//! ```
//!
//! Command-line flags override config values ("flag wins"). Keys a command
//! does not recognize are rejected before any work starts.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

/// Parsed config file: section name -> key -> value.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::runtime(format!("cannot read config {}: {e}", path.display()))
        })?;
        FileConfig::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<FileConfig, CliError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                if sections.contains_key(&name) {
                    return Err(CliError::validation(format!(
                        "{origin}:{}: duplicate section [{name}]",
                        i + 1
                    )));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::validation(format!(
                    "{origin}:{}: expected 'key = value', got {line:?}",
                    i + 1
                )));
            };
            let section = current.as_ref().ok_or_else(|| {
                CliError::validation(format!(
                    "{origin}:{}: key outside of any [section]",
                    i + 1
                ))
            })?;
            let key = key.trim().to_string();
            let map = sections.get_mut(section).unwrap();
            if map.contains_key(&key) {
                return Err(CliError::validation(format!(
                    "{origin}:{}: duplicate key {key:?} in [{section}]",
                    i + 1
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { sections })
    }

    /// The keys of one command's section, to be consumed by a [`Resolver`].
    pub fn section(&self, name: &str) -> BTreeMap<String, String> {
        self.sections.get(name).cloned().unwrap_or_default()
    }
}

/// Pulls typed values out of one section, tracking which keys were used so
/// that leftovers can be rejected.
pub struct Resolver {
    section: String,
    values: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config: &FileConfig, section: &str) -> Resolver {
        Resolver { section: section.to_string(), values: config.section(section) }
    }

    /// Flag wins; then config; then the default.
    pub fn get<T: std::str::FromStr>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        Ok(self.get_opt(key, flag)?.unwrap_or(default))
    }

    /// Flag wins; then config; `None` if neither is present.
    pub fn get_opt<T: std::str::FromStr>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError> {
        let from_file = self.values.remove(key);
        if let Some(v) = flag {
            return Ok(Some(v));
        }
        match from_file {
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::validation(format!(
                    "[{}] {key} = {raw:?} cannot be parsed",
                    self.section
                ))
            }),
            None => Ok(None),
        }
    }

    /// Like [`Resolver::get_opt`] but the value must come from somewhere.
    pub fn require<T: std::str::FromStr>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<T, CliError> {
        self.get_opt(key, flag)?.ok_or_else(|| {
            CliError::validation(format!(
                "missing required setting {key:?} (flag --{key} or [{}] {key} = ...)",
                self.section
            ))
        })
    }

    /// Rejects any key the command did not consume.
    pub fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.values.keys().next() {
            return Err(CliError::validation(format!(
                "unknown key {key:?} in [{}]",
                self.section
            )));
        }
        Ok(())
    }
}

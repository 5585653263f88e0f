//! Run manifests: every artifact traceable to the settings that made it.
//!
//! Manifests are JSON with sorted keys and no timestamps, so reruns with the
//! same configuration produce identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub manifest_version: u32,
    pub command: String,
    pub settings: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Manifest {
        Manifest {
            tool: "probtsf",
            manifest_version: 1,
            command: command.to_string(),
            settings: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.settings.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::runtime(format!("manifest serialization failed: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    }
}

//! `run.json`: what produced the files in an output directory.

use knife::data::KTRL_VERSION;
use knife::diffengine::{hex_digest, PARAMS_VERSION};
use knife::pipeline::TrainConfig;
use knife::{Error, Result};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&bytes))
}

fn hashes(paths: &[PathBuf]) -> Result<Vec<Value>> {
    paths
        .iter()
        .map(|p| Ok(json!({ "path": p.display().to_string(), "sha256": file_hash(p)? })))
        .collect()
}

pub struct Run<'a> {
    pub command: &'a str,
    pub argv: &'a [String],
    pub config: &'a TrainConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Command-specific settings not in the config.
    pub extra: Value,
}

impl Run<'_> {
    /// Writes `<out>/run.json`. Contains no timestamps, so identical runs
    /// give identical records.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let config = serde_json::to_value(self.config).map_err(|e| Error::Format(e.to_string()))?;
        let record = json!({
            "command": self.command,
            "argv": self.argv.get(1..).unwrap_or_default(),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.config.seed,
            "config": config,
            "config_text": self.config.to_text(),
            "config_hash": self.config.hash(),
            "formats": { "ktrl": KTRL_VERSION, "knif": PARAMS_VERSION },
            "settings": self.extra,
            "inputs": hashes(&self.inputs)?,
            "outputs": hashes(&self.outputs)?,
        });
        let path = out.join("run.json");
        let mut text = serde_json::to_string_pretty(&record).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

//! Reproducibility records written beside every CLI output.
//!
//! A record is a config file: the full pipeline configuration as `key = value`
//! lines, preceded by `#` comment lines naming the command, the input and
//! output digests. Feeding it back through `--config` reruns the command with
//! identical settings.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::corpus::CorpusManifest;
use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Digest over every entry's relative path and file digest, in manifest
/// order. Changes whenever any referenced audio changes.
pub fn corpus_digest(manifest: &CorpusManifest) -> Result<String> {
    let mut h = Sha256::new();
    for entry in &manifest.entries {
        let file = sha256_file(manifest.resolve(entry))?;
        h.update(format!("{}\t{file}\n", entry.path));
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproRecord {
    pub command: String,
    pub config: PipelineConfig,
    /// `(name, sha256)` of each input.
    pub inputs: Vec<(String, String)>,
    /// `(name, sha256)` of each deterministic output.
    pub outputs: Vec<(String, String)>,
}

impl ReproRecord {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# command: {}\n", self.command);
        for (name, digest) in &self.inputs {
            let _ = writeln!(out, "# input_sha256 {name}: {digest}");
        }
        for (name, digest) in &self.outputs {
            let _ = writeln!(out, "# output_sha256 {name}: {digest}");
        }
        out.push_str(&self.config.to_text());
        out
    }

    /// Reads back a record; the comment header is parsed for digests.
    pub fn from_text(text: &str) -> Result<Self> {
        let config = PipelineConfig::from_text(text)?;
        let mut rec = Self::new("", &config);
        for line in text.lines().filter_map(|l| l.trim().strip_prefix('#')) {
            let line = line.trim();
            if let Some(cmd) = line.strip_prefix("command:") {
                rec.command = cmd.trim().into();
                continue;
            }
            let (kind, rest) = match line.split_once(' ') {
                Some(p) => p,
                None => continue,
            };
            let Some((name, digest)) = rest.rsplit_once(':') else {
                continue;
            };
            let pair = (name.trim().to_string(), digest.trim().to_string());
            match kind {
                "input_sha256" => rec.inputs.push(pair),
                "output_sha256" => rec.outputs.push(pair),
                _ => {}
            }
        }
        Ok(rec)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn record_round_trip() {
        let mut rec = ReproRecord::new("train", &PipelineConfig::default());
        rec.inputs.push(("manifest.csv".into(), "00ff".into()));
        rec.outputs.push(("report.json".into(), "abcd".into()));
        let back = ReproRecord::from_text(&rec.to_text()).unwrap();
        assert_eq!(back, rec);
    }
}

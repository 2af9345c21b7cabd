//! Run manifests: every CLI run records its exact invocation, input
//! digests, and outputs. The manifest is written last, so its presence
//! certifies a completed run, and replaying the recorded argv reproduces
//! the primary outputs byte for byte (seeded runs included).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub struct ManifestBuilder {
    subcommand: String,
    argv: Vec<String>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    seed: Option<u64>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, argv: &[String]) -> Self {
        ManifestBuilder {
            subcommand: subcommand.to_string(),
            argv: argv.to_vec(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            seed: None,
            started: Instant::now(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        self.inputs
            .insert(path.display().to_string(), hex::encode(digest));
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn record_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Write `<primary>.manifest.json` next to the primary output.
    pub fn write(self, primary: &Path) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: self.subcommand,
            argv: self.argv,
            input_digests: self.inputs,
            outputs: self.outputs,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            seed: self.seed,
        };
        let mut path = primary.as_os_str().to_owned();
        path.push(".manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

impl From<serde_json::Error> for crate::error::Error {
    fn from(e: serde_json::Error) -> Self {
        crate::error::Error::Data(format!("json: {e}"))
    }
}

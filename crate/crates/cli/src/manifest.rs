//! Run manifests: enough metadata to reproduce an output bit for bit.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    /// The full command line as invoked.
    pub command: Vec<String>,
    pub input_path: String,
    pub input_sha256: String,
    pub data_path: Option<String>,
    pub data_sha256: Option<String>,
    pub seed: u64,
    /// Resolved configuration after defaults and environment fallbacks.
    pub config: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

impl RunManifest {
    pub fn new(
        command: Vec<String>,
        input_path: &Path,
        input_text: &str,
        data: Option<(&Path, &str)>,
        seed: u64,
        config: serde_json::Value,
    ) -> Self {
        RunManifest {
            tool: "slicc",
            version: env!("CARGO_PKG_VERSION"),
            command,
            input_path: input_path.display().to_string(),
            input_sha256: sha256_hex(input_text.as_bytes()),
            data_path: data.map(|(p, _)| p.display().to_string()),
            data_sha256: data.map(|(_, text)| sha256_hex(text.as_bytes())),
            seed,
            config,
        }
    }

    /// Writes `<output>.manifest.json` next to an output artifact.
    pub fn write_alongside(&self, output: &Path) -> std::io::Result<()> {
        let path = manifest_path(output);
        let text = serde_json::to_string_pretty(self).expect("serialisable");
        std::fs::write(path, text + "\n")
    }
}

pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

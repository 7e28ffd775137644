//! Content digests and the provenance block embedded in every output.

use std::fs;
use std::path::Path;

use lcr_core::similarity::DatasetStore;
use lcr_core::Result;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "lcr";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    /// `(role, sha256)` pairs in the order the inputs were read.
    pub inputs: Vec<(String, String)>,
    /// Flags that change the output, in declaration order.
    pub params: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            seed,
            inputs: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, digest: String) -> &mut Self {
        self.inputs.push((role.to_string(), digest));
        self
    }

    pub fn param(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.params.push((name.to_string(), value.to_string()));
        self
    }

    /// One `key value` line per entry, for CSV `#` comments.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("tool {} {}", self.tool, self.version),
            format!("command {}", self.command),
            format!("seed {}", self.seed),
        ];
        out.extend(self.inputs.iter().map(|(r, d)| format!("input {r} sha256:{d}")));
        out.extend(self.params.iter().map(|(k, v)| format!("param {k} {v}")));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |v: &[(String, String)]| {
            v.iter().map(|(k, d)| (k.clone(), serde_json::Value::String(d.clone()))).collect::<serde_json::Map<_, _>>()
        };
        serde_json::json!({
            "tool": self.tool,
            "version": self.version,
            "command": self.command,
            "seed": self.seed,
            "inputs": pairs(&self.inputs),
            "params": pairs(&self.params),
        })
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Digest of everything the similarity matrix depends on: image shape and
/// pixel values in manifest order. Labels and file paths do not enter.
pub fn pixel_digest(store: &DatasetStore) -> String {
    let mut h = Sha256::new();
    h.update(b"lcr-pixels-v1");
    let (height, width, channels) = store.shape();
    for d in [store.len(), height, width, channels] {
        h.update((d as u64).to_le_bytes());
    }
    for item in store.items() {
        for v in item.image.pixels() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Single owner of the output directory. Every file gets a
/// `<file>.meta.json` sidecar carrying the config hash.
pub struct OutDir {
    dir: PathBuf,
    hash: String,
    command: &'static str,
}

pub fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl OutDir {
    pub fn create(dir: &Path, hash: String, command: &'static str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutDir { dir: dir.to_path_buf(), hash, command })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `bytes` to `name` and its sidecar; `extra` is merged into the sidecar.
    pub fn write(&self, name: &str, bytes: &[u8], extra: Value) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.sidecar(name, extra)?;
        Ok(path)
    }

    pub fn sidecar(&self, name: &str, extra: Value) -> Result<()> {
        let mut meta = json!({
            "file": name,
            "command": self.command,
            "config_hash": self.hash,
            "version": env!("CARGO_PKG_VERSION"),
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
            m.extend(e);
        }
        let path = self.path(&format!("{name}.meta.json"));
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json(&self, name: &str, value: &Value, extra: Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes(), extra)
    }
}

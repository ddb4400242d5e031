//! Output collection with a trailing manifest.
//!
//! Every artifact goes through [`OutputSet::write`], which records its
//! SHA-256. [`OutputSet::finish`] writes `manifest.json` last, so an
//! aborted run never leaves a manifest behind and a complete manifest
//! vouches for every listed file.

use std::fs;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, String, usize)>,
}

impl OutputSet {
    pub fn create(dir: PathBuf) -> Result<Self, String> {
        fs::create_dir_all(&dir)
            .map_err(|e| format!("cannot create output dir {}: {e}", dir.display()))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), String> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        let digest = Sha256::digest(bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.files.push((name.to_string(), hex, bytes.len()));
        Ok(())
    }

    /// Write the manifest and report what was produced.
    pub fn finish(mut self, command: &str, seed: Option<u64>) -> Result<(), String> {
        self.files.sort();
        let files: Vec<serde_json::Value> = self
            .files
            .iter()
            .map(|(path, sha256, bytes)| {
                serde_json::json!({ "path": path, "sha256": sha256, "bytes": bytes })
            })
            .collect();
        let mut manifest = serde_json::json!({ "command": command, "files": files });
        if let Some(seed) = seed {
            manifest["seed"] = seed.into();
        }
        let body = format!("{:#}\n", manifest);
        let path = self.dir.join("manifest.json");
        fs::write(&path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        for (name, _, _) in &self.files {
            println!("{}", self.dir.join(name).display());
        }
        println!("{}", path.display());
        Ok(())
    }
}

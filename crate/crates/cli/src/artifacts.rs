//! In-memory command outputs, written to disk together with a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use erdos_sep::manifest::{OutputRecord, RunManifest};
use sha2::{Digest, Sha256};

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact {
            name: name.into(),
            bytes,
        }
    }

    pub fn json<T: serde::Serialize>(name: impl Into<String>, value: &T) -> Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Artifact::new(name, bytes))
    }

    pub fn record(&self) -> OutputRecord {
        OutputRecord {
            path: self.name.clone(),
            sha256: sha256_hex(&self.bytes),
            bytes: self.bytes.len() as u64,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Where a command's files go: a directory plus the manifest file name.
pub struct Destination {
    pub dir: PathBuf,
    pub manifest_name: String,
}

impl Destination {
    pub fn directory(dir: &Path) -> Self {
        Destination {
            dir: dir.to_path_buf(),
            manifest_name: "manifest.json".into(),
        }
    }

    /// A single named file; the manifest sits next to it as `<file>.manifest.json`.
    pub fn file(path: &Path) -> Result<(Self, String)> {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .with_context(|| format!("{} has no usable file name", path.display()))?
            .to_string();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        Ok((
            Destination {
                dir,
                manifest_name: format!("{name}.manifest.json"),
            },
            name,
        ))
    }

    pub fn write(&self, artifacts: &[Artifact], mut manifest: RunManifest) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        for a in artifacts {
            let path = self.dir.join(&a.name);
            fs::write(&path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        manifest.outputs = artifacts.iter().map(Artifact::record).collect();
        let path = self.dir.join(&self.manifest_name);
        fs::write(&path, manifest.to_json_pretty()? + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

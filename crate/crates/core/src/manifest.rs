//! Record of a command run: enough to re-run it and check the outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    /// Relative to the directory holding the manifest.
    pub path: String,
    /// Lowercase hex SHA-256 of the file contents.
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved command parameters; re-running from these alone
    /// reproduces the outputs.
    pub parameters: serde_json::Value,
    pub version: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub outputs: Vec<OutputRecord>,
    pub wall_clock_seconds: f64,
}

fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

fn is_plain_relative(path: &str) -> bool {
    !path.is_empty()
        && !path.starts_with('/')
        && !path.contains('\\')
        && path.split('/').all(|c| !c.is_empty() && c != "." && c != "..")
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.command.is_empty() {
            return Err(Error::Parse("manifest has an empty command".into()));
        }
        if !self.wall_clock_seconds.is_finite() || self.wall_clock_seconds < 0.0 {
            return Err(Error::Parse("wall_clock_seconds must be finite and nonnegative".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for out in &self.outputs {
            if !is_plain_relative(&out.path) {
                return Err(Error::Parse(format!("output path {:?} must be relative and plain", out.path)));
            }
            if !seen.insert(out.path.as_str()) {
                return Err(Error::Parse(format!("output {:?} listed twice", out.path)));
            }
            if !is_sha256_hex(&out.sha256) {
                return Err(Error::Parse(format!("bad sha256 for {:?}", out.path)));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let manifest: RunManifest = serde_json::from_str(s)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

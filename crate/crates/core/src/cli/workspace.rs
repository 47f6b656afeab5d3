use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::error::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seq: u64,
    pub command: String,
    pub kind: String,
    /// Relative to the workspace root when the file lives inside it.
    pub path: String,
    pub sha256: String,
    pub params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub entries: Vec<ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            entries: Vec::new(),
        }
    }
}

/// A directory of artifacts plus an append-only manifest of their hashes.
/// Re-running a command appends new entries; lookups use the latest entry
/// for a path.
pub struct Workspace {
    root: PathBuf,
    manifest: Manifest,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::from(Error::io_at(path, e)))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Workspace {
    pub fn open(root: PathBuf) -> Result<Self, CliError> {
        let path = root.join(MANIFEST_FILE);
        let manifest = if path.exists() {
            let raw = std::fs::read(&path).map_err(|e| CliError::from(Error::io_at(&path, e)))?;
            serde_json::from_slice(&raw).map_err(|e| CliError::hash(format!("unreadable manifest {}: {e}", path.display())))?
        } else {
            Manifest::default()
        };
        Ok(Workspace { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn create_dir(&self, rel: &str) -> Result<PathBuf, CliError> {
        let dir = self.root.join(rel);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::from(Error::io_at(&dir, e)))?;
        Ok(dir)
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    /// Hashes `path` and appends an entry; the manifest is saved immediately.
    pub fn record(
        &mut self,
        command: &str,
        kind: &str,
        path: &Path,
        params: &serde_json::Value,
    ) -> Result<(), CliError> {
        let sha256 = sha256_file(path)?;
        let seq = self.manifest.entries.last().map_or(0, |e| e.seq + 1);
        self.manifest.entries.push(ManifestEntry {
            seq,
            command: command.to_owned(),
            kind: kind.to_owned(),
            path: self.relative(path),
            sha256,
            params: params.clone(),
        });
        self.save()
    }

    fn save(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.root).map_err(|e| CliError::from(Error::io_at(&self.root, e)))?;
        let path = self.root.join(MANIFEST_FILE);
        let tmp = self.root.join(format!("{MANIFEST_FILE}.tmp"));
        let json = serde_json::to_string_pretty(&self.manifest).map_err(Error::from)? + "\n";
        std::fs::write(&tmp, json).map_err(|e| CliError::from(Error::io_at(&tmp, e)))?;
        std::fs::rename(&tmp, &path).map_err(|e| CliError::from(Error::io_at(&path, e)))?;
        Ok(())
    }

    pub fn latest(&self) -> HashMap<&str, &ManifestEntry> {
        let mut m = HashMap::new();
        for e in &self.manifest.entries {
            m.insert(e.path.as_str(), e);
        }
        m
    }

    /// Path of a recorded artifact after checking it exists and still has
    /// its recorded hash.
    pub fn require(&self, rel: &str) -> Result<PathBuf, CliError> {
        let entry = self
            .manifest
            .entries
            .iter()
            .rev()
            .find(|e| e.path == rel)
            .ok_or_else(|| CliError::missing(format!("artifact `{rel}` is not in the workspace manifest")))?;
        self.verify(entry)
    }

    pub fn verify(&self, entry: &ManifestEntry) -> Result<PathBuf, CliError> {
        let path = self.root.join(&entry.path);
        if !path.exists() {
            return Err(CliError::missing(format!("artifact `{}` is missing", entry.path)));
        }
        let actual = sha256_file(&path)?;
        if actual != entry.sha256 {
            return Err(CliError::hash(format!(
                "artifact `{}` has hash {actual}, manifest records {}",
                entry.path, entry.sha256
            )));
        }
        Ok(path)
    }

    /// Latest entries of `kind`, ordered by path.
    pub fn entries_of_kind(&self, kind: &str) -> Vec<&ManifestEntry> {
        let mut v: Vec<&ManifestEntry> = self.latest().into_values().filter(|e| e.kind == kind).collect();
        v.sort_by(|a, b| a.path.cmp(&b.path));
        v
    }
}

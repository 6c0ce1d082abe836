//! Output directory that records every file it writes, with a SHA-256 manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{FsiError, Result};

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    /// `(relative path, sha256 hex, bytes)` in write order.
    entries: Vec<(String, String, usize)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        std::fs::create_dir_all(&root).map_err(|e| FsiError::io(&root, e))?;
        Ok(OutputDir { root, entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Writes `bytes` to `rel`, creating parent directories. A later write to the same path
    /// replaces the earlier manifest entry.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| FsiError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| FsiError::io(&path, e))?;
        self.entries.retain(|e| e.0 != rel);
        self.entries.push((rel.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(path)
    }

    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.0.as_str())
    }

    /// Merges the entries into `manifest.csv` (`path,sha256,bytes`), keeping entries of
    /// earlier runs into the same directory that were not rewritten.
    pub fn finish(self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST);
        let mut rows: Vec<(String, String, usize)> = match std::fs::read_to_string(&path) {
            Ok(text) => text
                .lines()
                .skip(1)
                .filter_map(|l| {
                    let mut it = l.splitn(3, ',');
                    Some((it.next()?.to_string(), it.next()?.to_string(), it.next()?.parse().ok()?))
                })
                .filter(|r| !self.entries.iter().any(|e| e.0 == r.0))
                .collect(),
            Err(_) => Vec::new(),
        };
        rows.extend(self.entries);
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let mut s = String::from("path,sha256,bytes\n");
        for (p, h, n) in rows {
            let _ = writeln!(s, "{p},{h},{n}");
        }
        std::fs::write(&path, s).map_err(|e| FsiError::io(&path, e))?;
        Ok(path)
    }
}

/// Re-hashes every manifest entry; returns the paths whose content no longer matches.
pub fn verify_manifest(root: impl AsRef<Path>) -> Result<Vec<String>> {
    let root = root.as_ref();
    let path = root.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| FsiError::io(&path, e))?;
    let mut bad = Vec::new();
    for l in text.lines().skip(1) {
        let mut it = l.splitn(3, ',');
        let (Some(p), Some(h)) = (it.next(), it.next()) else {
            return Err(FsiError::Invalid(format!("malformed manifest line '{l}'")));
        };
        match std::fs::read(root.join(p)) {
            Ok(b) if sha256_hex(&b) == h => {}
            _ => bad.push(p.to_string()),
        }
    }
    Ok(bad)
}

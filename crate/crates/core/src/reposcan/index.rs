use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};

/// Bytes of a file that are indexed; the rest is ignored.
pub const MAX_INDEXED_BYTES: usize = 64 * 1024;
pub const PREVIEW_CHARS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Source,
    Test,
    Documentation,
    Configuration,
}

impl ArtifactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Source => "source",
            ArtifactKind::Test => "test",
            ArtifactKind::Documentation => "documentation",
            ArtifactKind::Configuration => "configuration",
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub artifact_id: String,
    pub relpath: String,
    pub kind: ArtifactKind,
    pub text: String,
    pub preview: String,
}

impl ArtifactRecord {
    pub fn new(relpath: impl Into<String>, text: impl Into<String>) -> Self {
        let relpath = relpath.into();
        let text = text.into();
        let kind = kind_for_path(&relpath);
        ArtifactRecord {
            artifact_id: format!("{relpath}#{kind}"),
            preview: text.chars().take(PREVIEW_CHARS).collect(),
            relpath,
            kind,
            text,
        }
    }
}

/// Maps a repository-relative path (with `/` separators) to an artifact kind.
///
/// Test directories win over documentation, which wins over configuration.
pub fn kind_for_path(relpath: &str) -> ArtifactKind {
    let lower = relpath.to_ascii_lowercase();
    let mut dirs: Vec<&str> = lower.split('/').collect();
    let file = dirs.pop().unwrap_or_default();
    if dirs.iter().any(|d| *d == "test" || *d == "tests") {
        return ArtifactKind::Test;
    }
    let ext = file.rsplit_once('.').map(|(_, e)| e).unwrap_or("");
    if matches!(ext, "rst" | "md") || dirs.contains(&"docs") {
        return ArtifactKind::Documentation;
    }
    if matches!(ext, "cfg" | "toml" | "ini" | "yaml" | "yml") {
        return ArtifactKind::Configuration;
    }
    ArtifactKind::Source
}

fn sorted_files(root: &Path) -> Result<Vec<(String, std::path::PathBuf)>> {
    let meta = fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::Config(format!(
            "snapshot root {} is not a directory",
            root.display()
        )));
    }
    let mut files = Vec::new();
    let walker = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git");
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields children of root");
        let relpath = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        files.push((relpath, entry.into_path()));
    }
    files.sort();
    Ok(files)
}

/// Indexes the text files under `root`, ordered by relpath. Files with a NUL
/// byte in their indexed prefix are treated as binary and skipped.
pub fn index_snapshot(root: &Path) -> Result<Vec<ArtifactRecord>> {
    let mut records = Vec::new();
    for (relpath, path) in sorted_files(root)? {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let head = &bytes[..bytes.len().min(MAX_INDEXED_BYTES)];
        if head.contains(&0) {
            continue;
        }
        records.push(ArtifactRecord::new(
            relpath,
            String::from_utf8_lossy(head).into_owned(),
        ));
    }
    Ok(records)
}

/// SHA-256 over the sorted `(relpath, bytes)` pairs of every file.
pub fn snapshot_digest(root: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for (relpath, path) in sorted_files(root)? {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        hasher.update((relpath.len() as u64).to_le_bytes());
        hasher.update(relpath.as_bytes());
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

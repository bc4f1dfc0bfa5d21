use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use super::checker::{parse_metadata, CsvTable};
use crate::error::{Error, Result};

/// Largest artifact copied into a backlog.
pub const MAX_ARTIFACT_BYTES: usize = 4096;

/// Public data a backlog is cut from: CSV tables (`*.csv`, first column is
/// the row key), metadata files (`*.meta`) and small text artifacts under
/// `artifacts/`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataSources {
    pub tables: BTreeMap<String, CsvTable>,
    pub metadata: BTreeMap<String, Vec<(String, String)>>,
    pub artifacts: BTreeMap<String, String>,
}

fn metadata_entries(text: &str) -> Vec<(String, String)> {
    let map = parse_metadata(text);
    let mut out = Vec::new();
    for line in text.lines() {
        if let Some((k, _)) = line.split_once(':') {
            let k = k.trim();
            if let Some(v) = map.get(k) {
                if !out.iter().any(|(seen, _): &(String, String)| seen == k) {
                    out.push((k.to_owned(), v.clone()));
                }
            }
        }
    }
    out
}

impl DataSources {
    pub fn load(dir: &Path) -> Result<Self> {
        let mut sources = DataSources::default();
        let mut entries: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(dir, e))?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => {
                    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    let table = CsvTable::parse(&text)?;
                    let mut keys = std::collections::BTreeSet::new();
                    if !table.rows.iter().all(|r| keys.insert(r[0].clone())) {
                        return Err(Error::Config(format!(
                            "{}: first column must be unique",
                            path.display()
                        )));
                    }
                    sources.tables.insert(stem.to_owned(), table);
                }
                Some("meta") => {
                    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    sources.metadata.insert(stem.to_owned(), metadata_entries(&text));
                }
                _ => {}
            }
        }
        let art_root = dir.join("artifacts");
        if art_root.is_dir() {
            for entry in WalkDir::new(&art_root).sort_by_file_name() {
                let entry = entry.map_err(|e| {
                    Error::Config(format!("cannot walk {}: {e}", art_root.display()))
                })?;
                if !entry.file_type().is_file() {
                    continue;
                }
                let bytes = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
                if bytes.len() > MAX_ARTIFACT_BYTES || !bytes.ends_with(b"\n") {
                    continue;
                }
                if let Ok(text) = String::from_utf8(bytes) {
                    let rel = entry
                        .path()
                        .strip_prefix(&art_root)
                        .expect("walk stays under root")
                        .to_string_lossy()
                        .replace('\\', "/");
                    sources.artifacts.insert(rel, text);
                }
            }
        }
        if sources.tables.is_empty() || sources.metadata.is_empty() || sources.artifacts.is_empty()
        {
            return Err(Error::Config(format!(
                "{}: need at least one CSV table, one .meta file and one artifact",
                dir.display()
            )));
        }
        Ok(sources)
    }

    /// Content digest used to detect source drift between generation and runs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in &self.tables {
            h.update(name.as_bytes());
            h.update(t.to_csv().as_bytes());
        }
        for (name, entries) in &self.metadata {
            h.update(name.as_bytes());
            for (k, v) in entries {
                h.update(format!("{k}\0{v}\0").as_bytes());
            }
        }
        for (rel, text) in &self.artifacts {
            h.update(rel.as_bytes());
            h.update(text.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::checker::{answer_path, set_metadata_key, strip_lines, CsvTable, EditOp};
use super::unit::BacklogUnit;
use crate::error::{Error, Result};

/// Environment variable naming the parent directory for run workspaces.
pub const WORKSPACE_ROOT_VAR: &str = "QGP_WORKSPACE_ROOT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    pub unit_id: String,
    pub payload: String,
    pub applied: bool,
}

/// Private per-run copy of a backlog's files. Removed on drop.
#[derive(Debug)]
pub struct Workspace {
    dir: tempfile::TempDir,
    log: Vec<EditRecord>,
}

fn check_relative(rel: &str) -> Result<()> {
    let p = Path::new(rel);
    if p.components().all(|c| matches!(c, Component::Normal(_))) {
        Ok(())
    } else {
        Err(Error::Manifest(format!("workspace path {rel:?} escapes the workspace")))
    }
}

impl Workspace {
    pub fn materialize(files: &BTreeMap<String, String>) -> Result<Self> {
        let parent = std::env::var_os(WORKSPACE_ROOT_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(std::env::temp_dir);
        fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let dir = tempfile::Builder::new()
            .prefix("qgp-ws-")
            .tempdir_in(&parent)
            .map_err(|e| Error::io(&parent, e))?;
        let mut ws = Workspace {
            dir,
            log: Vec::new(),
        };
        for (rel, content) in files {
            ws.write(rel, content)?;
        }
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn read(&self, rel: &str) -> Option<String> {
        check_relative(rel).ok()?;
        fs::read_to_string(self.root().join(rel)).ok()
    }

    pub fn write(&mut self, rel: &str, content: &str) -> Result<()> {
        check_relative(rel)?;
        let path = self.root().join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, content).map_err(|e| Error::io(&path, e))
    }

    pub fn edit_log(&self) -> &[EditRecord] {
        &self.log
    }

    /// Applies a structured edit to the unit's artifact. `Err` carries a
    /// user-facing reason and leaves the files untouched.
    pub fn apply_edit(&mut self, unit: &BacklogUnit, payload: &str) -> Result<String, String> {
        let outcome = self.try_edit(unit, payload);
        self.log.push(EditRecord {
            unit_id: unit.unit_id.clone(),
            payload: payload.to_owned(),
            applied: outcome.is_ok(),
        });
        outcome
    }

    fn try_edit(&mut self, unit: &BacklogUnit, payload: &str) -> Result<String, String> {
        let op = EditOp::parse(payload).map_err(|_| "malformed edit payload".to_owned())?;
        if !op.allowed_for(unit.kind) {
            return Err(format!("operation not supported for {} units", unit.kind));
        }
        let path = unit.artifact_path.as_str();
        let current = || self.read(path).ok_or_else(|| format!("artifact `{path}` is missing"));
        let (target, content) = match &op {
            EditOp::SetCell { row, column, value } => {
                let mut table =
                    CsvTable::parse(&current()?).map_err(|_| format!("`{path}` is not valid CSV"))?;
                let col = table
                    .column(column)
                    .ok_or_else(|| format!("column `{column}` not found"))?;
                let idx = table
                    .row_index(row)
                    .ok_or_else(|| format!("row `{row}` not found"))?;
                table.rows[idx][col] = value.clone();
                (path.to_owned(), table.to_csv())
            }
            EditOp::KeepRows { count } => {
                let mut table =
                    CsvTable::parse(&current()?).map_err(|_| format!("`{path}` is not valid CSV"))?;
                table.rows.truncate(*count);
                (path.to_owned(), table.to_csv())
            }
            EditOp::SetKey { key, value } => {
                (path.to_owned(), set_metadata_key(&current()?, key, value))
            }
            EditOp::Answer { value } => (answer_path(&unit.unit_id), format!("{value}\n")),
            EditOp::StripLines { prefix } => {
                if prefix.is_empty() {
                    return Err("prefix must not be empty".into());
                }
                (path.to_owned(), strip_lines(&current()?, prefix))
            }
        };
        self.write(&target, &content)
            .map_err(|_| format!("cannot write `{target}`"))?;
        Ok(format!("edited `{target}`"))
    }
}

//! Loading manifests and running tasks from them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::controller::{Controller, ControllerConfig};
use crate::dataops::{CheckerSpec, DataOpsEnv, DataOpsManifest};
use crate::episode::{run_episode, Environment, Episode, RunRecord};
use crate::error::{Error, Result};
use crate::policy::PolicySpec;
use crate::reposcan::{load_snapshot, Corpus, RepoScanEnv, RepoScanManifest};
use crate::task::{Family, PublicTaskView, TaskSpec};

/// Either manifest family, including its hidden section.
#[derive(Debug, Clone, PartialEq)]
pub enum Manifest {
    Reposcan(RepoScanManifest),
    Dataops(DataOpsManifest),
}

#[derive(Deserialize)]
struct FamilyProbe {
    family: Family,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: FamilyProbe = serde_json::from_str(text)?;
        Ok(match probe.family {
            Family::Reposcan => Manifest::Reposcan(serde_json::from_str(text)?),
            Family::Dataops => Manifest::Dataops(serde_json::from_str(text)?),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = match self {
            Manifest::Reposcan(m) => serde_json::to_string_pretty(m),
            Manifest::Dataops(m) => serde_json::to_string_pretty(m),
        }
        .expect("manifests serialize");
        s.push('\n');
        s
    }

    pub fn family(&self) -> Family {
        match self {
            Manifest::Reposcan(_) => Family::Reposcan,
            Manifest::Dataops(_) => Family::Dataops,
        }
    }

    pub fn tasks(&self) -> Vec<TaskSpec> {
        match self {
            Manifest::Reposcan(m) => m.tasks.iter().map(|t| t.spec.clone()).collect(),
            Manifest::Dataops(m) => m.tasks.iter().map(|t| t.spec.clone()).collect(),
        }
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[derive(Deserialize)]
struct PublicManifest {
    tasks: Vec<PublicTaskView>,
}

/// Policy-facing loader: drops the `hidden` section before any typed
/// parsing, so hidden data never reaches policy code.
pub fn public_tasks_from_json(text: &str) -> Result<Vec<PublicTaskView>> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("hidden");
    }
    let public: PublicManifest = serde_json::from_value(value)?;
    Ok(public.tasks)
}

pub fn load_public_tasks(path: &Path) -> Result<Vec<PublicTaskView>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    public_tasks_from_json(&text)
}

/// A manifest with its snapshot corpora loaded, ready to run tasks.
pub struct Runner {
    manifest: Manifest,
    corpora: BTreeMap<String, Arc<Corpus>>,
}

impl Runner {
    /// Relative snapshot roots are resolved against `base` when they do not
    /// exist as given.
    pub fn new(manifest: Manifest, base: Option<&Path>) -> Result<Self> {
        let mut corpora = BTreeMap::new();
        if let Manifest::Reposcan(m) = &manifest {
            for info in &m.metadata.snapshots {
                let records = load_snapshot(info, base)?;
                corpora.insert(info.name.clone(), Arc::new(Corpus::new(records)));
            }
        }
        Ok(Runner { manifest, corpora })
    }

    pub fn open(path: &Path) -> Result<Self> {
        let base: Option<PathBuf> = path.parent().map(Path::to_path_buf);
        Self::new(Manifest::load(path)?, base.as_deref())
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn tasks(&self) -> Vec<TaskSpec> {
        self.manifest.tasks()
    }

    pub fn environment(&self, task_id: &str) -> Result<Box<dyn Environment + Send>> {
        match &self.manifest {
            Manifest::Reposcan(m) => {
                let task = m
                    .tasks
                    .iter()
                    .find(|t| t.spec.task_id == task_id)
                    .ok_or_else(|| Error::Manifest(format!("unknown task {task_id}")))?;
                let hidden = m
                    .hidden
                    .get(task_id)
                    .ok_or_else(|| Error::Manifest(format!("no hidden section for {task_id}")))?;
                let corpus = self.corpora.get(&task.snapshot).ok_or_else(|| {
                    Error::Manifest(format!("{task_id}: unknown snapshot {}", task.snapshot))
                })?;
                Ok(Box::new(RepoScanEnv::new(
                    corpus.clone(),
                    &hidden.valid_ids,
                    m.metadata.page_size,
                )))
            }
            Manifest::Dataops(m) => Ok(Box::new(DataOpsEnv::new(m.backlog(task_id)?)?)),
        }
    }

    pub fn run(
        &self,
        task: &TaskSpec,
        controller: &ControllerConfig,
        policy: &PolicySpec,
    ) -> Result<Episode> {
        controller.validate()?;
        let mut env = self.environment(&task.task_id)?;
        let mut controller = Controller::new(controller.clone());
        let mut policy = match policy.build() {
            Ok(p) => p,
            Err(Error::Adapter(msg)) => {
                return Ok(Episode {
                    record: RunRecord {
                        task_id: task.task_id.clone(),
                        family: task.family,
                        target_count: task.target_count,
                        budget: task.budget,
                        controller: controller.label(),
                        policy: policy.name().to_owned(),
                        outcome: None,
                        valid_count: 0,
                        steps_used: 0,
                        duplicate_occurrences: 0,
                        submission_occurrences: 0,
                        reported_count: None,
                        intervention_count: 0,
                        intervention_log: Vec::new(),
                        error: Some(msg),
                    },
                    ledger: Default::default(),
                })
            }
            Err(e) => return Err(e),
        };
        run_episode(task, env.as_mut(), &mut controller, policy.as_mut())
    }
}

/// One smoke-check result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmokeCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> SmokeCheck {
    SmokeCheck {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

/// Hidden-set consistency, loader leak-freedom and backlog solvability.
pub fn smoke(runner: &Runner) -> Result<Vec<SmokeCheck>> {
    let manifest = runner.manifest();
    let public = public_tasks_from_json(&manifest.to_json())?;
    let public_text = serde_json::to_string(&public)?;
    let mut checks = Vec::new();
    match manifest {
        Manifest::Reposcan(m) => {
            for task in &m.tasks {
                let id = &task.spec.task_id;
                let Some(hidden) = m.hidden.get(id) else {
                    checks.push(check(format!("{id}: hidden set"), false, "missing"));
                    continue;
                };
                let corpus = &runner.corpora[&task.snapshot];
                let compiled = hidden.predicate.compile()?;
                let matching: Vec<&str> = corpus
                    .records()
                    .iter()
                    .filter(|r| compiled.matches(r))
                    .map(|r| r.artifact_id.as_str())
                    .collect();
                let mut stored: Vec<&str> = hidden.valid_ids.iter().map(String::as_str).collect();
                stored.sort_unstable();
                let mut expected = matching.clone();
                expected.sort_unstable();
                checks.push(check(
                    format!("{id}: hidden set matches predicate"),
                    stored == expected,
                    format!("{} stored, {} matching", stored.len(), expected.len()),
                ));
                checks.push(check(
                    format!("{id}: target reachable"),
                    stored.len() >= task.spec.target_count as usize,
                    format!("{} valid for target {}", stored.len(), task.spec.target_count),
                ));
                let leaked = hidden
                    .valid_ids
                    .iter()
                    .filter(|v| public_text.contains(v.as_str()))
                    .count();
                checks.push(check(
                    format!("{id}: policy view leak-free"),
                    leaked == 0,
                    format!("{leaked} hidden ids in policy view"),
                ));
            }
        }
        Manifest::Dataops(m) => {
            for task in &m.tasks {
                let id = &task.spec.task_id;
                let backlog = match m.backlog(id) {
                    Ok(b) => b,
                    Err(e) => {
                        checks.push(check(format!("{id}: backlog intact"), false, e.to_string()));
                        continue;
                    }
                };
                checks.push(check(format!("{id}: backlog intact"), true, backlog.digest()));
                let view = public.iter().find(|v| v.task_id == *id);
                let leaked: Vec<&str> = backlog
                    .units
                    .iter()
                    .filter_map(|u| match &u.checker {
                        CheckerSpec::AnswerEquals {
                            expected_normalized,
                        } => Some((u, expected_normalized)),
                        _ => None,
                    })
                    .filter(|(u, answer)| {
                        view.and_then(|v| v.units.iter().find(|p| p.unit_id == u.unit_id))
                            .is_some_and(|p| {
                                crate::task::objective_terms(&p.prompt).contains(answer)
                            })
                    })
                    .map(|(u, _)| u.unit_id.as_str())
                    .collect();
                checks.push(check(
                    format!("{id}: policy view leak-free"),
                    leaked.is_empty() && !public_text.contains("expected_"),
                    format!("{} answer units leak", leaked.len()),
                ));
                let solvable = crate::dataops::check_solvable(&task.spec, &backlog);
                checks.push(check(
                    format!("{id}: solvable within budget"),
                    solvable.is_ok(),
                    solvable.err().map(|e| e.to_string()).unwrap_or_default(),
                ));
            }
        }
    }
    Ok(checks)
}

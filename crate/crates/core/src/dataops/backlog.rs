use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checker::{normalize_answer, sha256_hex, CheckerSpec, CsvTable};
use super::sources::DataSources;
use super::unit::{BacklogUnit, UnitKind};
use crate::error::{Error, Result};
use crate::seed;
use crate::task::{BudgetTable, Family, PublicUnit, TaskSpec};

/// Prefix of the scratch lines injected into artifact-validation units.
pub const SCRATCH_PREFIX: &str = "# LOCAL-EDIT";
const MIN_WINDOW: usize = 8;
const MAX_WINDOW: usize = 16;
const EDIT_PROBABILITY: f64 = 0.6;
const MAX_UNIT_ATTEMPTS: usize = 16;

/// Checker-backed work units plus the initial workspace files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Backlog {
    pub backlog_id: String,
    pub units: Vec<BacklogUnit>,
    pub files: BTreeMap<String, String>,
}

impl Backlog {
    pub fn unit(&self, unit_id: &str) -> Option<&BacklogUnit> {
        self.units.iter().find(|u| u.unit_id == unit_id)
    }

    pub fn public_units(&self) -> Vec<PublicUnit> {
        self.units.iter().map(BacklogUnit::public).collect()
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("backlog serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Units beyond the target so that a policy has slack to skip units.
pub fn extra_units(target: u32) -> u32 {
    target / 4 + 2
}

struct Built {
    kind: UnitKind,
    prompt: String,
    path: String,
    checker: CheckerSpec,
    content: String,
}

fn window(table: &CsvTable, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<String>>> {
    if table.rows.len() < MIN_WINDOW || table.headers.len() < 2 {
        return None;
    }
    let w = rng.gen_range(MIN_WINDOW..=MAX_WINDOW.min(table.rows.len()));
    let start = rng.gen_range(0..=table.rows.len() - w);
    Some(table.rows[start..start + w].to_vec())
}

fn pick_table<'a>(sources: &'a DataSources, rng: &mut ChaCha8Rng) -> (&'a String, &'a CsvTable) {
    let names: Vec<&String> = sources.tables.keys().collect();
    let name = names[rng.gen_range(0..names.len())];
    (name, &sources.tables[name])
}

fn wrong_value(expected: &str, rng: &mut ChaCha8Rng) -> String {
    if let Ok(v) = expected.parse::<i64>() {
        let delta = rng.gen_range(1..=9i64);
        return (v + if rng.gen_bool(0.5) { delta } else { -delta }).to_string();
    }
    if expected == "TBD" {
        "TBD-1".into()
    } else {
        "TBD".into()
    }
}

fn metadata_text(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
}

fn build_field(uid: &str, sources: &DataSources, rng: &mut ChaCha8Rng) -> Option<Built> {
    let (name, table) = pick_table(sources, rng);
    let mut rows = window(table, rng)?;
    let r = rng.gen_range(0..rows.len());
    let c = rng.gen_range(1..table.headers.len());
    let expected = rows[r][c].clone();
    if expected.trim().is_empty() || expected.contains('`') || rows[r][0].contains('`') {
        return None;
    }
    if rng.gen_bool(EDIT_PROBABILITY) {
        rows[r][c] = wrong_value(&expected, rng);
    }
    let path = format!("units/{uid}/{name}.csv");
    let key = rows[r][0].clone();
    let column = table.headers[c].clone();
    let content = CsvTable {
        headers: table.headers.clone(),
        rows,
    }
    .to_csv();
    Some(Built {
        kind: UnitKind::CsvFieldCheck,
        prompt: format!("In `{path}`, row `{key}` must have column `{column}` equal to `{expected}`."),
        checker: CheckerSpec::FieldEquals {
            file: path.clone(),
            row_key: key,
            column,
            expected,
        },
        path,
        content,
    })
}

fn build_count(uid: &str, sources: &DataSources, rng: &mut ChaCha8Rng) -> Option<Built> {
    let (name, table) = pick_table(sources, rng);
    let mut rows = window(table, rng)?;
    let expected = rows.len();
    if rng.gen_bool(EDIT_PROBABILITY) {
        let dups = rng.gen_range(1..=3).min(rows.len());
        let tail: Vec<Vec<String>> = rows[rows.len() - dups..].to_vec();
        rows.extend(tail);
    }
    let path = format!("units/{uid}/{name}.csv");
    let content = CsvTable {
        headers: table.headers.clone(),
        rows,
    }
    .to_csv();
    Some(Built {
        kind: UnitKind::CsvCountCheck,
        prompt: format!(
            "`{path}` must contain exactly `{expected}` data rows; rows after the first `{expected}` are accidental duplicates."
        ),
        checker: CheckerSpec::RowCount {
            file: path.clone(),
            expected,
        },
        path,
        content,
    })
}

/// A metadata file name, its entries and the index of the chosen entry.
type MetaPick<'a> = (&'a String, &'a Vec<(String, String)>, usize);

fn pick_meta<'a>(sources: &'a DataSources, rng: &mut ChaCha8Rng) -> Option<MetaPick<'a>> {
    let names: Vec<&String> = sources.metadata.keys().collect();
    let name = names[rng.gen_range(0..names.len())];
    let entries = &sources.metadata[name];
    if entries.is_empty() {
        return None;
    }
    let i = rng.gen_range(0..entries.len());
    let (k, v) = &entries[i];
    if v.is_empty() || k.contains('`') || v.contains('`') {
        return None;
    }
    Some((name, entries, i))
}

fn build_metadata(uid: &str, sources: &DataSources, rng: &mut ChaCha8Rng) -> Option<Built> {
    let (name, entries, i) = pick_meta(sources, rng)?;
    let (key, expected) = entries[i].clone();
    let mut current = entries.clone();
    if rng.gen_bool(EDIT_PROBABILITY) {
        if rng.gen_bool(0.5) {
            current[i].1 = wrong_value(&expected, rng);
        } else {
            current.remove(i);
        }
    }
    let path = format!("units/{uid}/{name}.meta");
    Some(Built {
        kind: UnitKind::MetadataRepair,
        prompt: format!("In `{path}`, key `{key}` must be set to `{expected}`."),
        checker: CheckerSpec::KeyPresent {
            file: path.clone(),
            key,
            expected_value: expected,
        },
        path,
        content: metadata_text(&current),
    })
}

fn build_consistency(uid: &str, sources: &DataSources, rng: &mut ChaCha8Rng) -> Option<Built> {
    if rng.gen_bool(0.5) {
        let (name, table) = pick_table(sources, rng);
        let rows = window(table, rng)?;
        let mut options = Vec::new();
        for c in 1..table.headers.len() {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &rows {
                *counts.entry(r[c].as_str()).or_default() += 1;
            }
            for (v, n) in counts {
                if n >= 2 && !v.trim().is_empty() && !v.contains('`') {
                    options.push((c, v.to_owned(), n));
                }
            }
        }
        let (c, value, n) = options.choose(rng)?.clone();
        let path = format!("units/{uid}/{name}.csv");
        let column = &table.headers[c];
        let expected = n.to_string();
        let prompt = format!(
            "Count the data rows in `{path}` whose `{column}` column equals `{value}` and store that number as the answer."
        );
        return Some(Built {
            kind: UnitKind::ConsistencyAnswer,
            prompt,
            checker: CheckerSpec::AnswerEquals {
                expected_normalized: expected,
            },
            content: CsvTable {
                headers: table.headers.clone(),
                rows,
            }
            .to_csv(),
            path,
        });
    }
    let (name, entries, i) = pick_meta(sources, rng)?;
    let (key, value) = &entries[i];
    let path = format!("units/{uid}/{name}.meta");
    Some(Built {
        kind: UnitKind::ConsistencyAnswer,
        prompt: format!("In `{path}`, look up key `{key}` and store its value as the answer."),
        checker: CheckerSpec::AnswerEquals {
            expected_normalized: normalize_answer(value),
        },
        content: metadata_text(entries),
        path,
    })
}

fn build_artifact(uid: &str, sources: &DataSources, rng: &mut ChaCha8Rng) -> Option<Built> {
    let names: Vec<&String> = sources.artifacts.keys().collect();
    let rel = names[rng.gen_range(0..names.len())];
    let original = &sources.artifacts[rel];
    if original.lines().any(|l| l.starts_with(SCRATCH_PREFIX)) {
        return None;
    }
    let mut lines: Vec<String> = original.split_inclusive('\n').map(str::to_owned).collect();
    if rng.gen_bool(EDIT_PROBABILITY) {
        for k in 0..rng.gen_range(1..=2) {
            let at = rng.gen_range(0..=lines.len().saturating_sub(1));
            lines.insert(at, format!("{SCRATCH_PREFIX}: scratch note {}\n", k + 1));
        }
    }
    let base = rel.rsplit('/').next().unwrap_or(rel);
    let path = format!("units/{uid}/{base}");
    Some(Built {
        kind: UnitKind::ArtifactValidation,
        prompt: format!(
            "Restore `{path}` to its released content by removing every line that starts with `{SCRATCH_PREFIX}`."
        ),
        checker: CheckerSpec::FileDigest {
            file: path.clone(),
            expected_digest: sha256_hex(original.as_bytes()),
        },
        path,
        content: lines.concat(),
    })
}

/// True when an answer-style unit's expected answer shows up among the
/// prompt's quoted terms.
fn answer_leaks(built: &Built) -> bool {
    match &built.checker {
        CheckerSpec::AnswerEquals {
            expected_normalized,
        } => crate::task::objective_terms(&built.prompt)
            .iter()
            .any(|t| normalize_answer(t) == *expected_normalized),
        _ => false,
    }
}

/// Cuts one backlog of `target + extra_units(target)` units from `sources`.
pub fn generate_backlog(
    sources: &DataSources,
    backlog_id: &str,
    target: u32,
    seed: u64,
) -> Result<Backlog> {
    if target == 0 {
        return Err(Error::Backlog {
            target,
            reason: "target must be at least 1".into(),
        });
    }
    let mut rng = seed::rng(&[seed, seed::str_key(backlog_id)]);
    let size = (target + extra_units(target)) as usize;
    let mut kinds: Vec<UnitKind> = UnitKind::ALL.iter().copied().cycle().take(size).collect();
    kinds.shuffle(&mut rng);

    let mut units = Vec::with_capacity(size);
    let mut files = BTreeMap::new();
    for (i, kind) in kinds.into_iter().enumerate() {
        let uid = format!("u{:02}", i + 1);
        let mut built = None;
        for _ in 0..MAX_UNIT_ATTEMPTS {
            let candidate = match kind {
                UnitKind::CsvFieldCheck => build_field(&uid, sources, &mut rng),
                UnitKind::CsvCountCheck => build_count(&uid, sources, &mut rng),
                UnitKind::MetadataRepair => build_metadata(&uid, sources, &mut rng),
                UnitKind::ConsistencyAnswer => build_consistency(&uid, sources, &mut rng),
                UnitKind::ArtifactValidation => build_artifact(&uid, sources, &mut rng),
            };
            if let Some(b) = candidate.filter(|b| !answer_leaks(b)) {
                built = Some(b);
                break;
            }
        }
        let b = built.ok_or_else(|| Error::Backlog {
            target,
            reason: format!("insufficient source data for a {kind} unit"),
        })?;
        debug_assert_eq!(b.kind, kind);
        files.insert(b.path.clone(), b.content);
        units.push(BacklogUnit {
            unit_id: uid,
            kind: b.kind,
            prompt: b.prompt,
            artifact_path: b.path,
            checker: b.checker,
        });
    }
    Ok(Backlog {
        backlog_id: backlog_id.to_owned(),
        units,
        files,
    })
}

pub fn dataops_objective(target: u32) -> String {
    format!(
        "Complete at least {target} distinct backlog units. A unit counts only after its checker passes and the unit is submitted."
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacklogConfig {
    pub targets: Vec<u32>,
    pub backlogs_per_target: u32,
    pub seed: u64,
    pub budgets: BudgetTable,
}

impl Default for BacklogConfig {
    fn default() -> Self {
        let budgets = BudgetTable::dataops();
        BacklogConfig {
            targets: budgets.targets(),
            backlogs_per_target: 6,
            seed: 0,
            budgets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataOpsMetadata {
    pub seed: u64,
    pub targets: Vec<u32>,
    pub backlogs_per_target: u32,
    pub budgets: BudgetTable,
    pub sources_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataOpsTask {
    #[serde(flatten)]
    pub spec: TaskSpec,
    pub units: Vec<PublicUnit>,
}

/// Checker and initial-file data withheld from policies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataOpsHidden {
    pub backlog_digest: String,
    pub checkers: BTreeMap<String, CheckerSpec>,
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataOpsManifest {
    pub family: Family,
    pub metadata: DataOpsMetadata,
    pub tasks: Vec<DataOpsTask>,
    pub hidden: BTreeMap<String, DataOpsHidden>,
}

impl DataOpsManifest {
    /// Reassembles the backlog for one task and checks its digest.
    pub fn backlog(&self, task_id: &str) -> Result<Backlog> {
        let task = self
            .tasks
            .iter()
            .find(|t| t.spec.task_id == task_id)
            .ok_or_else(|| Error::Manifest(format!("unknown task {task_id}")))?;
        let hidden = self
            .hidden
            .get(task_id)
            .ok_or_else(|| Error::Manifest(format!("no hidden section for {task_id}")))?;
        let units = task
            .units
            .iter()
            .map(|u| {
                let checker = hidden.checkers.get(&u.unit_id).cloned().ok_or_else(|| {
                    Error::Manifest(format!("{task_id}: no checker for unit {}", u.unit_id))
                })?;
                Ok(BacklogUnit {
                    unit_id: u.unit_id.clone(),
                    kind: u.kind,
                    prompt: u.prompt.clone(),
                    artifact_path: u.artifact_path.clone(),
                    checker,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let backlog = Backlog {
            backlog_id: task_id.to_owned(),
            units,
            files: hidden.files.clone(),
        };
        if backlog.digest() != hidden.backlog_digest {
            return Err(Error::Manifest(format!("{task_id}: backlog digest mismatch")));
        }
        Ok(backlog)
    }
}

/// Generates every backlog and rejects the manifest unless the scripted
/// solver completes each one within budget.
pub fn generate_manifest(sources: &DataSources, config: &BacklogConfig) -> Result<DataOpsManifest> {
    let mut tasks = Vec::new();
    let mut hidden = BTreeMap::new();
    for &target in &config.targets {
        let budget = config.budgets.budget_for(target)?;
        for b in 0..config.backlogs_per_target {
            let task_id = format!("dataops-n{target}-b{b:02}");
            let task_seed = seed::mix(&[config.seed, target as u64, b as u64]);
            let backlog = generate_backlog(sources, &task_id, target, task_seed)?;
            let spec = TaskSpec::new(
                task_id.clone(),
                Family::Dataops,
                dataops_objective(target),
                target,
                budget,
                task_seed,
                format!("dataops:{task_id}"),
            )?;
            check_solvable(&spec, &backlog)?;
            hidden.insert(
                task_id,
                DataOpsHidden {
                    backlog_digest: backlog.digest(),
                    checkers: backlog
                        .units
                        .iter()
                        .map(|u| (u.unit_id.clone(), u.checker.clone()))
                        .collect(),
                    files: backlog.files.clone(),
                },
            );
            tasks.push(DataOpsTask {
                spec,
                units: backlog.public_units(),
            });
        }
    }
    Ok(DataOpsManifest {
        family: Family::Dataops,
        metadata: DataOpsMetadata {
            seed: config.seed,
            targets: config.targets.clone(),
            backlogs_per_target: config.backlogs_per_target,
            budgets: config.budgets.clone(),
            sources_digest: sources.digest(),
        },
        tasks,
        hidden,
    })
}

/// Runs the scripted solver under the standard controller.
pub fn check_solvable(spec: &TaskSpec, backlog: &Backlog) -> Result<()> {
    use crate::controller::{Controller, ControllerConfig};
    use crate::ledger::Outcome;
    use crate::policy::ScriptedPolicy;

    let mut env = super::DataOpsEnv::new(backlog.clone())?;
    let mut policy = ScriptedPolicy::solver();
    let mut controller = Controller::new(ControllerConfig::standard());
    let episode = crate::episode::run_episode(spec, &mut env, &mut controller, &mut policy)?;
    match episode.record.outcome {
        Some(Outcome::Success) => Ok(()),
        other => Err(Error::Backlog {
            target: spec.target_count,
            reason: format!(
                "{}: scripted solver ended with {:?} after {} steps",
                spec.task_id, other, episode.record.steps_used
            ),
        }),
    }
}

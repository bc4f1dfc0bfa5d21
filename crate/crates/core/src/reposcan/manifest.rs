use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::index::{index_snapshot, snapshot_digest, ArtifactKind, ArtifactRecord};
use super::predicate::{Predicate, PredicateFamily};
use super::search::PAGE_SIZE;
use crate::error::{Error, Result};
use crate::seed;
use crate::task::{BudgetTable, Family, TaskSpec};

const MAX_PREDICATE_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotInfo {
    pub name: String,
    pub root: String,
    pub digest: String,
    pub artifacts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoScanMetadata {
    pub seed: u64,
    pub targets: Vec<u32>,
    pub instances_per_target: u32,
    pub page_size: usize,
    pub budgets: BudgetTable,
    pub snapshots: Vec<SnapshotInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoScanTask {
    #[serde(flatten)]
    pub spec: TaskSpec,
    pub snapshot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoScanHidden {
    pub predicate: Predicate,
    pub valid_ids: Vec<String>,
}

/// Task list plus hidden verifier state. The `hidden` section is dropped by
/// the policy-facing loader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoScanManifest {
    pub family: Family,
    pub metadata: RepoScanMetadata,
    pub tasks: Vec<RepoScanTask>,
    pub hidden: BTreeMap<String, RepoScanHidden>,
}

impl RepoScanManifest {
    pub fn snapshot(&self, name: &str) -> Option<&SnapshotInfo> {
        self.metadata.snapshots.iter().find(|s| s.name == name)
    }
}

/// A snapshot directory and the name tasks refer to it by.
#[derive(Debug, Clone)]
pub struct SnapshotSource {
    pub name: String,
    pub root: PathBuf,
}

impl SnapshotSource {
    pub fn from_path(root: impl Into<PathBuf>) -> Self {
        let root = root.into();
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| root.display().to_string());
        SnapshotSource { name, root }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub targets: Vec<u32>,
    pub instances_per_target: u32,
    pub seed: u64,
    pub budgets: BudgetTable,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let budgets = BudgetTable::reposcan();
        GenerationConfig {
            targets: budgets.targets(),
            instances_per_target: 9,
            seed: 0,
            budgets,
        }
    }
}

/// Document frequency of lowercase word tokens (letter first, four or more
/// characters).
pub fn token_frequencies<'a, I>(records: I) -> BTreeMap<String, usize>
where
    I: IntoIterator<Item = &'a ArtifactRecord>,
{
    let mut df = BTreeMap::new();
    for rec in records {
        let lower = rec.text.to_lowercase();
        let tokens: BTreeSet<&str> = lower
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .filter(|t| t.len() >= 4 && t.starts_with(|c: char| c.is_ascii_alphabetic()))
            .collect();
        for t in tokens {
            *df.entry(t.to_owned()).or_insert(0) += 1;
        }
    }
    df
}

/// Tokens whose document frequency lies in `[target, upper]`.
fn mid_band(df: &BTreeMap<String, usize>, target: usize, population: usize) -> Vec<String> {
    let upper = target.max(population * 3 / 5);
    df.iter()
        .filter(|(_, &n)| n >= target && n <= upper)
        .map(|(t, _)| t.clone())
        .collect()
}

fn matching_ids(records: &[ArtifactRecord], predicate: &Predicate) -> Result<Vec<String>> {
    let compiled = predicate.compile()?;
    Ok(records
        .iter()
        .filter(|r| compiled.matches(r))
        .map(|r| r.artifact_id.clone())
        .collect())
}

fn sample_predicate<R: Rng>(
    family: PredicateFamily,
    records: &[ArtifactRecord],
    df: &BTreeMap<String, usize>,
    target: usize,
    rng: &mut R,
) -> Option<Predicate> {
    match family {
        PredicateFamily::KeywordOrPattern => {
            let band = mid_band(df, target, records.len());
            let first = band.choose(rng)?.clone();
            let mut keywords = vec![first];
            if rng.gen_bool(0.5) {
                if let Some(k) = band.choose(rng) {
                    if !keywords.contains(k) {
                        keywords.push(k.clone());
                    }
                }
            }
            let mut patterns = Vec::new();
            if rng.gen_bool(0.5) {
                let long: Vec<&String> = band.iter().filter(|t| t.len() >= 6).collect();
                if let Some(t) = long.choose(rng) {
                    patterns.push(format!(r"(?i)\b{}\w*", &t[..5]));
                }
            }
            Some(Predicate::KeywordOrPattern { keywords, patterns })
        }
        PredicateFamily::PathAndContent => {
            let mut dirs: BTreeMap<String, Vec<&ArtifactRecord>> = BTreeMap::new();
            for r in records {
                let parts: Vec<&str> = r.relpath.split('/').collect();
                for depth in 1..parts.len() {
                    dirs.entry(format!("{}/", parts[..depth].join("/")))
                        .or_default()
                        .push(r);
                }
            }
            let eligible: Vec<(&String, &Vec<&ArtifactRecord>)> =
                dirs.iter().filter(|(_, rs)| rs.len() >= target).collect();
            let (dir, members) = eligible.choose(rng)?;
            let local = token_frequencies(members.iter().copied());
            let upper = target.max(members.len() * 9 / 10);
            let band: Vec<&String> = local
                .iter()
                .filter(|(_, &n)| n >= target && n <= upper)
                .map(|(t, _)| t)
                .collect();
            let token = band.choose(rng)?;
            Some(Predicate::PathAndContent {
                path_substring: (*dir).clone(),
                content_substring: (*token).clone(),
            })
        }
        PredicateFamily::TestOrDocumentation => {
            let variants = [
                vec![ArtifactKind::Test],
                vec![ArtifactKind::Documentation],
                vec![ArtifactKind::Test, ArtifactKind::Documentation],
            ];
            let feasible: Vec<&Vec<ArtifactKind>> = variants
                .iter()
                .filter(|kinds| records.iter().filter(|r| kinds.contains(&r.kind)).count() >= target)
                .collect();
            Some(Predicate::TestOrDocumentation {
                kinds: (*feasible.choose(rng)?).clone(),
            })
        }
    }
}

/// Objective text for a predicate. Backtick-quoted terms are usable search
/// queries; the hidden set itself is never described exhaustively.
pub fn objective_for(predicate: &Predicate, target: u32, snapshot: &str) -> String {
    let head = format!("Collect {target} distinct artifacts from snapshot {snapshot}");
    let quote = |xs: &[String]| {
        xs.iter()
            .map(|x| format!("`{x}`"))
            .collect::<Vec<_>>()
            .join(" or ")
    };
    match predicate {
        Predicate::KeywordOrPattern { keywords, patterns } => {
            let mut s = format!("{head} whose text mentions {}", quote(keywords));
            for p in patterns {
                let term = p
                    .trim_start_matches(r"(?i)\b")
                    .trim_end_matches(r"\w*")
                    .to_owned();
                s.push_str(&format!(
                    " or matches the pattern \"{p}\" (search term `{term}`)"
                ));
            }
            s.push('.');
            s
        }
        Predicate::PathAndContent {
            path_substring,
            content_substring,
        } => format!(
            "{head} whose path contains `{path_substring}` and whose text mentions `{content_substring}`."
        ),
        Predicate::TestOrDocumentation { kinds } => {
            let terms: Vec<String> = kinds.iter().map(|k| format!("#{k}")).collect();
            format!("{head} of kind {}.", quote(&terms))
        }
    }
}

/// Generates the artifact-retrieval manifest. Instance `i` of each target uses
/// snapshot `i mod S` and predicate family `(i / S) mod 3`.
pub fn generate_manifest(
    snapshots: &[SnapshotSource],
    config: &GenerationConfig,
) -> Result<RepoScanManifest> {
    if snapshots.is_empty() {
        return Err(Error::Config("at least one snapshot is required".into()));
    }
    let mut names = BTreeSet::new();
    for s in snapshots {
        if !names.insert(s.name.clone()) {
            return Err(Error::Config(format!("duplicate snapshot name {}", s.name)));
        }
    }

    let mut infos = Vec::new();
    let mut corpora = Vec::new();
    for s in snapshots {
        let records = index_snapshot(&s.root)?;
        let df = token_frequencies(&records);
        infos.push(SnapshotInfo {
            name: s.name.clone(),
            root: s.root.display().to_string(),
            digest: snapshot_digest(&s.root)?,
            artifacts: records.len(),
        });
        corpora.push((records, df));
    }

    let mut tasks = Vec::new();
    let mut hidden = BTreeMap::new();
    for &target in &config.targets {
        let budget = config.budgets.budget_for(target)?;
        for instance in 0..config.instances_per_target {
            let snap_idx = instance as usize % snapshots.len();
            let family =
                PredicateFamily::ALL[(instance as usize / snapshots.len()) % PredicateFamily::ALL.len()];
            let snapshot = &snapshots[snap_idx];
            let (records, df) = &corpora[snap_idx];
            let task_seed = seed::mix(&[config.seed, target as u64, instance as u64]);
            let mut rng = seed::rng(&[task_seed]);

            let mut found = None;
            for _ in 0..MAX_PREDICATE_ATTEMPTS {
                let Some(predicate) = sample_predicate(family, records, df, target as usize, &mut rng)
                else {
                    continue;
                };
                let ids = matching_ids(records, &predicate)?;
                if ids.len() >= target as usize {
                    found = Some((predicate, ids));
                    break;
                }
            }
            let (predicate, valid_ids) = found.ok_or_else(|| Error::Generation {
                snapshot: snapshot.name.clone(),
                target,
                reason: format!("no {family:?} predicate with at least {target} matches"),
            })?;

            let task_id = format!("reposcan-{}-n{target}-i{instance:02}", snapshot.name);
            let spec = TaskSpec::new(
                task_id.clone(),
                Family::Reposcan,
                objective_for(&predicate, target, &snapshot.name),
                target,
                budget,
                task_seed,
                format!("reposcan:{task_id}"),
            )?;
            tasks.push(RepoScanTask {
                spec,
                snapshot: snapshot.name.clone(),
            });
            hidden.insert(
                task_id,
                RepoScanHidden {
                    predicate,
                    valid_ids,
                },
            );
        }
    }

    Ok(RepoScanManifest {
        family: Family::Reposcan,
        metadata: RepoScanMetadata {
            seed: config.seed,
            targets: config.targets.clone(),
            instances_per_target: config.instances_per_target,
            page_size: PAGE_SIZE,
            budgets: config.budgets.clone(),
            snapshots: infos,
        },
        tasks,
        hidden,
    })
}

/// Re-indexes a manifest snapshot and checks its digest.
pub fn load_snapshot(info: &SnapshotInfo, base: Option<&Path>) -> Result<Vec<ArtifactRecord>> {
    let mut root = PathBuf::from(&info.root);
    if !root.exists() {
        if let Some(base) = base {
            root = base.join(root);
        }
    }
    let digest = snapshot_digest(&root)?;
    if digest != info.digest {
        return Err(Error::Manifest(format!(
            "snapshot {} at {} changed since generation",
            info.name,
            root.display()
        )));
    }
    index_snapshot(&root)
}

use std::path::Path;

use qgp_core::dataops::{self, BacklogConfig, DataSources};
use qgp_core::fixtures::{write_fixtures, FixtureLayout};
use qgp_core::reposcan::{self, GenerationConfig, SnapshotSource};
use qgp_core::runner::{public_tasks_from_json, smoke, Manifest, Runner};
use qgp_core::task::BudgetTable;

fn fixtures(dir: &Path) -> FixtureLayout {
    write_fixtures(&dir.join("fx"), 0).unwrap()
}

fn reposcan_manifest(layout: &FixtureLayout) -> Manifest {
    let sources: Vec<SnapshotSource> = layout.snapshots.iter().map(SnapshotSource::from_path).collect();
    Manifest::Reposcan(reposcan::generate_manifest(&sources, &GenerationConfig::default()).unwrap())
}

fn dataops_manifest(layout: &FixtureLayout) -> Manifest {
    let sources = DataSources::load(&layout.sources).unwrap();
    Manifest::Dataops(dataops::generate_manifest(&sources, &BacklogConfig::default()).unwrap())
}

fn failures(manifest: Manifest) -> Vec<String> {
    let runner = Runner::new(manifest, None).unwrap();
    smoke(&runner)
        .unwrap()
        .into_iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect()
}

#[test]
fn reposcan_manifest_shape_and_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let layout = fixtures(dir.path());
    let manifest = reposcan_manifest(&layout);
    assert_eq!(manifest.to_json(), reposcan_manifest(&layout).to_json());

    let tasks = manifest.tasks();
    assert_eq!(tasks.len(), 36);
    let budgets = BudgetTable::reposcan();
    for n in [10, 25, 50, 100] {
        let at_n: Vec<_> = tasks.iter().filter(|t| t.target_count == n).collect();
        assert_eq!(at_n.len(), 9);
        assert!(at_n.iter().all(|t| t.budget == budgets.budget_for(n).unwrap()));
    }
    assert!(failures(manifest.clone()).is_empty());

    // The policy-facing view holds no hidden section.
    let public = public_tasks_from_json(&manifest.to_json()).unwrap();
    let text = serde_json::to_string(&public).unwrap();
    assert!(!text.contains("valid_ids") && !text.contains("predicate"));
    assert_eq!(public.len(), 36);

    let Manifest::Reposcan(mut tampered) = manifest else { unreachable!() };
    let first = tampered.tasks[0].spec.task_id.clone();
    tampered.hidden.get_mut(&first).unwrap().valid_ids.pop();
    let failed = failures(Manifest::Reposcan(tampered));
    assert_eq!(failed, vec![format!("{first}: hidden set matches predicate")]);
}

#[test]
fn dataops_manifest_shape_and_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let layout = fixtures(dir.path());
    let manifest = dataops_manifest(&layout);
    assert_eq!(manifest.to_json(), dataops_manifest(&layout).to_json());

    let tasks = manifest.tasks();
    assert_eq!(tasks.len(), 24);
    let budgets = BudgetTable::dataops();
    for n in [3, 5, 10, 20] {
        let at_n: Vec<_> = tasks.iter().filter(|t| t.target_count == n).collect();
        assert_eq!(at_n.len(), 6);
        assert!(at_n.iter().all(|t| t.budget == budgets.budget_for(n).unwrap()));
    }
    assert!(failures(manifest.clone()).is_empty());

    let public = public_tasks_from_json(&manifest.to_json()).unwrap();
    let text = serde_json::to_string(&public).unwrap();
    assert!(!text.contains("\"checker\"") && !text.contains("expected_") && !text.contains("\"files\""));

    let Manifest::Dataops(mut tampered) = manifest else { unreachable!() };
    let first = tampered.tasks[0].spec.task_id.clone();
    let files = &mut tampered.hidden.get_mut(&first).unwrap().files;
    let path = files.keys().next().unwrap().clone();
    files.get_mut(&path).unwrap().push_str("tampered\n");
    let failed = failures(Manifest::Dataops(tampered));
    assert!(failed.contains(&format!("{first}: backlog intact")), "{failed:?}");
}

#[test]
fn fixtures_refuse_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    assert!(write_fixtures(&dir.path().join("fx"), 0).is_err());
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use qgp_core::action::{Action, Proposal};
use qgp_core::controller::{AblationFlags, Controller, ControllerConfig};
use qgp_core::episode::{run_episode, Episode};
use qgp_core::ledger::{reported_count_error, Outcome, StepEntry};
use qgp_core::metrics::{paired_bootstrap, RunMetrics};
use qgp_core::policy::{Policy, PolicySpec};
use qgp_core::reposcan::{ArtifactRecord, Corpus, RepoScanEnv};
use qgp_core::runner::{Manifest, Runner};
use qgp_core::task::{Family, PublicTaskView, TaskSpec};
use rand::Rng;

type Check = Result<String, String>;

fn qgp(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qgp"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot launch qgp: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "qgp {} failed: {}{}",
            args.join(" "),
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp paths")
}

/// Reference fixtures and both manifests, generated through the binary.
struct Reference {
    _dir: tempfile::TempDir,
    reposcan: PathBuf,
    dataops: PathBuf,
}

fn generate(root: &Path) -> Result<(PathBuf, PathBuf), String> {
    let fx = root.join("fx");
    qgp(&["fixtures", "--out", s(&fx)])?;
    let reposcan = fx.join("reposcan.json");
    let dataops = fx.join("dataops.json");
    let snaps: Vec<PathBuf> = ["httpkit", "checkrunner", "microweb"]
        .iter()
        .map(|n| fx.join("snapshots").join(n))
        .collect();
    qgp(&[
        "gen-reposcan",
        "--snapshot",
        s(&snaps[0]),
        "--snapshot",
        s(&snaps[1]),
        "--snapshot",
        s(&snaps[2]),
        "--out",
        s(&reposcan),
    ])?;
    qgp(&["gen-dataops", "--sources", s(&fx.join("sources")), "--out", s(&dataops)])?;
    Ok((reposcan, dataops))
}

impl Reference {
    fn new() -> Result<Self, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (reposcan, dataops) = generate(dir.path())?;
        Ok(Reference {
            _dir: dir,
            reposcan,
            dataops,
        })
    }
}

fn open(path: &Path) -> Result<Runner, String> {
    Runner::open(path).map_err(|e| e.to_string())
}

fn run_all(runner: &Runner, controller: &ControllerConfig, policy: &PolicySpec) -> Result<Vec<Episode>, String> {
    runner
        .tasks()
        .iter()
        .map(|t| runner.run(t, controller, policy).map_err(|e| e.to_string()))
        .collect()
}

fn success_rate(episodes: &[Episode]) -> f64 {
    let solved = episodes
        .iter()
        .filter(|e| e.record.outcome == Some(Outcome::Success))
        .count();
    solved as f64 / episodes.len() as f64
}

// 1 ----------------------------------------------------------------------

struct Replay(std::vec::IntoIter<Action>);

impl Policy for Replay {
    fn label(&self) -> String {
        "replay".into()
    }

    fn decide(&mut self, _: &PublicTaskView, _: &[StepEntry]) -> qgp_core::Result<Proposal> {
        Ok(self.0.next().expect("script covers the budget").into())
    }
}

fn ledger_oracle() -> Check {
    let start = Instant::now();
    let words = ["alpha", "beta", "gamma", "delta", "omega"];
    let mut rng = qgp_core::seed::rng(&[1]);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=30);
        let records: Vec<ArtifactRecord> = (0..n)
            .map(|i| ArtifactRecord::new(format!("src/f{i:02}.py"), words[rng.gen_range(0..words.len())]))
            .collect();
        let members: BTreeSet<String> = records
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .map(|r| r.artifact_id.clone())
            .collect();
        let id = |i: usize| {
            records
                .get(i)
                .map(|r| r.artifact_id.clone())
                .unwrap_or_else(|| format!("nowhere/{i}.py#source"))
        };
        let script: Vec<Action> = (0..rng.gen_range(1..25))
            .map(|_| {
                if rng.gen_bool(0.4) {
                    Action::Search {
                        query: words[rng.gen_range(0..words.len())].into(),
                        page: rng.gen_range(0..4),
                    }
                } else {
                    let k = rng.gen_range(0..8);
                    Action::Submit {
                        ids: (0..k).map(|_| id(rng.gen_range(0..n + 5))).collect(),
                    }
                }
            })
            .collect();

        // Brute force: distinct submitted ids that the hidden set contains.
        let mut support = BTreeSet::new();
        let mut occurrences = 0u64;
        for a in &script {
            if let Action::Submit { ids } = a {
                occurrences += ids.len() as u64;
                support.extend(ids.iter().cloned());
            }
        }
        let expected = support.iter().filter(|x| members.contains(*x)).count() as u64;
        let expected_dups = occurrences - support.len() as u64;

        let task = TaskSpec::new("r", Family::Reposcan, "Collect artifacts.", 40, script.len() as u32, 0, "r")
            .map_err(|e| e.to_string())?;
        let mut env = RepoScanEnv::new(Arc::new(Corpus::new(records.clone())), &members, 3);
        let mut controller = Controller::new(ControllerConfig::standard());
        let mut policy = Replay(script.into_iter());
        let ep = run_episode(&task, &mut env, &mut controller, &mut policy).map_err(|e| e.to_string())?;
        if ep.record.valid_count != expected || ep.record.duplicate_occurrences != expected_dups {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("1000 runs, {mismatches} mismatches, {secs:.2}s");
    if mismatches == 0 && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 2 ----------------------------------------------------------------------

fn reported_error_table() -> Check {
    // (reported, valid, N, hand value)
    let cases = [
        (12, 9, 10, 0.3),
        (10, 10, 10, 0.0),
        (0, 3, 10, 0.3),
        (15, 25, 25, 0.4),
        (100, 50, 100, 0.5),
        (3, 0, 0, 3.0),
        (0, 1, 1, 1.0),
    ];
    let bad: Vec<String> = cases
        .iter()
        .filter(|(r, v, n, want)| (reported_count_error(*r, *v, *n) - want).abs() > 1e-12)
        .map(|(r, v, n, want)| format!("{r}/{v}/{n} gave {} not {want}", reported_count_error(*r, *v, *n)))
        .collect();
    if bad.is_empty() {
        Ok(format!("{} cases exact, including the N=0 clamp", cases.len()))
    } else {
        Err(bad.join("; "))
    }
}

// 3 ----------------------------------------------------------------------

fn zero_duplicates(reference: &Reference) -> Check {
    let start = Instant::now();
    let runner = open(&reference.reposcan)?;
    let episodes = run_all(&runner, &ControllerConfig::state_qgp(), &PolicySpec::Duplicator)?;
    let dups: u64 = episodes.iter().map(|e| e.record.duplicate_occurrences).sum();
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{} runs, {dups} duplicate occurrences forwarded, {secs:.1}s", episodes.len());
    if episodes.len() == 36 && dups == 0 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 4 ----------------------------------------------------------------------

fn gating(reference: &Reference) -> Check {
    let policy = PolicySpec::scripted("false_completer").expect("scripted policy");
    let mut gated_false = 0;
    let mut gated_runs = 0;
    let mut reached_final = 0;
    let mut standard_misses = Vec::new();
    for path in [&reference.reposcan, &reference.dataops] {
        let runner = open(path)?;
        for c in [
            ControllerConfig::verifier_gated(),
            ControllerConfig::state_qgp(),
            ControllerConfig::unit_qgp(6),
        ] {
            for e in run_all(&runner, &c, &policy)? {
                gated_runs += 1;
                gated_false += usize::from(e.record.outcome == Some(Outcome::FalseCompletion));
            }
        }
        for e in run_all(&runner, &ControllerConfig::standard(), &policy)? {
            let finalized = e
                .ledger
                .history
                .iter()
                .any(|s| matches!(s.forwarded, Some(Action::Final { .. })));
            if finalized {
                reached_final += 1;
                if e.record.outcome != Some(Outcome::FalseCompletion) {
                    standard_misses.push(e.record.task_id.clone());
                }
            }
        }
    }
    let detail = format!(
        "gated: {gated_false}/{gated_runs} false completions; standard: {} of {reached_final} finals not false completions",
        standard_misses.len()
    );
    if gated_false == 0 && reached_final > 0 && standard_misses.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 5 ----------------------------------------------------------------------

fn work_unit_contrast(reference: &Reference) -> Check {
    let runner = open(&reference.dataops)?;
    let policy = PolicySpec::NoSubmitLooper;
    let std = success_rate(&run_all(&runner, &ControllerConfig::standard(), &policy)?);
    let vg = success_rate(&run_all(&runner, &ControllerConfig::verifier_gated(), &policy)?);
    let uq = success_rate(&run_all(&runner, &ControllerConfig::unit_qgp(6), &policy)?);
    let detail = format!("{} backlogs: standard {std:.3}, gated {vg:.3}, unit_qgp {uq:.3}", runner.tasks().len());
    if runner.tasks().len() == 24 && std == 0.0 && vg == 0.0 && uq >= 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 6 ----------------------------------------------------------------------

fn ablation_ordering(reference: &Reference) -> Check {
    let runner = open(&reference.reposcan)?;
    let policy = PolicySpec::RedundantSearcher;
    let chain = [
        ("state_qgp", ControllerConfig::state_qgp()),
        (
            "dedupe_plus_page_no_buffer",
            ControllerConfig::ablation(AblationFlags::DedupePlusPageNoBuffer),
        ),
        ("page_memory_only", ControllerConfig::ablation(AblationFlags::PageMemoryOnly)),
        ("standard", ControllerConfig::standard()),
    ];
    let mut rates = Vec::new();
    for (name, c) in &chain {
        rates.push((*name, success_rate(&run_all(&runner, c, &policy)?)));
    }
    let ordered = rates.windows(2).all(|w| w[0].1 >= w[1].1);
    let strict = rates.windows(2).any(|w| w[0].1 > w[1].1);
    let detail = rates
        .iter()
        .map(|(n, r)| format!("{n} {r:.3}"))
        .collect::<Vec<_>>()
        .join(" >= ");
    if ordered && strict {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 7 ----------------------------------------------------------------------

fn condition(controller: &str, solved: &[bool]) -> BTreeMap<String, RunMetrics> {
    solved
        .iter()
        .enumerate()
        .map(|(i, ok)| {
            let task_id = format!("dataops-t{i:02}");
            let m = RunMetrics {
                task_id: task_id.clone(),
                family: Family::Dataops,
                target_count: 5,
                controller: controller.into(),
                policy: "p".into(),
                success: u8::from(*ok),
                valid_count: if *ok { 5 } else { 0 },
                duplicate_submit_rate: 0.0,
                valid_per_step: 0.0,
                premature_stop: 0,
                false_completion: 0,
                budget_exhausted: u8::from(!ok),
                reported_count_error: None,
                intervention_count: 0,
            };
            (task_id, m)
        })
        .collect()
}

fn bootstrap() -> Check {
    let left = condition("unit_qgp", &[[true; 12], [false; 12]].concat());
    let right = condition("verifier_gated", &[false; 24]);
    let d = paired_bootstrap("unit_qgp", &left, "verifier_gated", &right, 10_000, 0.95, 0)
        .map_err(|e| e.to_string())?;
    let mixed: Vec<bool> = (0..24).map(|i| i % 5 < 2).collect();
    let same = condition("a", &mixed);
    let z = paired_bootstrap("a", &same, "b", &same, 10_000, 0.95, 0).map_err(|e| e.to_string())?;
    let tol = 0.021;
    let detail = format!(
        "delta {:.3} [{:.3}, {:.3}]; identical [{:.3}, {:.3}]",
        d.success_delta, d.ci_low, d.ci_high, z.ci_low, z.ci_high
    );
    if (d.success_delta - 0.5).abs() < 1e-12
        && (d.ci_low - 0.292).abs() <= tol
        && (d.ci_high - 0.708).abs() <= tol
        && z.ci_low == 0.0
        && z.ci_high == 0.0
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 8 ----------------------------------------------------------------------

fn budget_tables(reference: &Reference) -> Check {
    let want_repo = BTreeMap::from([(10u32, 30u32), (25, 60), (50, 100), (100, 180)]);
    let want_data = BTreeMap::from([(3u32, 30u32), (5, 50), (10, 90), (20, 160)]);
    let mut problems = Vec::new();
    let load = |p: &Path| Manifest::load(p).map_err(|e| e.to_string());
    let (repo, data) = (load(&reference.reposcan)?, load(&reference.dataops)?);
    let (Manifest::Reposcan(repo), Manifest::Dataops(data)) = (repo, data) else {
        return Err("manifest families swapped".into());
    };
    if repo.metadata.budgets.0 != want_repo {
        problems.push(format!("reposcan budget map {:?}", repo.metadata.budgets.0));
    }
    if data.metadata.budgets.0 != want_data {
        problems.push(format!("dataops budget map {:?}", data.metadata.budgets.0));
    }
    let repo_specs: Vec<_> = repo.tasks.iter().map(|t| &t.spec).collect();
    let data_specs: Vec<_> = data.tasks.iter().map(|t| &t.spec).collect();
    for (name, specs, want, per_target) in [
        ("reposcan", &repo_specs, &want_repo, 9),
        ("dataops", &data_specs, &want_data, 6),
    ] {
        for (n, b) in want.iter() {
            let at_n: Vec<_> = specs.iter().filter(|t| t.target_count == *n).collect();
            if at_n.len() != per_target {
                problems.push(format!("{name}: {} tasks at N={n}", at_n.len()));
            }
            if let Some(t) = at_n.iter().find(|t| t.budget != *b) {
                problems.push(format!("{name}: {} has budget {}", t.task_id, t.budget));
            }
        }
    }
    if repo.tasks.len() != 36 || data.tasks.len() != 24 {
        problems.push(format!("{} reposcan tasks, {} backlogs", repo.tasks.len(), data.tasks.len()));
    }
    if problems.is_empty() {
        Ok("36 retrieval tasks and 24 backlogs with exact budget maps".into())
    } else {
        Err(problems.join("; "))
    }
}

// 9 ----------------------------------------------------------------------

fn smoke_and_leaks(reference: &Reference) -> Check {
    let mut summary = Vec::new();
    for path in [&reference.reposcan, &reference.dataops] {
        summary.push(qgp(&["smoke", "--manifest", s(path)])?.trim().to_owned());
    }
    // Independent leak check over the policy-facing loader output: no hidden
    // artifact id, file digest, or stored answer in the prompt that asks for it.
    let mut leaked = 0;
    let mut hidden_values = 0;
    for path in [&reference.reposcan, &reference.dataops] {
        let manifest = Manifest::load(path).map_err(|e| e.to_string())?;
        let public = qgp_core::runner::load_public_tasks(path).map_err(|e| e.to_string())?;
        let text = serde_json::to_string(&public).map_err(|e| e.to_string())?;
        match manifest {
            Manifest::Reposcan(m) => {
                for id in m.hidden.values().flat_map(|h| &h.valid_ids) {
                    hidden_values += 1;
                    leaked += usize::from(text.contains(id.as_str()));
                }
            }
            Manifest::Dataops(m) => {
                for (task_id, hidden) in &m.hidden {
                    let view = public.iter().find(|v| &v.task_id == task_id).ok_or("task missing from view")?;
                    for (unit_id, checker) in &hidden.checkers {
                        let value = serde_json::to_value(checker).map_err(|e| e.to_string())?;
                        if let Some(digest) = value.get("expected_digest").and_then(|v| v.as_str()) {
                            hidden_values += 1;
                            leaked += usize::from(text.contains(digest));
                        }
                        if let Some(answer) = value.get("expected_normalized").and_then(|v| v.as_str()) {
                            hidden_values += 1;
                            let prompt = &view.units.iter().find(|u| &u.unit_id == unit_id).ok_or("unit missing")?.prompt;
                            leaked += usize::from(prompt.contains(&format!("`{answer}`")));
                        }
                    }
                }
            }
        }
    }
    let detail = format!("{}; {leaked} of {hidden_values} hidden values in loader output", summary.join("; "));
    if leaked == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 10 ---------------------------------------------------------------------

fn pipeline(root: &Path, jobs: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let (reposcan, dataops) = generate(root)?;
    let runs = root.join("runs");
    let mut records = Vec::new();
    let plan: [(&Path, &str, &[&str]); 6] = [
        (&reposcan, "standard", &["--policy", "redundant_searcher"]),
        (&reposcan, "state_qgp", &["--policy", "redundant_searcher"]),
        (&reposcan, "verifier_gated", &["--policy", "false_completer"]),
        (&dataops, "standard", &["--policy", "no_submit_looper"]),
        (&dataops, "unit_qgp", &["--policy", "no_submit_looper"]),
        (&dataops, "verifier_gated", &["--policy", "solver"]),
    ];
    for (i, (manifest, controller, policy)) in plan.iter().enumerate() {
        let out = runs.join(format!("{i}-{controller}.jsonl"));
        let mut args = vec!["run", "--manifest", s(manifest), "--controller", controller, "--jobs", jobs, "--out", s(&out)];
        args.extend_from_slice(policy);
        qgp(&args)?;
        records.push(out);
    }
    let agg = root.join("aggregate.csv");
    let mut args = vec!["aggregate", "--out", s(&agg), "--records"];
    args.extend(records.iter().map(|p| s(p)));
    qgp(&args)?;
    let delta = root.join("delta.csv");
    qgp(&["delta", "--left", s(&records[4]), "--right", s(&records[3]), "--out", s(&delta)])?;

    let mut files = BTreeMap::new();
    for p in [reposcan, dataops, agg, delta].into_iter().chain(records) {
        let rel = p.strip_prefix(root).unwrap().display().to_string();
        files.insert(rel, std::fs::read(&p).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn determinism() -> Check {
    let dirs: Vec<tempfile::TempDir> = (0..3)
        .map(|_| tempfile::tempdir().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let a = pipeline(dirs[0].path(), "1")?;
    let b = pipeline(dirs[1].path(), "1")?;
    let c = pipeline(dirs[2].path(), "8")?;
    let differing: Vec<&String> = a
        .keys()
        .filter(|k| a.get(*k) != b.get(*k) || a.get(*k) != c.get(*k))
        .collect();
    let detail = format!("{} files compared across two invocations and --jobs 1/8", a.len());
    if differing.is_empty() && a.len() == b.len() && a.len() == c.len() {
        Ok(detail)
    } else {
        Err(format!("{detail}; differing: {differing:?}"))
    }
}

fn main() {
    let reference = Reference::new();
    let with_reference = |f: fn(&Reference) -> Check| -> Check {
        match &reference {
            Ok(r) => f(r),
            Err(e) => Err(format!("reference generation failed: {e}")),
        }
    };
    let results: Vec<(&str, Check)> = vec![
        ("1 ledger count matches brute-force oracle", ledger_oracle()),
        ("2 reported-count error table", reported_error_table()),
        ("3 state controller forwards zero duplicates", with_reference(zero_duplicates)),
        ("4 gated controllers prevent false completion", with_reference(gating)),
        ("5 work-unit controller contrast", with_reference(work_unit_contrast)),
        ("6 ablation ordering", with_reference(ablation_ordering)),
        ("7 paired bootstrap interval", bootstrap()),
        ("8 budget tables and task counts", with_reference(budget_tables)),
        ("9 smoke checks and leak-freedom", with_reference(smoke_and_leaks)),
        ("10 byte-identical pipeline", determinism()),
    ];
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

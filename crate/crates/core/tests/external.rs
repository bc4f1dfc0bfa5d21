use std::sync::Arc;

use qgp_core::action::{Observation, Proposal};
use qgp_core::controller::{Controller, ControllerConfig};
use qgp_core::episode::{run_episode, Episode, PARSE_ERROR};
use qgp_core::ledger::Outcome;
use qgp_core::policy::{AdapterRequest, ExternalPolicy};
use qgp_core::reposcan::{ArtifactRecord, Corpus, RepoScanEnv};
use qgp_core::task::{Family, TaskSpec};

fn run(command: &str, timeout_ms: u64, budget: u32, controller: ControllerConfig) -> Episode {
    let records = vec![
        ArtifactRecord::new("src/a.py", "cookie"),
        ArtifactRecord::new("src/b.py", "cookie"),
    ];
    let valid = [records[0].artifact_id.clone()];
    let mut env = RepoScanEnv::new(Arc::new(Corpus::new(records)), valid, 10);
    let task = TaskSpec::new("ext", Family::Reposcan, "Collect `cookie` artifacts.", 2, budget, 0, "ext").unwrap();
    let mut policy = ExternalPolicy::spawn(command, timeout_ms).unwrap();
    let mut controller = Controller::new(controller);
    run_episode(&task, &mut env, &mut controller, &mut policy).unwrap()
}

const CLAIMER: &str =
    r#"while read -r line; do echo '{"type":"final","completion_claim":true,"reported_count":5}'; done"#;

#[test]
fn claim_is_classified_from_verifier_state() {
    let ep = run(CLAIMER, 5_000, 10, ControllerConfig::standard());
    assert_eq!(ep.record.outcome, Some(Outcome::FalseCompletion));
    assert_eq!(ep.record.steps_used, 1);
    assert_eq!(ep.record.reported_count, Some(5));

    let ep = run(CLAIMER, 5_000, 4, ControllerConfig::verifier_gated());
    assert_eq!(ep.record.outcome, Some(Outcome::BudgetExhausted));
    assert_eq!(ep.record.steps_used, 4);
}

#[test]
fn request_lines_carry_only_public_fields() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("requests");
    let script = format!(
        r#"while read -r line; do echo "$line" >> '{}'; echo '{{"type":"search","query":"cookie","page":0}}'; done"#,
        log.display()
    );
    let ep = run(&script, 5_000, 3, ControllerConfig::standard());
    assert_eq!(ep.record.outcome, Some(Outcome::BudgetExhausted));
    let text = std::fs::read_to_string(&log).unwrap();
    let requests: Vec<AdapterRequest> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(requests.len(), 3);
    assert_eq!(requests[0].step, 1);
    assert_eq!(requests[0].budget_remaining, 3);
    assert_eq!(requests[0].last_observation, None);
    assert_eq!(requests[2].budget_remaining, 1);
    assert!(matches!(requests[1].last_observation, Some(Observation::SearchResults { .. })));
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 7, "{line}");
    }
}

#[test]
fn unparsable_lines_are_malformed_steps() {
    let ep = run("while read -r line; do echo 'search for cookies'; done", 5_000, 3, ControllerConfig::standard());
    assert_eq!(ep.record.outcome, Some(Outcome::BudgetExhausted));
    for e in &ep.ledger.history {
        assert_eq!(e.proposed, Proposal::Malformed { raw: "search for cookies".into() });
        assert!(matches!(&e.observation, Observation::ControllerNotice { reason, .. } if reason.starts_with(PARSE_ERROR)));
    }
}

#[test]
fn slow_adapter_times_out_per_step() {
    let start = std::time::Instant::now();
    let ep = run("while read -r line; do sleep 5; done", 100, 2, ControllerConfig::standard());
    assert_eq!(ep.record.steps_used, 2);
    assert_eq!(ep.record.outcome, Some(Outcome::BudgetExhausted));
    assert!(matches!(&ep.ledger.history[0].proposed, Proposal::Malformed { .. }));
    assert!(start.elapsed().as_secs() < 4);
}

#[test]
fn exiting_adapter_aborts_the_run() {
    let ep = run("exit 0", 5_000, 5, ControllerConfig::standard());
    assert_eq!(ep.record.outcome, None);
    assert!(ep.record.error.is_some());
    assert!(qgp_core::metrics::compute_run_metrics(&ep.record).is_err());
}

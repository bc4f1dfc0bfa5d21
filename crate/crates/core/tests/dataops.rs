use qgp_core::action::{Action, Observation, UnitOp, Verdict};
use qgp_core::controller::{Controller, ControllerConfig};
use qgp_core::dataops::{dataops_objective, excerpt_of, generate_backlog, Backlog, DataOpsEnv, DataSources, UnitKind, UnitStatus};
use qgp_core::episode::{run_episode, Environment};
use qgp_core::fixtures::write_fixtures;
use qgp_core::ledger::{Outcome, RunLedger};
use qgp_core::policy::{plan_edit, PolicySpec};
use qgp_core::task::{BudgetTable, Family, TaskSpec};

fn backlog(target: u32) -> (Backlog, TaskSpec) {
    let dir = tempfile::tempdir().unwrap();
    let layout = write_fixtures(&dir.path().join("fx"), 3).unwrap();
    let sources = DataSources::load(&layout.sources).unwrap();
    let backlog = generate_backlog(&sources, "b00", target, 17).unwrap();
    let budget = BudgetTable::dataops().budget_for(target).unwrap();
    let task = TaskSpec::new("b00", Family::Dataops, dataops_objective(target), target, budget, 17, "b00").unwrap();
    (backlog, task)
}

fn run(target: u32, controller: ControllerConfig, policy: PolicySpec) -> qgp_core::episode::Episode {
    let (backlog, task) = backlog(target);
    let mut env = DataOpsEnv::new(backlog).unwrap();
    let mut controller = Controller::new(controller);
    let mut policy = policy.build().unwrap();
    run_episode(&task, &mut env, &mut controller, policy.as_mut()).unwrap()
}

fn act(env: &mut DataOpsEnv, ledger: &mut RunLedger, action: Action) -> Observation {
    ledger.step += 1;
    env.apply(&action, ledger, 5).unwrap()
}

fn check(env: &mut DataOpsEnv, ledger: &mut RunLedger, unit_id: &str) -> Option<Verdict> {
    match act(env, ledger, Action::RunCheck { unit_id: unit_id.into() }) {
        Observation::UnitFeedback { verdict, .. } => verdict,
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn every_unit_passes_after_its_planned_edit() {
    let (backlog, _) = backlog(10);
    assert!(backlog.units.len() as u32 >= 10 + qgp_core::dataops::extra_units(10));
    let mut env = DataOpsEnv::new(backlog.clone()).unwrap();
    let mut ledger = RunLedger::new();
    let mut initially_failing = 0;
    for unit in &backlog.units {
        let before = check(&mut env, &mut ledger, &unit.unit_id);
        if unit.kind == UnitKind::ConsistencyAnswer {
            assert_eq!(before, Some(Verdict::Fail), "no answer is stored yet");
        }
        if before == Some(Verdict::Fail) {
            initially_failing += 1;
            let detail = match act(&mut env, &mut ledger, Action::Inspect { unit_id: unit.unit_id.clone() }) {
                Observation::UnitFeedback { detail, .. } => detail,
                other => panic!("unexpected {other:?}"),
            };
            let op = plan_edit(&unit.public(), excerpt_of(&detail).unwrap_or("")).unwrap();
            act(&mut env, &mut ledger, Action::Edit { unit_id: unit.unit_id.clone(), payload: op.to_payload() });
        }
        assert_eq!(check(&mut env, &mut ledger, &unit.unit_id), Some(Verdict::Pass), "{}", unit.unit_id);
        assert_eq!(env.status(&unit.unit_id), Some(UnitStatus::Passed));
    }
    assert!(initially_failing > backlog.units.len() / 2);
}

#[test]
fn unit_lifecycle() {
    let (backlog, _) = backlog(5);
    let unit = backlog.units[0].clone();
    let id = unit.unit_id.clone();
    let mut env = DataOpsEnv::new(backlog).unwrap();
    let mut ledger = RunLedger::new();

    // Submitting before the check passes is rejected.
    match act(&mut env, &mut ledger, Action::SubmitUnit { unit_id: id.clone() }) {
        Observation::SubmitFeedback { rejected, valid_count, .. } => {
            assert_eq!(rejected, vec![id.clone()]);
            assert_eq!(valid_count, 0);
        }
        other => panic!("unexpected {other:?}"),
    }

    let detail = match act(&mut env, &mut ledger, Action::Inspect { unit_id: id.clone() }) {
        Observation::UnitFeedback { op: UnitOp::Inspect, detail, status_after, .. } => {
            assert_eq!(status_after, Some(UnitStatus::Pending));
            assert!(detail.starts_with(&unit.prompt));
            detail
        }
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(env.last_inspected(&id), Some(2));
    let op = plan_edit(&unit.public(), excerpt_of(&detail).unwrap_or("")).expect("solver can plan every unit");
    act(&mut env, &mut ledger, Action::Edit { unit_id: id.clone(), payload: op.to_payload() });
    assert_eq!(env.status(&id), Some(UnitStatus::Attempted));
    match act(&mut env, &mut ledger, Action::RunCheck { unit_id: id.clone() }) {
        Observation::UnitFeedback { verdict, .. } => assert_eq!(verdict, Some(Verdict::Pass)),
        other => panic!("unexpected {other:?}"),
    }

    // Edits to a passed unit are ignored and it stays passed.
    match act(&mut env, &mut ledger, Action::Edit { unit_id: id.clone(), payload: "{}".into() }) {
        Observation::UnitFeedback { error, status_after, .. } => {
            assert!(!error);
            assert_eq!(status_after, Some(UnitStatus::Passed));
        }
        other => panic!("unexpected {other:?}"),
    }

    // The earlier rejection does not stop the first passing submission.
    match act(&mut env, &mut ledger, Action::SubmitUnit { unit_id: id.clone() }) {
        Observation::SubmitFeedback { accepted, remaining, .. } => {
            assert_eq!(accepted, vec![id.clone()]);
            assert_eq!(remaining, 4);
        }
        other => panic!("unexpected {other:?}"),
    }
    match act(&mut env, &mut ledger, Action::SubmitUnit { unit_id: id.clone() }) {
        Observation::SubmitFeedback { duplicates, .. } => assert_eq!(duplicates, vec![id.clone()]),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(env.verified_count(), 1);
    assert_eq!(ledger.valid_count(), 1);
}

#[test]
fn malformed_edits_and_unknown_units() {
    let (backlog, _) = backlog(3);
    let id = backlog.units[0].unit_id.clone();
    let mut env = DataOpsEnv::new(backlog).unwrap();
    let mut ledger = RunLedger::new();
    match act(&mut env, &mut ledger, Action::Edit { unit_id: id.clone(), payload: "not json".into() }) {
        Observation::UnitFeedback { error, status_after, .. } => {
            assert!(error);
            assert_eq!(status_after, Some(UnitStatus::Attempted));
        }
        other => panic!("unexpected {other:?}"),
    }
    match act(&mut env, &mut ledger, Action::Inspect { unit_id: "u99".into() }) {
        Observation::UnitFeedback { error, status_after, .. } => {
            assert!(error);
            assert_eq!(status_after, None);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn solver_and_looper_under_controllers() {
    let ep = run(5, ControllerConfig::standard(), PolicySpec::Solver);
    assert_eq!(ep.record.outcome, Some(Outcome::Success));
    assert!(ep.record.steps_used <= ep.record.budget);

    for controller in [ControllerConfig::standard(), ControllerConfig::verifier_gated()] {
        let ep = run(5, controller, PolicySpec::NoSubmitLooper);
        assert_eq!(ep.record.valid_count, 0);
        assert_eq!(ep.record.submission_occurrences, 0);
        assert_eq!(ep.record.outcome, Some(Outcome::BudgetExhausted));
    }

    let ep = run(5, ControllerConfig::unit_qgp(6), PolicySpec::NoSubmitLooper);
    assert_eq!(ep.record.outcome, Some(Outcome::Success));
    assert!(ep.record.intervention_count > 0);
}

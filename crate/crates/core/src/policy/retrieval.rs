//! History-driven helpers for retrieval policies.

use std::collections::BTreeSet;

use crate::action::{Action, Observation, Proposal};
use crate::ledger::StepEntry;
use crate::task::PublicTaskView;

/// Search terms derived from public task text.
pub fn search_terms(view: &PublicTaskView) -> Vec<String> {
    let terms = view.objective_terms();
    if terms.is_empty() {
        vec![crate::controller::fallback_query(&view.objective)]
    } else {
        terms
    }
}

/// Ids the policy itself proposed for submission.
pub fn proposed_ids(history: &[StepEntry]) -> BTreeSet<String> {
    history
        .iter()
        .filter_map(|e| match &e.proposed {
            Proposal::Action {
                action: Action::Submit { ids },
            } => Some(ids.iter().cloned()),
            _ => None,
        })
        .flatten()
        .collect()
}

/// Candidates observed so far that the policy has not proposed yet.
pub fn unseen_candidates(history: &[StepEntry]) -> Vec<String> {
    let proposed = proposed_ids(history);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for e in history {
        if let Observation::SearchResults { candidates, .. } = &e.observation {
            for c in candidates {
                if !proposed.contains(&c.artifact_id) && seen.insert(c.artifact_id.clone()) {
                    out.push(c.artifact_id.clone());
                }
            }
        }
    }
    out
}

pub fn last_valid_count(history: &[StepEntry]) -> u64 {
    history
        .iter()
        .rev()
        .find_map(|e| match &e.observation {
            Observation::SubmitFeedback { valid_count, .. }
            | Observation::ControllerNotice { valid_count, .. } => Some(*valid_count),
            _ => None,
        })
        .unwrap_or(0)
}

/// Search the joined terms and then term by term, pages ascending, submitting every unseen candidate.
/// Claims completion only once feedback shows nothing remaining.
pub fn greedy_oracle(view: &PublicTaskView, history: &[StepEntry]) -> Action {
    if let Some(Observation::SubmitFeedback {
        remaining: 0,
        valid_count,
        ..
    }) = history.last().map(|e| &e.observation)
    {
        return Action::Final {
            completion_claim: true,
            reported_count: Some(*valid_count),
        };
    }
    let pending = unseen_candidates(history);
    if !pending.is_empty() {
        return Action::Submit { ids: pending };
    }
    let terms = search_terms(view);
    let mut schedule = Vec::with_capacity(terms.len() + 1);
    if terms.len() > 1 {
        // Items matching every term rank first under the joined query.
        schedule.push(terms.join(" "));
    }
    schedule.extend(terms);
    let last = history.iter().rev().find_map(|e| match &e.observation {
        Observation::SearchResults {
            query,
            page,
            candidates,
        } => Some((query.clone(), *page, candidates.is_empty())),
        _ => None,
    });
    let (index, page) = match last {
        None => (0, 0),
        Some((query, page, exhausted)) => {
            let i = schedule.iter().position(|t| *t == query).unwrap_or(0);
            if exhausted {
                (i + 1, 0)
            } else {
                (i, page + 1)
            }
        }
    };
    match schedule.get(index) {
        Some(query) => Action::Search {
            query: query.clone(),
            page,
        },
        None => Action::Final {
            completion_claim: false,
            reported_count: Some(last_valid_count(history)),
        },
    }
}

/// Page for the `m`-th search of a schedule that restarts from page zero
/// every round: 0, 0 1, 0 1 2, ...
pub fn restart_page(m: usize) -> u32 {
    let mut round = 0;
    let mut start = 0;
    while start + round < m {
        start += round + 1;
        round += 1;
    }
    (m - start) as u32
}

/// Extra submissions of each result page made by [`redundant_searcher`].
pub const REDUNDANT_RESUBMITS: usize = 2;

/// Re-walks result pages from the start every round and resubmits each result
/// page [`REDUNDANT_RESUBMITS`] more times, so much of its work repeats earlier work.
pub fn redundant_searcher(view: &PublicTaskView, history: &[StepEntry]) -> Action {
    if let Some(Observation::SearchResults { candidates, .. }) = history.last().map(|e| &e.observation) {
        if !candidates.is_empty() {
            return Action::Submit {
                ids: candidates.iter().map(|c| c.artifact_id.clone()).collect(),
            };
        }
    }
    let trailing: Vec<&Action> = history
        .iter()
        .rev()
        .map_while(|e| match e.proposed.action() {
            Some(a @ Action::Submit { .. }) => Some(a),
            _ => None,
        })
        .collect();
    if let Some(Action::Submit { ids }) = trailing.first() {
        if trailing.len() <= REDUNDANT_RESUBMITS {
            return Action::Submit { ids: ids.clone() };
        }
    }
    let searches = history
        .iter()
        .filter(|e| {
            matches!(
                e.proposed,
                Proposal::Action {
                    action: Action::Search { .. }
                }
            )
        })
        .count();
    Action::Search {
        query: search_terms(view).join(" "),
        page: restart_page(searches),
    }
}

/// Searches and submits until some ids are accepted, then resubmits that
/// first accepted batch forever.
pub fn duplicator(view: &PublicTaskView, history: &[StepEntry]) -> Action {
    let first_accepted = history.iter().find_map(|e| match &e.observation {
        Observation::SubmitFeedback { accepted, .. } if !accepted.is_empty() => Some(accepted.clone()),
        _ => None,
    });
    if let Some(ids) = first_accepted {
        return Action::Submit { ids };
    }
    if let Some(Observation::SearchResults { candidates, .. }) = history.last().map(|e| &e.observation) {
        if !candidates.is_empty() {
            return Action::Submit {
                ids: candidates.iter().map(|c| c.artifact_id.clone()).collect(),
            };
        }
    }
    let searches = history
        .iter()
        .filter(|e| matches!(e.observation, Observation::SearchResults { .. }))
        .count();
    Action::Search {
        query: search_terms(view)[0].clone(),
        page: searches as u32,
    }
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AblationFlags, InterventionKind};
use crate::action::{Action, Observation};
use crate::reposcan::PAGE_SIZE;
use crate::verifier::normalize_id;

/// Which StateQGP components are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFeatures {
    pub dedupe: bool,
    pub page_memory: bool,
    /// Turn an empty filtered submit into a search.
    pub repair: bool,
    /// Prefer buffered unseen candidates over a search repair.
    pub buffer: bool,
    pub gate: bool,
}

impl StateFeatures {
    pub fn full() -> Self {
        StateFeatures {
            dedupe: true,
            page_memory: true,
            repair: true,
            buffer: true,
            gate: true,
        }
    }

    pub fn ablation(flags: AblationFlags) -> Self {
        let none = StateFeatures {
            dedupe: false,
            page_memory: false,
            repair: false,
            buffer: false,
            gate: false,
        };
        match flags {
            AblationFlags::DedupeOnly => StateFeatures { dedupe: true, ..none },
            AblationFlags::PageMemoryOnly => StateFeatures {
                page_memory: true,
                ..none
            },
            AblationFlags::DedupePlusPageNoBuffer => StateFeatures {
                dedupe: true,
                page_memory: true,
                repair: true,
                ..none
            },
        }
    }
}

/// Submitted ids, seen pages and buffered unseen candidates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateQgpState {
    pub submitted_ids: BTreeSet<String>,
    pub seen_pages: BTreeSet<(String, u32)>,
    pub last_query: Option<String>,
    pub next_unseen_page: BTreeMap<String, u32>,
    pub candidate_buffer: Vec<String>,
}

type Notes = Vec<(InterventionKind, String)>;

/// Query used when no search has been forwarded yet: the first quoted
/// objective term, else the first word of four or more letters.
pub fn fallback_query(objective: &str) -> String {
    if let Some(term) = crate::task::objective_terms(objective).into_iter().next() {
        return term;
    }
    objective
        .split(|c: char| !c.is_alphanumeric())
        .find(|w| w.len() >= 4 && w.chars().all(char::is_alphabetic))
        .unwrap_or("artifact")
        .to_lowercase()
}

impl StateQgpState {
    pub fn next_unseen(&self, query: &str) -> u32 {
        self.next_unseen_page.get(query).copied().unwrap_or(0)
    }

    fn mark_seen(&mut self, query: &str, page: u32) {
        self.seen_pages.insert((query.to_owned(), page));
        let mut next = self.next_unseen(query);
        while self.seen_pages.contains(&(query.to_owned(), next)) {
            next += 1;
        }
        self.next_unseen_page.insert(query.to_owned(), next);
    }

    fn repair_search(&self, objective: &str) -> Action {
        let query = self
            .last_query
            .clone()
            .unwrap_or_else(|| fallback_query(objective));
        let page = self.next_unseen(&query);
        Action::Search { query, page }
    }

    /// Rewrites a non-terminating action. Termination gating is handled by
    /// the caller.
    pub fn transform(&self, action: &Action, features: StateFeatures, objective: &str) -> (Action, Notes) {
        let mut notes = Notes::new();
        match action {
            Action::Search { query, page } if features.page_memory => {
                let q = query.trim();
                if self.seen_pages.contains(&(q.to_owned(), *page)) {
                    let next = self.next_unseen(q);
                    notes.push((
                        InterventionKind::PageAdvanced,
                        format!("page {page} of \"{q}\" already seen; advanced to {next}"),
                    ));
                    return (
                        Action::Search {
                            query: q.to_owned(),
                            page: next,
                        },
                        notes,
                    );
                }
                (action.clone(), notes)
            }
            Action::Submit { ids } if features.dedupe => {
                let mut batch = BTreeSet::new();
                let kept: Vec<String> = ids
                    .iter()
                    .filter(|raw| {
                        let id = normalize_id(raw);
                        !self.submitted_ids.contains(id) && batch.insert(id.to_owned())
                    })
                    .cloned()
                    .collect();
                let removed = ids.len() - kept.len();
                if removed > 0 {
                    notes.push((
                        InterventionKind::DedupFiltered,
                        format!("removed {removed} repeated ids"),
                    ));
                }
                if !kept.is_empty() || !features.repair {
                    return (Action::Submit { ids: kept }, notes);
                }
                if features.buffer && !self.candidate_buffer.is_empty() {
                    let ids: Vec<String> =
                        self.candidate_buffer.iter().take(PAGE_SIZE).cloned().collect();
                    notes.push((
                        InterventionKind::RoutedToSubmit,
                        format!("submitted {} buffered candidates", ids.len()),
                    ));
                    return (Action::Submit { ids }, notes);
                }
                let search = self.repair_search(objective);
                if let Action::Search { query, page } = &search {
                    notes.push((
                        InterventionKind::RepairedToSearch,
                        format!("empty submit repaired to search \"{query}\" page {page}"),
                    ));
                }
                (search, notes)
            }
            _ => (action.clone(), notes),
        }
    }

    pub fn observe(&mut self, forwarded: &Action, observation: &Observation) {
        match (forwarded, observation) {
            (Action::Search { query, page }, _) => {
                let q = query.trim().to_owned();
                self.mark_seen(&q, *page);
                self.last_query = Some(q);
                if let Observation::SearchResults { candidates, .. } = observation {
                    for c in candidates {
                        let id = normalize_id(&c.artifact_id);
                        if !self.submitted_ids.contains(id)
                            && !self.candidate_buffer.iter().any(|b| b == id)
                        {
                            self.candidate_buffer.push(id.to_owned());
                        }
                    }
                }
            }
            (Action::Submit { ids }, _) => {
                for raw in ids {
                    self.submitted_ids.insert(normalize_id(raw).to_owned());
                }
                let submitted = &self.submitted_ids;
                self.candidate_buffer.retain(|b| !submitted.contains(b));
            }
            _ => {}
        }
    }
}

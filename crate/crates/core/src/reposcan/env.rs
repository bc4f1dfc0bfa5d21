use std::collections::BTreeMap;
use std::sync::Arc;

use super::search::Corpus;
use crate::action::{Action, Observation};
use crate::episode::Environment;
use crate::error::{Error, Result};
use crate::ledger::RunLedger;
use crate::task::Family;
use crate::verifier::{normalize_id, HiddenValidSet};

/// Serves search and submit actions over one corpus and hidden valid set.
pub struct RepoScanEnv {
    corpus: Arc<Corpus>,
    verifier: HiddenValidSet,
    page_size: usize,
}

impl RepoScanEnv {
    pub fn new<I, S>(corpus: Arc<Corpus>, valid_ids: I, page_size: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        RepoScanEnv {
            corpus,
            verifier: HiddenValidSet::new(valid_ids),
            page_size,
        }
    }
}

impl Environment for RepoScanEnv {
    fn family(&self) -> Family {
        Family::Reposcan
    }

    fn apply(&mut self, action: &Action, ledger: &mut RunLedger, target: u32) -> Result<Observation> {
        match action {
            Action::Search { query, page } => Ok(Observation::SearchResults {
                query: query.clone(),
                page: *page,
                candidates: self.corpus.search(query, *page, self.page_size),
            }),
            Action::Submit { ids } => {
                let ids: Vec<String> = ids.iter().map(|i| normalize_id(i).to_owned()).collect();
                let verdicts: BTreeMap<String, bool> = ids
                    .iter()
                    .map(|id| (id.clone(), self.verifier.is_member(id)))
                    .collect();
                let part = ledger.record_submission(&ids, &verdicts)?;
                self.verifier.judge_ids(&ids);
                debug_assert_eq!(self.verifier.accepted_count() as u64, ledger.valid_count());
                Ok(Observation::SubmitFeedback {
                    accepted: part.accepted,
                    rejected: part.rejected,
                    duplicates: part.duplicates,
                    valid_count: ledger.valid_count(),
                    remaining: ledger.remaining(target),
                })
            }
            other => Err(Error::Config(format!(
                "action {} is not served by the retrieval environment",
                other.to_line()
            ))),
        }
    }

    fn verified_count(&self) -> u64 {
        self.verifier.accepted_count() as u64
    }
}

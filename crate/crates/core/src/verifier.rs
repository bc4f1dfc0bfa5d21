//! Hidden verifier state. Membership can be queried id by id but is never
//! enumerated outward.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Identifiers compare by exact string equality after trimming.
pub fn normalize_id(id: &str) -> &str {
    id.trim()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdVerdict {
    AcceptNew,
    Duplicate,
    Reject,
}

/// Accepted and previously submitted ids, shared by both verifier kinds.
#[derive(Debug, Clone, Default)]
pub struct Acceptance {
    accepted: BTreeSet<String>,
    submitted: BTreeSet<String>,
}

impl Acceptance {
    /// Judges a batch left to right. `is_valid` is the membership oracle at
    /// the time of judging.
    pub fn judge<F>(&mut self, ids: &[String], mut is_valid: F) -> Vec<(String, IdVerdict)>
    where
        F: FnMut(&str) -> bool,
    {
        ids.iter()
            .map(|raw| {
                let id = normalize_id(raw).to_owned();
                let verdict = if self.accepted.contains(&id) {
                    IdVerdict::Duplicate
                } else if is_valid(&id) {
                    self.accepted.insert(id.clone());
                    IdVerdict::AcceptNew
                } else if self.submitted.contains(&id) {
                    IdVerdict::Duplicate
                } else {
                    IdVerdict::Reject
                };
                self.submitted.insert(id.clone());
                (id, verdict)
            })
            .collect()
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_accepted(&self, id: &str) -> bool {
        self.accepted.contains(normalize_id(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusSnapshot {
    pub valid_count: u64,
    pub target_count: u32,
    pub remaining: u64,
}

impl StatusSnapshot {
    pub fn new(valid_count: u64, target_count: u32) -> Self {
        StatusSnapshot {
            valid_count,
            target_count,
            remaining: (target_count as u64).saturating_sub(valid_count),
        }
    }
}

/// Static hidden valid set used by artifact retrieval tasks.
#[derive(Debug, Clone)]
pub struct HiddenValidSet {
    members: BTreeSet<String>,
    acceptance: Acceptance,
}

impl HiddenValidSet {
    pub fn new<I, S>(members: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        HiddenValidSet {
            members: members
                .into_iter()
                .map(|m| normalize_id(m.as_ref()).to_owned())
                .collect(),
            acceptance: Acceptance::default(),
        }
    }

    pub fn judge_ids(&mut self, ids: &[String]) -> Vec<(String, IdVerdict)> {
        let members = &self.members;
        self.acceptance.judge(ids, |id| members.contains(id))
    }

    /// Membership of a single id the caller already holds.
    pub fn is_member(&self, id: &str) -> bool {
        self.members.contains(normalize_id(id))
    }

    pub fn accepted_count(&self) -> usize {
        self.acceptance.accepted_count()
    }

    pub fn snapshot(&self, target_count: u32) -> StatusSnapshot {
        StatusSnapshot::new(self.accepted_count() as u64, target_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn accept_and_reject() {
        let mut v = HiddenValidSet::new(["x"]);
        let out = v.judge_ids(&ids(&["x", "y"]));
        assert_eq!(
            out,
            vec![
                ("x".into(), IdVerdict::AcceptNew),
                ("y".into(), IdVerdict::Reject)
            ]
        );
    }

    #[test]
    fn acceptance_is_idempotent() {
        let mut v = HiddenValidSet::new(["x"]);
        v.judge_ids(&ids(&["x"]));
        let out = v.judge_ids(&ids(&["x"]));
        assert_eq!(out, vec![("x".into(), IdVerdict::Duplicate)]);
        assert_eq!(v.accepted_count(), 1);
    }

    #[test]
    fn within_batch_repeat() {
        let mut v = HiddenValidSet::new(["x"]);
        let out = v.judge_ids(&ids(&["x", "x"]));
        assert_eq!(out[0].1, IdVerdict::AcceptNew);
        assert_eq!(out[1].1, IdVerdict::Duplicate);
    }

    #[test]
    fn resubmitted_reject_is_duplicate() {
        let mut v = HiddenValidSet::new(["x"]);
        v.judge_ids(&ids(&["y"]));
        assert_eq!(v.judge_ids(&ids(&["y"]))[0].1, IdVerdict::Duplicate);
    }

    #[test]
    fn ids_are_trimmed_not_case_folded() {
        let mut v = HiddenValidSet::new(["src/a.py#source"]);
        let out = v.judge_ids(&ids(&["  src/a.py#source\n", "SRC/a.py#source"]));
        assert_eq!(out[0].1, IdVerdict::AcceptNew);
        assert_eq!(out[1].1, IdVerdict::Reject);
    }

    #[test]
    fn snapshot_remaining() {
        assert_eq!(StatusSnapshot::new(38, 50).remaining, 12);
        assert_eq!(StatusSnapshot::new(0, 10).remaining, 10);
        assert_eq!(StatusSnapshot::new(12, 10).remaining, 0);
    }

    proptest! {
        #[test]
        fn permutation_invariance(batch in proptest::collection::vec(0u8..12, 0..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let members: Vec<String> = (0..6).map(|i| format!("id{i}")).collect();
            let batch: Vec<String> = batch.iter().map(|i| format!("id{i}")).collect();
            let mut shuffled = batch.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));

            let mut a = HiddenValidSet::new(&members);
            let mut b = HiddenValidSet::new(&members);
            let va = a.judge_ids(&batch);
            let vb = b.judge_ids(&shuffled);
            let acc = |v: &[(String, IdVerdict)]| -> BTreeSet<String> {
                v.iter().filter(|(_, x)| *x == IdVerdict::AcceptNew).map(|(id, _)| id.clone()).collect()
            };
            prop_assert_eq!(acc(&va), acc(&vb));
            prop_assert_eq!(a.accepted_count(), b.accepted_count());
            // Leak-freedom: verdicts only name ids from the input.
            for (id, _) in va.iter() {
                prop_assert!(batch.contains(id));
            }
        }
    }
}

use std::collections::BTreeSet;

use super::index::ArtifactRecord;
use crate::action::Candidate;

pub const PAGE_SIZE: usize = 10;

/// An indexed snapshot with lowercased search haystacks (`artifact_id` plus
/// text).
#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<ArtifactRecord>,
    haystacks: Vec<String>,
}

impl Corpus {
    pub fn new(records: Vec<ArtifactRecord>) -> Self {
        let haystacks = records
            .iter()
            .map(|r| format!("{}\n{}", r.artifact_id, r.text).to_lowercase())
            .collect();
        Corpus { records, haystacks }
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ranks artifacts by how many distinct query tokens they contain, ties
    /// broken by ascending id, and returns one page. Zero-score artifacts are
    /// never returned.
    pub fn search(&self, query: &str, page: u32, page_size: usize) -> Vec<Candidate> {
        let tokens: BTreeSet<String> = query.split_whitespace().map(str::to_lowercase).collect();
        if tokens.is_empty() || page_size == 0 {
            return Vec::new();
        }
        let mut scored: Vec<(usize, &ArtifactRecord)> = self
            .records
            .iter()
            .zip(&self.haystacks)
            .filter_map(|(rec, hay)| {
                let score = tokens.iter().filter(|t| hay.contains(t.as_str())).count();
                (score > 0).then_some((score, rec))
            })
            .collect();
        scored.sort_by(|(sa, ra), (sb, rb)| sb.cmp(sa).then_with(|| ra.artifact_id.cmp(&rb.artifact_id)));
        scored
            .into_iter()
            .skip(page as usize * page_size)
            .take(page_size)
            .map(|(_, rec)| Candidate {
                artifact_id: rec.artifact_id.clone(),
                preview: rec.preview.clone(),
            })
            .collect()
    }
}

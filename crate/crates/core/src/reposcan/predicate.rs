use regex::Regex;
use serde::{Deserialize, Serialize};

use super::index::{ArtifactKind, ArtifactRecord};
use crate::error::{Error, Result};

/// Hidden-set membership rule. Keyword and content matches are
/// case-insensitive substring tests over the artifact text; path matches are
/// exact substring tests over the relpath.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predicate {
    KeywordOrPattern {
        keywords: Vec<String>,
        patterns: Vec<String>,
    },
    PathAndContent {
        path_substring: String,
        content_substring: String,
    },
    TestOrDocumentation {
        kinds: Vec<ArtifactKind>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateFamily {
    KeywordOrPattern,
    PathAndContent,
    TestOrDocumentation,
}

impl PredicateFamily {
    pub const ALL: [PredicateFamily; 3] = [
        PredicateFamily::KeywordOrPattern,
        PredicateFamily::PathAndContent,
        PredicateFamily::TestOrDocumentation,
    ];
}

impl Predicate {
    pub fn family(&self) -> PredicateFamily {
        match self {
            Predicate::KeywordOrPattern { .. } => PredicateFamily::KeywordOrPattern,
            Predicate::PathAndContent { .. } => PredicateFamily::PathAndContent,
            Predicate::TestOrDocumentation { .. } => PredicateFamily::TestOrDocumentation,
        }
    }

    pub fn compile(&self) -> Result<CompiledPredicate> {
        let patterns = match self {
            Predicate::KeywordOrPattern { patterns, .. } => patterns
                .iter()
                .map(|p| {
                    Regex::new(p).map_err(|source| Error::Pattern {
                        pattern: p.clone(),
                        source,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        Ok(CompiledPredicate {
            predicate: self.clone(),
            patterns,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CompiledPredicate {
    predicate: Predicate,
    patterns: Vec<Regex>,
}

impl CompiledPredicate {
    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn matches(&self, artifact: &ArtifactRecord) -> bool {
        match &self.predicate {
            Predicate::KeywordOrPattern { keywords, .. } => {
                let lower = artifact.text.to_lowercase();
                keywords.iter().any(|k| lower.contains(&k.to_lowercase()))
                    || self.patterns.iter().any(|re| re.is_match(&artifact.text))
            }
            Predicate::PathAndContent {
                path_substring,
                content_substring,
            } => {
                artifact.relpath.contains(path_substring.as_str())
                    && artifact
                        .text
                        .to_lowercase()
                        .contains(&content_substring.to_lowercase())
            }
            Predicate::TestOrDocumentation { kinds } => kinds.contains(&artifact.kind),
        }
    }
}

pub fn evaluate_predicate(artifact: &ArtifactRecord, predicate: &CompiledPredicate) -> bool {
    predicate.matches(artifact)
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::checker::CheckerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    CsvFieldCheck,
    CsvCountCheck,
    MetadataRepair,
    ConsistencyAnswer,
    ArtifactValidation,
}

impl UnitKind {
    pub const ALL: [UnitKind; 5] = [
        UnitKind::CsvFieldCheck,
        UnitKind::CsvCountCheck,
        UnitKind::MetadataRepair,
        UnitKind::ConsistencyAnswer,
        UnitKind::ArtifactValidation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::CsvFieldCheck => "csv_field_check",
            UnitKind::CsvCountCheck => "csv_count_check",
            UnitKind::MetadataRepair => "metadata_repair",
            UnitKind::ConsistencyAnswer => "consistency_answer",
            UnitKind::ArtifactValidation => "artifact_validation",
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unit lifecycle: `pending -> attempted -> passed`. `Passed` is absorbing
/// and is reached only through checker acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitStatus {
    Pending,
    Attempted,
    Passed,
}

impl UnitStatus {
    pub fn attempted(self) -> Self {
        match self {
            UnitStatus::Passed => UnitStatus::Passed,
            _ => UnitStatus::Attempted,
        }
    }

    pub fn is_open(self) -> bool {
        self != UnitStatus::Passed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacklogUnit {
    pub unit_id: String,
    pub kind: UnitKind,
    pub prompt: String,
    pub artifact_path: String,
    pub checker: CheckerSpec,
}

impl BacklogUnit {
    pub fn public(&self) -> crate::task::PublicUnit {
        crate::task::PublicUnit {
            unit_id: self.unit_id.clone(),
            kind: self.kind,
            prompt: self.prompt.clone(),
            artifact_path: self.artifact_path.clone(),
        }
    }
}

//! Checker-backed work-unit backlogs and the environment that serves them.

mod backlog;
mod checker;
mod env;
mod sources;
mod unit;
mod workspace;

pub use backlog::{
    check_solvable, dataops_objective, extra_units, generate_backlog, generate_manifest, Backlog,
    BacklogConfig, DataOpsHidden, DataOpsManifest, DataOpsMetadata, DataOpsTask, SCRATCH_PREFIX,
};
pub use checker::{
    answer_path, evaluate, normalize_answer, parse_metadata, sha256_hex, CheckResult, CheckerSpec,
    CsvTable, EditOp,
};
pub use env::{excerpt_of, inspection_detail, DataOpsEnv, MAX_EXCERPT_CHARS};
pub use sources::{DataSources, MAX_ARTIFACT_BYTES};
pub use unit::{BacklogUnit, UnitKind, UnitStatus};
pub use workspace::{EditRecord, Workspace, WORKSPACE_ROOT_VAR};

//! Artifact-retrieval tasks over local repository snapshots.

mod env;
mod index;
mod manifest;
mod predicate;
mod search;

pub use env::RepoScanEnv;
pub use index::{
    index_snapshot, kind_for_path, snapshot_digest, ArtifactKind, ArtifactRecord,
    MAX_INDEXED_BYTES, PREVIEW_CHARS,
};
pub use manifest::{
    generate_manifest, load_snapshot, objective_for, token_frequencies, GenerationConfig,
    RepoScanHidden, RepoScanManifest, RepoScanMetadata, RepoScanTask, SnapshotInfo,
    SnapshotSource,
};
pub use predicate::{evaluate_predicate, CompiledPredicate, Predicate, PredicateFamily};
pub use search::{Corpus, PAGE_SIZE};

//! Evaluation engine for count-goal agent tasks over repository snapshots and
//! checker-backed backlogs.
//!
//! A run is a loop over [`episode::run_episode`]: a [`policy::Policy`]
//! proposes an [`action::Action`], a [`controller::Controller`] forwards,
//! rewrites or blocks it, and an [`episode::Environment`] answers with an
//! [`action::Observation`] while the [`ledger::RunLedger`] keeps the
//! submission multiset and the verified count.

pub mod action;
pub mod controller;
pub mod dataops;
pub mod episode;
mod error;
pub mod fixtures;
pub mod ledger;
pub mod metrics;
pub mod policy;
pub mod reposcan;
pub mod runner;
pub mod seed;
pub mod task;
pub mod verifier;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/backlogs.md")]
    mod backlogs {}
    #[doc = include_str!("../../../book/src/controllers.md")]
    mod controllers {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Deterministic simulator and verification harness for wait-free vertex
//! coloring in the asynchronous shared-register model.
//!
//! - [`model`]: rings, bounded-degree graphs and identifier assignments.
//! - [`cointoss`]: the Cole–Vishkin style identifier reduction.
//! - [`protocols`]: the four coloring protocols as pure transition functions.
//! - [`engine`]: write-all / read-all / transition step semantics and traces.
//! - [`schedulers`]: schedule generators, worst-case search, exhaustive checks.
//! - [`analysis`]: audits over traces.
//! - [`cli`]: the `wfc` command-line harness.

pub mod analysis;
pub mod cli;
pub mod cointoss;
pub mod engine;
pub mod model;
pub mod protocols;
pub mod schedulers;

pub use engine::{Execution, StepRecord, Trace};
pub use model::{Graph, IdAssignment, IdKind, NodeId};
pub use protocols::{Color, Decision, Protocol, ProtocolState, RegisterRecord};
pub use schedulers::{Scheduler, SchedulerDescriptor};

/// Any error surfaced by the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Protocol(#[from] protocols::ProtocolError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Sched(#[from] schedulers::SchedError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    CoinToss(#[from] cointoss::CoinTossError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

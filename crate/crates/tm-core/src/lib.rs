//! Executable thinging-machine workbench: static models, behavior
//! graphs over events, deterministic token simulation, event-level
//! reconfiguration and the space-lattice motion experiment.
//!
//! The layers build on each other:
//!
//! - [`model`] — thimacs, the five generic stages, flows and triggers,
//!   with construction-time and whole-model validation.
//! - [`behavior`] — events as timed sub-diagrams and ordering graphs
//!   over them.
//! - [`sim`] — the token engine: seeded, deterministic, with
//!   state/progression semantics and per-case behavior gating.
//! - [`reconfig`] — switching between behavior graphs over an unchanged
//!   static model.
//! - [`zeno`] — the bouncing-arrow experiment on a lattice of space
//!   thimacs.

pub mod behavior;
pub mod model;
pub mod reconfig;
pub mod sim;
pub mod trace;
pub mod zeno;

pub use behavior::{BehaviorGraph, Event, EventId, OrderKind, OrderingEdge};
pub use model::{
    FlowEdge, Post, Stage, StageId, StageKind, StaticModel, Subdiagram, Thimac, ThimacId,
    TransferDir, TriggerEdge,
};
pub use sim::{init_sim, CaseId, ConfigId, Injection, Sim, SimError, ThingId};
pub use trace::{billing_total, Action, Mode, Money, Payload, PayloadValue, Trace, TraceRecord};

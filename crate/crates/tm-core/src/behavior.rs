//! The dynamic level: events and behavior graphs.
//!
//! An event is a region of the static model (a sub-diagram) given time
//! identity; a behavior graph orders events. Time is represented only as
//! ordering — there are no clocks or durations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{StageId, StaticModel, Subdiagram};

crate::model::string_id! {
    /// Label of an event, e.g. `E1` or `Billing`.
    EventId
}

/// A static sub-diagram merged with time identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub id: EventId,
    pub region: Subdiagram,
    pub description: String,
}

/// How one event orders another.
///
/// Activation treats every incoming edge as a conjunct: an event becomes
/// active once each in-edge is satisfied. Sequence, split and join edges
/// are satisfied when their source completes; a choice edge additionally
/// requires its branch to have been selected, and branches of one source
/// are mutually exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderKind {
    Sequence,
    ParallelSplit,
    ParallelJoin,
    Choice,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderingEdge {
    pub from: EventId,
    pub to: EventId,
    pub kind: OrderKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BehaviorError {
    #[error("event `{0}` already defined")]
    DuplicateEvent(EventId),
    #[error("event `{0}` has an empty region")]
    EmptyRegion(EventId),
    #[error("unknown stage `{0}` in event region")]
    UnknownStage(StageId),
    #[error("ordering edge endpoint `{0}` is not a defined event")]
    UnknownEndpoint(EventId),
    #[error("event `{0}` is not reachable from any initial event")]
    UnreachableEvent(EventId),
    #[error("initial event `{0}` is not defined")]
    UnknownInitial(EventId),
}

/// A validated graph of events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorGraph {
    events: BTreeMap<EventId, Event>,
    edges: Vec<OrderingEdge>,
    initial: BTreeSet<EventId>,
}

impl BehaviorGraph {
    /// Graph with no events: every stage stays unconstrained.
    pub fn unconstrained() -> Self {
        BehaviorGraph {
            events: BTreeMap::new(),
            edges: Vec::new(),
            initial: BTreeSet::new(),
        }
    }

    pub fn builder(model: &StaticModel) -> BehaviorBuilder<'_> {
        BehaviorBuilder {
            model,
            events: BTreeMap::new(),
        }
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.events.values()
    }

    pub fn event(&self, id: &EventId) -> Option<&Event> {
        self.events.get(id)
    }

    pub fn event_ids(&self) -> BTreeSet<EventId> {
        self.events.keys().cloned().collect()
    }

    pub fn edges(&self) -> &[OrderingEdge] {
        &self.edges
    }

    pub fn initial(&self) -> &BTreeSet<EventId> {
        &self.initial
    }

    pub fn in_edges<'a>(&'a self, to: &'a EventId) -> impl Iterator<Item = &'a OrderingEdge> {
        self.edges.iter().filter(move |e| &e.to == to)
    }

    pub fn out_edges<'a>(&'a self, from: &'a EventId) -> impl Iterator<Item = &'a OrderingEdge> {
        self.edges.iter().filter(move |e| &e.from == from)
    }

    /// Events whose region contains `stage`.
    pub fn covering<'a>(&'a self, stage: &'a StageId) -> impl Iterator<Item = &'a Event> {
        self.events
            .values()
            .filter(move |e| e.region.contains(stage))
    }

    /// Derive a new graph with additional ordering edges over the same
    /// event set.
    pub fn with_extra_edges(&self, extra: impl IntoIterator<Item = OrderingEdge>) -> Self {
        let mut g = self.clone();
        g.edges.extend(extra);
        g
    }

    /// Rebuild from parts (e.g. deserialized JSON) and re-validate.
    pub fn from_parts(
        events: Vec<Event>,
        edges: Vec<OrderingEdge>,
        initial: Vec<EventId>,
    ) -> Result<Self, BehaviorError> {
        let mut map = BTreeMap::new();
        for ev in events {
            if ev.region.is_empty() {
                return Err(BehaviorError::EmptyRegion(ev.id.clone()));
            }
            if map.insert(ev.id.clone(), ev.clone()).is_some() {
                return Err(BehaviorError::DuplicateEvent(ev.id));
            }
        }
        build_graph(map, edges, initial)
    }
}

fn build_graph(
    events: BTreeMap<EventId, Event>,
    edges: Vec<OrderingEdge>,
    initial: Vec<EventId>,
) -> Result<BehaviorGraph, BehaviorError> {
    for edge in &edges {
        for end in [&edge.from, &edge.to] {
            if !events.contains_key(end) {
                return Err(BehaviorError::UnknownEndpoint(end.clone()));
            }
        }
    }
    let mut init = BTreeSet::new();
    for id in initial {
        if !events.contains_key(&id) {
            return Err(BehaviorError::UnknownInitial(id));
        }
        init.insert(id);
    }
    // every non-initial event must be reachable from an initial one
    let mut reached: BTreeSet<EventId> = init.clone();
    let mut queue: VecDeque<EventId> = init.iter().cloned().collect();
    while let Some(cur) = queue.pop_front() {
        for edge in edges.iter().filter(|e| e.from == cur) {
            if reached.insert(edge.to.clone()) {
                queue.push_back(edge.to.clone());
            }
        }
    }
    if let Some(unreached) = events.keys().find(|id| !reached.contains(id)) {
        return Err(BehaviorError::UnreachableEvent(unreached.clone()));
    }
    Ok(BehaviorGraph {
        events,
        edges,
        initial: init,
    })
}

/// Accumulates event definitions against one model, then assembles a
/// validated graph.
pub struct BehaviorBuilder<'m> {
    model: &'m StaticModel,
    events: BTreeMap<EventId, Event>,
}

impl BehaviorBuilder<'_> {
    /// Define an event whose region is the induced sub-diagram over the
    /// given stages.
    pub fn define_event<'a>(
        &mut self,
        id: impl Into<EventId>,
        stages: impl IntoIterator<Item = &'a StageId>,
        description: impl Into<String>,
    ) -> Result<EventId, BehaviorError> {
        let id = id.into();
        if self.events.contains_key(&id) {
            return Err(BehaviorError::DuplicateEvent(id));
        }
        let region = self.model.extract_region(stages).map_err(|e| match e {
            crate::model::ModelError::UnknownStage(s) => BehaviorError::UnknownStage(s),
            other => panic!("unexpected extract_region error: {other}"),
        })?;
        if region.is_empty() {
            return Err(BehaviorError::EmptyRegion(id));
        }
        self.events.insert(
            id.clone(),
            Event {
                id: id.clone(),
                region,
                description: description.into(),
            },
        );
        Ok(id)
    }

    /// Convenience: an event covering every stage of one thimac.
    pub fn define_thimac_event(
        &mut self,
        id: impl Into<EventId>,
        thimac: &crate::model::ThimacId,
        description: impl Into<String>,
    ) -> Result<EventId, BehaviorError> {
        let stages: Vec<StageId> = self
            .model
            .thimac(thimac)
            .map(|t| t.stages.iter().cloned().collect())
            .unwrap_or_default();
        self.define_event(id, stages.iter(), description)
    }

    pub fn build(
        self,
        edges: Vec<OrderingEdge>,
        initial: Vec<EventId>,
    ) -> Result<BehaviorGraph, BehaviorError> {
        build_graph(self.events, edges, initial)
    }
}

/// Kinds of findings produced by [`validate_behavior`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorFinding {
    /// An event region references a stage missing from the model, or its
    /// region edges are not the model-induced ones.
    RegionForeign,
    /// A sequence edge joins regions with no static flow/trigger path;
    /// the ordering is imposed by a control system, not by data flow.
    ControlImposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BehaviorViolation {
    pub finding: BehaviorFinding,
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BehaviorReport {
    pub violations: Vec<BehaviorViolation>,
}

impl BehaviorReport {
    /// True when the report carries no errors (warnings allowed).
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.violations
            .iter()
            .any(|v| v.severity == Severity::Error)
    }
}

/// Check a behavior graph against the model it claims to describe.
///
/// Region containment failures are errors. Sequence edges between
/// statically unconnected regions are reported as `ControlImposed`
/// warnings: reconfiguration deliberately imposes such order.
pub fn validate_behavior(model: &StaticModel, graph: &BehaviorGraph) -> BehaviorReport {
    let mut report = BehaviorReport::default();
    for event in graph.events() {
        for stage in &event.region.stages {
            if model.stage(stage).is_none() {
                report.violations.push(BehaviorViolation {
                    finding: BehaviorFinding::RegionForeign,
                    severity: Severity::Error,
                    subject: event.id.to_string(),
                    message: format!(
                        "event `{}` region references `{stage}` which is not in model `{}`",
                        event.id, model.name
                    ),
                });
            }
        }
    }
    if report.has_errors() {
        return report;
    }
    // static adjacency over flows and triggers
    let mut next: BTreeMap<&StageId, Vec<&StageId>> = BTreeMap::new();
    for f in model.flows() {
        next.entry(&f.from).or_default().push(&f.to);
    }
    for t in model.triggers() {
        next.entry(&t.from).or_default().push(&t.to);
    }
    for edge in graph.edges() {
        if edge.kind != OrderKind::Sequence {
            continue;
        }
        let (Some(from), Some(to)) = (graph.event(&edge.from), graph.event(&edge.to)) else {
            continue;
        };
        let mut seen: BTreeSet<&StageId> = from.region.stages.iter().collect();
        let mut queue: VecDeque<&StageId> = seen.iter().copied().collect();
        let mut connected = false;
        'search: while let Some(cur) = queue.pop_front() {
            for succ in next.get(cur).into_iter().flatten() {
                if to.region.contains(succ) {
                    connected = true;
                    break 'search;
                }
                if seen.insert(succ) {
                    queue.push_back(succ);
                }
            }
        }
        if !connected {
            report.violations.push(BehaviorViolation {
                finding: BehaviorFinding::ControlImposed,
                severity: Severity::Warning,
                subject: format!("{}->{}", edge.from, edge.to),
                message: format!(
                    "sequence {} -> {} has no static flow/trigger path behind it",
                    edge.from, edge.to
                ),
            });
        }
    }
    report
}

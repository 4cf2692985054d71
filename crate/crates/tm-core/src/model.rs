//! Static thinging-machine models.
//!
//! A static model is the timeless description of a system: thimacs
//! (thing/machine units), the five generic stages each thimac may carry,
//! solid flow edges that move things between stages and dashed trigger
//! edges that start activity in another machine. The model stores no
//! clocks, step counters or token state; those live in [`crate::sim`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Direction of a transfer port. Transfer is a single stage kind; a thimac
/// may carry one inbound and one outbound port of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferDir {
    In,
    Out,
}

/// The five generic action kinds. There is no sixth: the arrive/accept
/// split is a view on `Receive`, and the in/out ports are views on
/// `Transfer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageKind {
    Create,
    Process,
    Release,
    Transfer(TransferDir),
    Receive,
}

/// Post classification of a stage: interior posts are where things can
/// rest (states with queues); boundary posts are pure progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Post {
    Interior,
    Boundary,
}

impl StageKind {
    /// Stable token used in identifiers, the DSL and JSON.
    pub fn token(&self) -> &'static str {
        match self {
            StageKind::Create => "create",
            StageKind::Process => "process",
            StageKind::Release => "release",
            StageKind::Transfer(TransferDir::In) => "transfer_in",
            StageKind::Transfer(TransferDir::Out) => "transfer_out",
            StageKind::Receive => "receive",
        }
    }

    pub fn from_token(token: &str) -> Option<StageKind> {
        Some(match token {
            "create" => StageKind::Create,
            "process" => StageKind::Process,
            "release" => StageKind::Release,
            "transfer_in" => StageKind::Transfer(TransferDir::In),
            "transfer_out" => StageKind::Transfer(TransferDir::Out),
            "receive" => StageKind::Receive,
            _ => return None,
        })
    }

    /// Post of the stage's resting view. Receive counts as interior: its
    /// accept sub-post is where an admitted thing comes to rest. The
    /// arrive sub-post is exposed via [`StageKind::arrival_post`].
    pub fn post(&self) -> Post {
        match self {
            StageKind::Create | StageKind::Process | StageKind::Receive => Post::Interior,
            StageKind::Release | StageKind::Transfer(_) => Post::Boundary,
        }
    }

    /// Post of the face a moving thing first touches. Only Receive
    /// differs from [`StageKind::post`]: things arrive at its boundary.
    pub fn arrival_post(&self) -> Post {
        match self {
            StageKind::Receive => Post::Boundary,
            _ => self.post(),
        }
    }

    pub fn is_transfer(&self) -> bool {
        matches!(self, StageKind::Transfer(_))
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl Serialize for StageKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for StageKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let tok = String::deserialize(d)?;
        StageKind::from_token(&tok)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown stage kind `{tok}`")))
    }
}

macro_rules! string_id {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug,
            Clone,
            PartialEq,
            Eq,
            PartialOrd,
            Ord,
            Hash,
            ::serde::Serialize,
            ::serde::Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

pub(crate) use string_id;

string_id! {
    /// Dotted path of thimac names from the root, e.g. `Order.Form`.
    ThimacId
}
string_id! {
    /// Thimac path plus stage token, e.g. `Order.Form.create`.
    StageId
}

/// Identifier of a flow edge, written `from->to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId(pub StageId, pub StageId);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.0, self.1)
    }
}

/// Identifier of a trigger edge, written `from~>to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriggerId(pub StageId, pub StageId);

impl fmt::Display for TriggerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}~>{}", self.0, self.1)
    }
}

/// One of the five generic stages, owned by a thimac.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub id: StageId,
    pub owner: ThimacId,
    pub kind: StageKind,
}

impl Stage {
    /// Post classification, derived from the kind; never stored.
    pub fn post(&self) -> Post {
        self.kind.post()
    }
}

/// A thing/machine unit. Nesting is namespacing only: the id of a child
/// is the parent id plus the child's name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thimac {
    pub id: ThimacId,
    pub name: String,
    pub parent: Option<ThimacId>,
    pub stages: BTreeSet<StageId>,
}

/// Solid arrow: a thing flows from one stage to another.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: StageId,
    pub to: StageId,
}

/// Dashed arrow: activity at `from` initiates a flow in another machine.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriggerEdge {
    pub from: StageId,
    pub to: StageId,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown parent thimac `{0}`")]
    UnknownParent(ThimacId),
    #[error("thimac name `{name}` already used under `{parent}`")]
    DuplicateName { parent: String, name: String },
    #[error("invalid thimac name `{0}`: names are non-empty and dot-free")]
    InvalidName(String),
    #[error("unknown thimac `{0}`")]
    UnknownThimac(ThimacId),
    #[error("thimac `{thimac}` already has a {kind} stage")]
    DuplicateStageKind { thimac: ThimacId, kind: StageKind },
    #[error("unknown stage `{0}`")]
    UnknownStage(StageId),
    #[error("illegal flow {from_kind} -> {to_kind} ({locality}): not a row of the legality table")]
    IllegalFlow {
        from_kind: StageKind,
        to_kind: StageKind,
        locality: Locality,
    },
    #[error("flow {0} already present")]
    DuplicateFlow(FlowId),
    #[error("trigger {0}->{1} stays inside one thimac; triggers cross machines")]
    SameThimacTrigger(StageId, StageId),
    #[error("trigger {0} already present")]
    DuplicateTrigger(TriggerId),
}

/// Whether both endpoints of an edge belong to one thimac.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locality {
    SameThimac,
    CrossThimac,
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locality::SameThimac => f.write_str("same thimac"),
            Locality::CrossThimac => f.write_str("cross thimac"),
        }
    }
}

/// The flow legality table. Intra-thimac rows cover every flow drawn or
/// described for a single machine; the only legal inter-machine flow is
/// the transfer handshake.
pub fn flow_legal(from: StageKind, to: StageKind, locality: Locality) -> bool {
    use StageKind::*;
    use TransferDir::*;
    match locality {
        Locality::SameThimac => matches!(
            (from, to),
            (Create, Process)
                | (Create, Release)
                | (Receive, Process)
                | (Receive, Release)
                | (Process, Release)
                | (Process, Create)
                | (Transfer(In), Receive)
                | (Release, Transfer(Out))
        ),
        Locality::CrossThimac => matches!((from, to), (Transfer(Out), Transfer(In))),
    }
}

/// Kinds of findings produced by [`StaticModel::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnresolvedEndpoint,
    IllegalFlow,
    SameThimacTrigger,
    DuplicateStageKind,
    UnknownOwner,
    MalformedStageId,
    UnresolvedParent,
    MalformedThimacId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Id of the offending stage or edge.
    pub subject: String,
    pub message: String,
}

/// Result of validating a model: violations are data, not failures.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, subject: impl ToString, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            subject: subject.to_string(),
            message: message.into(),
        });
    }
}

/// An induced sub-model: a stage set plus every model edge with both
/// endpoints in the set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subdiagram {
    pub stages: BTreeSet<StageId>,
    pub flows: BTreeSet<FlowEdge>,
    pub triggers: BTreeSet<TriggerEdge>,
}

impl Subdiagram {
    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn contains(&self, stage: &StageId) -> bool {
        self.stages.contains(stage)
    }
}

/// The grand static thimac: thimacs, stages, flows and triggers.
///
/// Construction is single-threaded; once validated the model is treated
/// as immutable and may be shared freely by reference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StaticModel {
    pub name: String,
    thimacs: BTreeMap<ThimacId, Thimac>,
    stages: BTreeMap<StageId, Stage>,
    flows: BTreeSet<FlowEdge>,
    triggers: BTreeSet<TriggerEdge>,
}

impl StaticModel {
    pub fn new(name: impl Into<String>) -> Self {
        StaticModel {
            name: name.into(),
            ..StaticModel::default()
        }
    }

    pub fn thimacs(&self) -> impl Iterator<Item = &Thimac> {
        self.thimacs.values()
    }

    pub fn stages(&self) -> impl Iterator<Item = &Stage> {
        self.stages.values()
    }

    pub fn flows(&self) -> impl Iterator<Item = &FlowEdge> {
        self.flows.iter()
    }

    pub fn triggers(&self) -> impl Iterator<Item = &TriggerEdge> {
        self.triggers.iter()
    }

    pub fn thimac(&self, id: &ThimacId) -> Option<&Thimac> {
        self.thimacs.get(id)
    }

    pub fn stage(&self, id: &StageId) -> Option<&Stage> {
        self.stages.get(id)
    }

    pub fn thimac_count(&self) -> usize {
        self.thimacs.len()
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn trigger_count(&self) -> usize {
        self.triggers.len()
    }

    /// Flows leaving `stage`, in target order.
    pub fn flows_from<'a>(&'a self, stage: &'a StageId) -> impl Iterator<Item = &'a FlowEdge> {
        self.flows.iter().filter(move |f| &f.from == stage)
    }

    /// Triggers leaving `stage`, in target order.
    pub fn triggers_from<'a>(
        &'a self,
        stage: &'a StageId,
    ) -> impl Iterator<Item = &'a TriggerEdge> {
        self.triggers.iter().filter(move |t| &t.from == stage)
    }

    /// Stage of `kind` inside `thimac`, if declared.
    pub fn stage_of(&self, thimac: &ThimacId, kind: StageKind) -> Option<&Stage> {
        let id = StageId::new(format!("{thimac}.{}", kind.token()));
        self.stages.get(&id)
    }

    pub fn add_thimac(
        &mut self,
        name: &str,
        parent: Option<&ThimacId>,
    ) -> Result<ThimacId, ModelError> {
        if name.is_empty() || name.contains('.') {
            return Err(ModelError::InvalidName(name.to_owned()));
        }
        let id = match parent {
            Some(p) => {
                if !self.thimacs.contains_key(p) {
                    return Err(ModelError::UnknownParent(p.clone()));
                }
                ThimacId::new(format!("{p}.{name}"))
            }
            None => ThimacId::new(name),
        };
        if self.thimacs.contains_key(&id) {
            return Err(ModelError::DuplicateName {
                parent: parent.map(|p| p.to_string()).unwrap_or_default(),
                name: name.to_owned(),
            });
        }
        self.thimacs.insert(
            id.clone(),
            Thimac {
                id: id.clone(),
                name: name.to_owned(),
                parent: parent.cloned(),
                stages: BTreeSet::new(),
            },
        );
        Ok(id)
    }

    pub fn add_stage(&mut self, thimac: &ThimacId, kind: StageKind) -> Result<StageId, ModelError> {
        if !self.thimacs.contains_key(thimac) {
            return Err(ModelError::UnknownThimac(thimac.clone()));
        }
        let id = StageId::new(format!("{thimac}.{}", kind.token()));
        if self.stages.contains_key(&id) {
            return Err(ModelError::DuplicateStageKind {
                thimac: thimac.clone(),
                kind,
            });
        }
        self.stages.insert(
            id.clone(),
            Stage {
                id: id.clone(),
                owner: thimac.clone(),
                kind,
            },
        );
        self.thimacs
            .get_mut(thimac)
            .expect("owner checked above")
            .stages
            .insert(id.clone());
        Ok(id)
    }

    fn locality(&self, from: &Stage, to: &Stage) -> Locality {
        if from.owner == to.owner {
            Locality::SameThimac
        } else {
            Locality::CrossThimac
        }
    }

    pub fn add_flow(&mut self, from: &StageId, to: &StageId) -> Result<FlowId, ModelError> {
        let f = self
            .stages
            .get(from)
            .ok_or_else(|| ModelError::UnknownStage(from.clone()))?;
        let t = self
            .stages
            .get(to)
            .ok_or_else(|| ModelError::UnknownStage(to.clone()))?;
        let locality = self.locality(f, t);
        if !flow_legal(f.kind, t.kind, locality) {
            return Err(ModelError::IllegalFlow {
                from_kind: f.kind,
                to_kind: t.kind,
                locality,
            });
        }
        let edge = FlowEdge {
            from: from.clone(),
            to: to.clone(),
        };
        if !self.flows.insert(edge) {
            return Err(ModelError::DuplicateFlow(FlowId(from.clone(), to.clone())));
        }
        Ok(FlowId(from.clone(), to.clone()))
    }

    pub fn add_trigger(&mut self, from: &StageId, to: &StageId) -> Result<TriggerId, ModelError> {
        let f = self
            .stages
            .get(from)
            .ok_or_else(|| ModelError::UnknownStage(from.clone()))?;
        let t = self
            .stages
            .get(to)
            .ok_or_else(|| ModelError::UnknownStage(to.clone()))?;
        if f.owner == t.owner {
            return Err(ModelError::SameThimacTrigger(from.clone(), to.clone()));
        }
        let edge = TriggerEdge {
            from: from.clone(),
            to: to.clone(),
        };
        if !self.triggers.insert(edge) {
            return Err(ModelError::DuplicateTrigger(TriggerId(
                from.clone(),
                to.clone(),
            )));
        }
        Ok(TriggerId(from.clone(), to.clone()))
    }

    /// Check every structural invariant. Construction through the `add_*`
    /// methods cannot violate them, but models rebuilt from JSON can, so
    /// everything is re-checked here. Pure: two consecutive calls return
    /// identical reports.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for thimac in self.thimacs.values() {
            match &thimac.parent {
                Some(p) if !self.thimacs.contains_key(p) => {
                    report.push(
                        ViolationKind::UnresolvedParent,
                        &thimac.id,
                        format!("parent `{p}` of `{}` does not exist", thimac.id),
                    );
                }
                Some(p) => {
                    let expected = format!("{p}.{}", thimac.name);
                    if thimac.id.as_str() != expected {
                        report.push(
                            ViolationKind::MalformedThimacId,
                            &thimac.id,
                            format!("id `{}` does not match parent path `{expected}`", thimac.id),
                        );
                    }
                }
                None => {
                    if thimac.id.as_str() != thimac.name {
                        report.push(
                            ViolationKind::MalformedThimacId,
                            &thimac.id,
                            format!("root thimac id `{}` must equal its name", thimac.id),
                        );
                    }
                }
            }
            let mut seen = BTreeSet::new();
            for sid in &thimac.stages {
                match self.stages.get(sid) {
                    None => report.push(
                        ViolationKind::UnresolvedEndpoint,
                        sid,
                        format!("thimac `{}` lists missing stage `{sid}`", thimac.id),
                    ),
                    Some(stage) => {
                        if !seen.insert(stage.kind) {
                            report.push(
                                ViolationKind::DuplicateStageKind,
                                sid,
                                format!("thimac `{}` has two {} stages", thimac.id, stage.kind),
                            );
                        }
                    }
                }
            }
        }
        for stage in self.stages.values() {
            if !self.thimacs.contains_key(&stage.owner) {
                report.push(
                    ViolationKind::UnknownOwner,
                    &stage.id,
                    format!(
                        "stage `{}` owned by missing thimac `{}`",
                        stage.id, stage.owner
                    ),
                );
                continue;
            }
            let expected = format!("{}.{}", stage.owner, stage.kind.token());
            if stage.id.as_str() != expected {
                report.push(
                    ViolationKind::MalformedStageId,
                    &stage.id,
                    format!("stage id `{}` should be `{expected}`", stage.id),
                );
            }
        }
        for flow in &self.flows {
            let (f, t) = (self.stages.get(&flow.from), self.stages.get(&flow.to));
            match (f, t) {
                (Some(f), Some(t)) => {
                    let locality = self.locality(f, t);
                    if !flow_legal(f.kind, t.kind, locality) {
                        report.push(
                            ViolationKind::IllegalFlow,
                            FlowId(flow.from.clone(), flow.to.clone()),
                            format!("flow {} -> {} ({locality}) is not legal", f.kind, t.kind),
                        );
                    }
                }
                _ => report.push(
                    ViolationKind::UnresolvedEndpoint,
                    FlowId(flow.from.clone(), flow.to.clone()),
                    "flow endpoint does not resolve to a stage",
                ),
            }
        }
        for trig in &self.triggers {
            let (f, t) = (self.stages.get(&trig.from), self.stages.get(&trig.to));
            match (f, t) {
                (Some(f), Some(t)) => {
                    if f.owner == t.owner {
                        report.push(
                            ViolationKind::SameThimacTrigger,
                            TriggerId(trig.from.clone(), trig.to.clone()),
                            "trigger endpoints belong to one thimac",
                        );
                    }
                }
                _ => report.push(
                    ViolationKind::UnresolvedEndpoint,
                    TriggerId(trig.from.clone(), trig.to.clone()),
                    "trigger endpoint does not resolve to a stage",
                ),
            }
        }
        report
    }

    /// Induced sub-model over `stages`: the stages themselves plus every
    /// flow/trigger whose two endpoints are both in the set.
    pub fn extract_region<'a>(
        &self,
        stages: impl IntoIterator<Item = &'a StageId>,
    ) -> Result<Subdiagram, ModelError> {
        let mut set = BTreeSet::new();
        for id in stages {
            if !self.stages.contains_key(id) {
                return Err(ModelError::UnknownStage(id.clone()));
            }
            set.insert(id.clone());
        }
        let flows = self
            .flows
            .iter()
            .filter(|f| set.contains(&f.from) && set.contains(&f.to))
            .cloned()
            .collect();
        let triggers = self
            .triggers
            .iter()
            .filter(|t| set.contains(&t.from) && set.contains(&t.to))
            .cloned()
            .collect();
        Ok(Subdiagram {
            stages: set,
            flows,
            triggers,
        })
    }

    /// Rebuild a model from parts, e.g. after JSON deserialization.
    /// No invariant is enforced here; run [`StaticModel::validate`].
    pub fn from_parts(
        name: String,
        thimacs: Vec<Thimac>,
        stages: Vec<Stage>,
        flows: Vec<FlowEdge>,
        triggers: Vec<TriggerEdge>,
    ) -> Self {
        StaticModel {
            name,
            thimacs: thimacs.into_iter().map(|t| (t.id.clone(), t)).collect(),
            stages: stages.into_iter().map(|s| (s.id.clone(), s)).collect(),
            flows: flows.into_iter().collect(),
            triggers: triggers.into_iter().collect(),
        }
    }
}

//! Deterministic token simulation.
//!
//! Things rest at interior posts (create, process, receive) where each
//! stage keeps a FIFO queue. A step picks one enabled occurrence with a
//! seeded scheduler and executes it atomically: the thing leaves its
//! state post and crosses consecutive progression posts (release,
//! transfer, arrive) until it rests at the next state post, one trace
//! record per generic action crossed. Progression posts have no duration:
//! a thing is never parked at one across a step boundary.
//!
//! Behavior graphs gate which stages are enabled. Gating is per case: an
//! injected root thing starts a case pinned to the configuration active
//! at injection time, and everything its triggers spawn stays in that
//! case. Events of the case's graph move pending -> active -> completed
//! (or dead, for choice branches not taken); a stage covered by events is
//! enabled only while some covering event is active or completed, and a
//! stage covered by no event is unconstrained.
//!
//! Triggers fire when the action of their source stage is recorded. A
//! trigger whose target is a create stage births a fresh thing carrying a
//! copy of the firing thing's payload; the birth happens immediately if
//! the target is enabled, is deferred until its event activates if the
//! target is still pending, and is dropped if every covering event is
//! dead. Each create stage births at most one triggered thing per case,
//! which is what lets several branches signal one join machine without
//! duplicating its thing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{validate_behavior, BehaviorGraph, EventId, OrderKind};
use crate::model::{Post, StageId, StageKind, StaticModel, ValidationReport};
use crate::trace::{Action, Payload, PayloadValue, Trace, TraceRecord};

crate::model::string_id! {
    /// Token identifier, assigned in birth order: `t1`, `t2`, ...
    ThingId
}
crate::model::string_id! {
    /// One end-to-end process instance: a root injection plus everything
    /// its triggers spawn.
    CaseId
}
crate::model::string_id! {
    /// Name of a registered behavior configuration, e.g. `E20`.
    ConfigId
}

/// An instance flowing through stages. Between steps its location is
/// always an interior post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thing {
    pub id: ThingId,
    pub payload: Payload,
    pub location: StageId,
    pub born_step: u64,
    pub case: CaseId,
}

/// Scripted injection: at step `step`, birth a thing at `stage`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Injection {
    pub step: u64,
    pub stage: StageId,
    #[serde(default)]
    pub payload: Payload,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("model `{0}` fails validation with {1} violation(s)")]
    InvalidModel(String, usize),
    #[error("behavior `{config}` does not fit the model: {message}")]
    RegionForeign { config: ConfigId, message: String },
    #[error("configuration `{0}` already registered")]
    DuplicateConfig(ConfigId),
    #[error("unknown configuration `{0}`")]
    UnknownConfig(ConfigId),
    #[error("no active configuration; register and activate one first")]
    NoActiveConfig,
    #[error("unknown stage `{0}`")]
    UnknownStage(StageId),
    #[error("`{0}` is not a create stage; things are injected at create stages")]
    NotACreateStage(StageId),
    #[error("unknown case `{0}`")]
    UnknownCase(CaseId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventStatus {
    Pending,
    Active,
    Completed,
    Dead,
}

#[derive(Debug, Clone)]
struct PendingBirth {
    target: StageId,
    payload: Payload,
}

#[derive(Debug, Clone)]
struct CaseState {
    config: ConfigId,
    payload: Payload,
    status: BTreeMap<EventId, EventStatus>,
    chosen: BTreeMap<EventId, EventId>,
    entered: BTreeSet<EventId>,
    pending_births: Vec<PendingBirth>,
    birth_claims: BTreeSet<StageId>,
}

impl CaseState {
    fn new(config: ConfigId, payload: Payload, graph: &BehaviorGraph) -> Self {
        let status = graph
            .events()
            .map(|e| {
                let s = if graph.initial().contains(&e.id) {
                    EventStatus::Active
                } else {
                    EventStatus::Pending
                };
                (e.id.clone(), s)
            })
            .collect();
        CaseState {
            config,
            payload,
            status,
            chosen: BTreeMap::new(),
            entered: BTreeSet::new(),
            pending_births: Vec::new(),
            birth_claims: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Occurrence {
    Move {
        thing: ThingId,
        from: StageId,
        to: StageId,
    },
    Birth {
        case: CaseId,
        index: usize,
    },
}

/// Simulation state over one model and one or more registered behavior
/// configurations. Single-owner: distinct sims can run on separate
/// threads, but one sim is driven from one thread.
#[derive(Debug, Clone)]
pub struct Sim {
    model: Arc<StaticModel>,
    configs: BTreeMap<ConfigId, Arc<BehaviorGraph>>,
    active: Option<ConfigId>,
    seed: u64,
    rng: StdRng,
    step_no: u64,
    things: BTreeMap<ThingId, Thing>,
    queues: BTreeMap<StageId, VecDeque<ThingId>>,
    cases: BTreeMap<CaseId, CaseState>,
    next_thing: u64,
    next_case: u64,
    trace: Vec<TraceRecord>,
    step_buf: Vec<TraceRecord>,
    tag_cases: bool,
}

/// Single-configuration constructor: validates the model and the graph,
/// registers the graph and activates it.
pub fn init_sim(model: StaticModel, behavior: BehaviorGraph, seed: u64) -> Result<Sim, SimError> {
    let mut sim = Sim::new(model, seed)?;
    sim.register_config(ConfigId::new("main"), behavior)?;
    sim.set_active(&ConfigId::new("main"))?;
    Ok(sim)
}

impl Sim {
    pub fn new(model: StaticModel, seed: u64) -> Result<Sim, SimError> {
        let report: ValidationReport = model.validate();
        if !report.is_clean() {
            return Err(SimError::InvalidModel(
                model.name.clone(),
                report.violations.len(),
            ));
        }
        Ok(Sim {
            model: Arc::new(model),
            configs: BTreeMap::new(),
            active: None,
            seed,
            rng: StdRng::seed_from_u64(seed),
            step_no: 0,
            things: BTreeMap::new(),
            queues: BTreeMap::new(),
            cases: BTreeMap::new(),
            next_thing: 1,
            next_case: 1,
            trace: Vec::new(),
            step_buf: Vec::new(),
            tag_cases: false,
        })
    }

    pub fn model(&self) -> &StaticModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_no(&self) -> u64 {
        self.step_no
    }

    /// Full record history since construction.
    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// When enabled, records carry their case id and pinned config id so
    /// coexisting configurations are observable in one trace.
    pub fn set_case_tagging(&mut self, on: bool) {
        self.tag_cases = on;
    }

    pub fn register_config(&mut self, id: ConfigId, graph: BehaviorGraph) -> Result<(), SimError> {
        if self.configs.contains_key(&id) {
            return Err(SimError::DuplicateConfig(id));
        }
        let report = validate_behavior(&self.model, &graph);
        if report.has_errors() {
            let message = report
                .violations
                .iter()
                .find(|v| v.severity == crate::behavior::Severity::Error)
                .map(|v| v.message.clone())
                .unwrap_or_default();
            return Err(SimError::RegionForeign {
                config: id,
                message,
            });
        }
        self.configs.insert(id, Arc::new(graph));
        Ok(())
    }

    pub fn config_ids(&self) -> impl Iterator<Item = &ConfigId> {
        self.configs.keys()
    }

    pub fn config(&self, id: &ConfigId) -> Option<&BehaviorGraph> {
        self.configs.get(id).map(|g| g.as_ref())
    }

    pub fn active_config(&self) -> Option<&ConfigId> {
        self.active.as_ref()
    }

    pub fn set_active(&mut self, id: &ConfigId) -> Result<(), SimError> {
        if !self.configs.contains_key(id) {
            return Err(SimError::UnknownConfig(id.clone()));
        }
        self.active = Some(id.clone());
        Ok(())
    }

    pub fn case_config(&self, case: &CaseId) -> Option<&ConfigId> {
        self.cases.get(case).map(|c| &c.config)
    }

    pub fn case_ids(&self) -> impl Iterator<Item = &CaseId> {
        self.cases.keys()
    }

    /// Events of the case currently active (between pending and
    /// completed).
    pub fn active_events(&self, case: &CaseId) -> BTreeSet<EventId> {
        self.cases
            .get(case)
            .map(|c| {
                c.status
                    .iter()
                    .filter(|(_, s)| **s == EventStatus::Active)
                    .map(|(id, _)| id.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Birth a thing at a create stage, starting a new case pinned to the
    /// active configuration.
    pub fn inject_thing(&mut self, stage: &StageId, payload: Payload) -> Result<ThingId, SimError> {
        let s = self
            .model
            .stage(stage)
            .ok_or_else(|| SimError::UnknownStage(stage.clone()))?;
        if s.kind != StageKind::Create {
            return Err(SimError::NotACreateStage(stage.clone()));
        }
        let active = self.active.clone().ok_or(SimError::NoActiveConfig)?;
        let graph = Arc::clone(&self.configs[&active]);
        let case_id = CaseId::new(format!("c{}", self.next_case));
        self.next_case += 1;
        self.cases.insert(
            case_id.clone(),
            CaseState::new(active, payload.clone(), &graph),
        );
        let thing = self.birth(&case_id, stage, payload);
        self.sweep();
        Ok(thing)
    }

    /// Execute one enabled occurrence; empty result means quiescence.
    pub fn step(&mut self) -> Vec<TraceRecord> {
        let occurrences = self.enumerate();
        if occurrences.is_empty() {
            return Vec::new();
        }
        self.step_no += 1;
        self.step_buf.clear();
        let pick = self.rng.random_range(0..occurrences.len());
        match occurrences[pick].clone() {
            Occurrence::Move { thing, from, to } => self.execute_move(&thing, &from, &to),
            Occurrence::Birth { case, index } => {
                let birth = self
                    .cases
                    .get_mut(&case)
                    .expect("case exists")
                    .pending_births
                    .remove(index);
                self.birth(&case, &birth.target, birth.payload);
            }
        }
        self.sweep();
        std::mem::take(&mut self.step_buf)
    }

    /// Step until quiescent or the budget runs out.
    pub fn run(&mut self, max_steps: u64) -> Trace {
        let mut records = Vec::new();
        for _ in 0..max_steps {
            let recs = self.step();
            if recs.is_empty() {
                return Trace {
                    records,
                    budget_exhausted: false,
                };
            }
            records.extend(recs);
        }
        Trace {
            records,
            budget_exhausted: !self.is_quiescent(),
        }
    }

    /// Run an injection script: each entry is injected once the step
    /// counter reaches its step (immediately if the sim quiesces first),
    /// then the sim runs on until quiescent or out of budget.
    pub fn run_script(&mut self, script: &[Injection], max_steps: u64) -> Result<Trace, SimError> {
        let mut script: Vec<&Injection> = script.iter().collect();
        script.sort_by_key(|i| i.step);
        let mut records = Vec::new();
        let mut budget = max_steps;
        for inj in script {
            while self.step_no < inj.step && budget > 0 {
                let recs = self.step();
                if recs.is_empty() {
                    break;
                }
                records.extend(recs);
                budget -= 1;
            }
            self.inject_thing(&inj.stage, inj.payload.clone())?;
            records.append(&mut self.step_buf);
        }
        let mut tail = self.run(budget);
        records.append(&mut tail.records);
        Ok(Trace {
            records,
            budget_exhausted: tail.budget_exhausted,
        })
    }

    pub fn is_quiescent(&self) -> bool {
        self.enumerate().is_empty()
    }

    /// Cases that still have work: a movable thing or a deferred birth
    /// that can still fire.
    pub fn live_cases(&self) -> BTreeSet<CaseId> {
        self.enumerate()
            .into_iter()
            .map(|occ| match occ {
                Occurrence::Move { thing, .. } => self.things[&thing].case.clone(),
                Occurrence::Birth { case, .. } => case,
            })
            .collect()
    }

    /// Re-pin a case to another registered configuration, carrying over
    /// the status of shared events. Used by immediate switching.
    pub fn repin_case(&mut self, case: &CaseId, to: &ConfigId) -> Result<(), SimError> {
        let graph = self
            .configs
            .get(to)
            .cloned()
            .ok_or_else(|| SimError::UnknownConfig(to.clone()))?;
        let state = self
            .cases
            .get_mut(case)
            .ok_or_else(|| SimError::UnknownCase(case.clone()))?;
        let mut status = BTreeMap::new();
        for event in graph.events() {
            let carried = state.status.get(&event.id).copied();
            let s = match carried {
                Some(s) => s,
                None if graph.initial().contains(&event.id) => EventStatus::Active,
                None => EventStatus::Pending,
            };
            status.insert(event.id.clone(), s);
        }
        state.status = status;
        state
            .chosen
            .retain(|from, to_ev| graph.event(from).is_some() && graph.event(to_ev).is_some());
        state.entered.retain(|id| graph.event(id).is_some());
        state.config = to.clone();
        self.sweep();
        Ok(())
    }

    // ---- gating ----------------------------------------------------

    fn stage_enabled(&self, case: &CaseState, graph: &BehaviorGraph, stage: &StageId) -> bool {
        let mut covered = false;
        for event in graph.covering(stage) {
            covered = true;
            if matches!(
                case.status[&event.id],
                EventStatus::Active | EventStatus::Completed
            ) {
                return true;
            }
        }
        !covered
    }

    fn stage_dead(&self, case: &CaseState, graph: &BehaviorGraph, stage: &StageId) -> bool {
        let mut covered = false;
        for event in graph.covering(stage) {
            covered = true;
            if case.status[&event.id] != EventStatus::Dead {
                return false;
            }
        }
        covered
    }

    /// Is there a complete enabled walk from `stage` to a resting
    /// (interior) post? The legality table admits no cycle through
    /// boundary posts, so this terminates; the visited set is a guard.
    fn can_rest_from(
        &self,
        case: &CaseState,
        graph: &BehaviorGraph,
        stage: &StageId,
        visited: &mut BTreeSet<StageId>,
    ) -> bool {
        if !visited.insert(stage.clone()) {
            return false;
        }
        if !self.stage_enabled(case, graph, stage) {
            return false;
        }
        let s = self.model.stage(stage).expect("endpoints validated");
        if s.kind.post() == Post::Interior {
            return true;
        }
        self.model
            .flows_from(stage)
            .any(|f| self.can_rest_from(case, graph, &f.to, &mut visited.clone()))
    }

    fn exit_enabled(&self, case: &CaseState, graph: &BehaviorGraph, hop: &StageId) -> bool {
        self.can_rest_from(case, graph, hop, &mut BTreeSet::new())
    }

    fn enumerate(&self) -> Vec<Occurrence> {
        let mut out = Vec::new();
        for (stage, queue) in &self.queues {
            let Some(head) = queue.front() else { continue };
            let thing = &self.things[head];
            let case = &self.cases[&thing.case];
            let graph = &self.configs[&case.config];
            for flow in self.model.flows_from(stage) {
                if self.exit_enabled(case, graph, &flow.to) {
                    out.push(Occurrence::Move {
                        thing: head.clone(),
                        from: stage.clone(),
                        to: flow.to.clone(),
                    });
                }
            }
        }
        for (case_id, case) in &self.cases {
            let graph = &self.configs[&case.config];
            for (index, birth) in case.pending_births.iter().enumerate() {
                if self.stage_enabled(case, graph, &birth.target) {
                    out.push(Occurrence::Birth {
                        case: case_id.clone(),
                        index,
                    });
                }
            }
        }
        out
    }

    // ---- execution -------------------------------------------------

    fn emit(&mut self, thing: &ThingId, stage: &StageId, action: Action) {
        let owner = self.model.stage(stage).expect("stage exists").owner.clone();
        let case_id = self.things[thing].case.clone();
        let config = self.cases[&case_id].config.clone();
        let graph = Arc::clone(&self.configs[&config]);
        let covering: Vec<EventId> = graph.covering(stage).map(|e| e.id.clone()).collect();
        let case = self.cases.get_mut(&case_id).expect("case exists");
        case.entered.extend(covering);
        let rec = TraceRecord {
            step: self.step_no,
            thing: thing.clone(),
            thimac: owner,
            stage: stage.clone(),
            action,
            mode: action.mode(),
            case: self.tag_cases.then(|| case_id.clone()),
            config: self.tag_cases.then_some(config),
        };
        self.trace.push(rec.clone());
        self.step_buf.push(rec);
    }

    /// Fire every trigger leaving `stage`, in target order. The trigger
    /// record itself is always emitted; a create-targeted trigger also
    /// attempts a birth.
    fn fire_triggers(&mut self, stage: &StageId, thing: &ThingId) {
        let targets: Vec<StageId> = self
            .model
            .triggers_from(stage)
            .map(|t| t.to.clone())
            .collect();
        for target in targets {
            self.emit(thing, stage, Action::Trigger);
            let kind = self.model.stage(&target).expect("validated").kind;
            if kind == StageKind::Create {
                let payload = self.things[thing].payload.clone();
                let case_id = self.things[thing].case.clone();
                self.attempt_birth(&case_id, &target, payload);
            }
        }
    }

    fn attempt_birth(&mut self, case_id: &CaseId, target: &StageId, payload: Payload) {
        let case = &self.cases[case_id];
        if case.birth_claims.contains(target) {
            return;
        }
        let graph = Arc::clone(&self.configs[&case.config]);
        if self.stage_enabled(case, &graph, target) {
            self.cases
                .get_mut(case_id)
                .expect("case exists")
                .birth_claims
                .insert(target.clone());
            self.birth(case_id, target, payload);
        } else if self.stage_dead(case, &graph, target) {
            // branch not taken: the signal is dropped silently
        } else {
            let case = self.cases.get_mut(case_id).expect("case exists");
            case.birth_claims.insert(target.clone());
            case.pending_births.push(PendingBirth {
                target: target.clone(),
                payload,
            });
        }
    }

    fn birth(&mut self, case_id: &CaseId, stage: &StageId, payload: Payload) -> ThingId {
        let id = ThingId::new(format!("t{}", self.next_thing));
        self.next_thing += 1;
        self.things.insert(
            id.clone(),
            Thing {
                id: id.clone(),
                payload,
                location: stage.clone(),
                born_step: self.step_no,
                case: case_id.clone(),
            },
        );
        self.queues
            .entry(stage.clone())
            .or_default()
            .push_back(id.clone());
        self.emit(&id, stage, Action::Create);
        self.fire_triggers(stage, &id);
        id
    }

    fn execute_move(&mut self, thing: &ThingId, from: &StageId, first_hop: &StageId) {
        let queue = self.queues.get_mut(from).expect("queue exists");
        let popped = queue.pop_front();
        debug_assert_eq!(popped.as_ref(), Some(thing));
        let mut cur = first_hop.clone();
        loop {
            let kind = self.model.stage(&cur).expect("validated").kind;
            let resting = match kind {
                StageKind::Release => {
                    self.emit(thing, &cur, Action::Release);
                    false
                }
                StageKind::Transfer(_) => {
                    self.emit(thing, &cur, Action::Transfer);
                    false
                }
                StageKind::Receive => {
                    self.emit(thing, &cur, Action::Arrive);
                    self.emit(thing, &cur, Action::Accept);
                    true
                }
                StageKind::Process => {
                    self.emit(thing, &cur, Action::Process);
                    true
                }
                StageKind::Create => {
                    self.emit(thing, &cur, Action::Create);
                    true
                }
            };
            self.fire_triggers(&cur, thing);
            if resting {
                self.queues
                    .entry(cur.clone())
                    .or_default()
                    .push_back(thing.clone());
                self.things.get_mut(thing).expect("thing exists").location = cur;
                return;
            }
            let case = &self.cases[&self.things[thing].case];
            let graph = &self.configs[&case.config];
            let nexts: Vec<StageId> = self
                .model
                .flows_from(&cur)
                .filter(|f| self.exit_enabled(case, graph, &f.to))
                .map(|f| f.to.clone())
                .collect();
            debug_assert!(!nexts.is_empty(), "walk checked before execution");
            cur = if nexts.len() == 1 {
                nexts.into_iter().next().expect("len checked")
            } else {
                let pick = self.rng.random_range(0..nexts.len());
                nexts.into_iter().nth(pick).expect("pick in range")
            };
        }
    }

    // ---- event lifecycle --------------------------------------------

    /// No thing of the case resting in the region can still act inside
    /// or out of it.
    fn region_quiescent(
        &self,
        case_id: &CaseId,
        case: &CaseState,
        graph: &BehaviorGraph,
        event: &EventId,
    ) -> bool {
        let region = &graph.event(event).expect("event exists").region;
        for stage in &region.stages {
            let Some(queue) = self.queues.get(stage) else {
                continue;
            };
            for tid in queue {
                if &self.things[tid].case != case_id {
                    continue;
                }
                let movable = self
                    .model
                    .flows_from(stage)
                    .any(|f| self.exit_enabled(case, graph, &f.to));
                if movable {
                    return false;
                }
            }
        }
        true
    }

    fn sweep(&mut self) {
        loop {
            let mut changed = false;
            let case_ids: Vec<CaseId> = self.cases.keys().cloned().collect();
            for case_id in &case_ids {
                changed |= self.sweep_case(case_id);
            }
            if !changed {
                break;
            }
        }
        self.drop_dead_births();
    }

    fn sweep_case(&mut self, case_id: &CaseId) -> bool {
        let case = &self.cases[case_id];
        let graph = Arc::clone(&self.configs[&case.config]);
        let mut activations = Vec::new();
        let mut deaths = Vec::new();
        let mut completions = Vec::new();
        for event in graph.events() {
            match case.status[&event.id] {
                EventStatus::Pending => {
                    let mut satisfied = true;
                    let mut impossible = false;
                    for edge in graph.in_edges(&event.id) {
                        let src = case.status[&edge.from];
                        let edge_ok = match edge.kind {
                            OrderKind::Choice => {
                                src == EventStatus::Completed
                                    && case.chosen.get(&edge.from) == Some(&event.id)
                            }
                            _ => src == EventStatus::Completed,
                        };
                        let edge_dead = src == EventStatus::Dead
                            || (edge.kind == OrderKind::Choice
                                && case.chosen.get(&edge.from).is_some_and(|c| c != &event.id));
                        satisfied &= edge_ok;
                        impossible |= edge_dead;
                    }
                    if impossible {
                        deaths.push(event.id.clone());
                    } else if satisfied && graph.in_edges(&event.id).next().is_some() {
                        activations.push(event.id.clone());
                    }
                }
                EventStatus::Active
                    if case.entered.contains(&event.id)
                        && self.region_quiescent(case_id, case, &graph, &event.id) =>
                {
                    completions.push(event.id.clone());
                }
                _ => {}
            }
        }
        let changed = !(activations.is_empty() && deaths.is_empty() && completions.is_empty());
        // choices are resolved as their source completes
        let mut resolved = Vec::new();
        for done in &completions {
            let branches: Vec<EventId> = graph
                .out_edges(done)
                .filter(|e| e.kind == OrderKind::Choice)
                .map(|e| e.to.clone())
                .collect();
            if branches.is_empty() {
                continue;
            }
            let key = format!("choice:{done}");
            let by_payload = match self.cases[case_id].payload.get(&key) {
                Some(PayloadValue::Text(t)) => branches.iter().find(|b| b.as_str() == t).cloned(),
                _ => None,
            };
            let pick = match by_payload {
                Some(p) => p,
                None => {
                    let i = self.rng.random_range(0..branches.len());
                    branches[i].clone()
                }
            };
            resolved.push((done.clone(), pick));
        }
        let state = self.cases.get_mut(case_id).expect("case exists");
        for id in activations {
            state.status.insert(id, EventStatus::Active);
        }
        for id in deaths {
            state.status.insert(id, EventStatus::Dead);
        }
        for id in completions {
            state.status.insert(id, EventStatus::Completed);
        }
        for (from, to) in resolved {
            state.chosen.insert(from, to);
        }
        changed
    }

    fn drop_dead_births(&mut self) {
        let case_ids: Vec<CaseId> = self.cases.keys().cloned().collect();
        for case_id in case_ids {
            let case = &self.cases[&case_id];
            let graph = Arc::clone(&self.configs[&case.config]);
            let keep: Vec<bool> = case
                .pending_births
                .iter()
                .map(|b| !self.stage_dead(case, &graph, &b.target))
                .collect();
            let state = self.cases.get_mut(&case_id).expect("case exists");
            let mut it = keep.iter();
            state
                .pending_births
                .retain(|_| *it.next().expect("same length"));
        }
    }

    // ---- inspection helpers for tests and invariants -----------------

    /// Locations of all live things; the resting-post invariant says all
    /// of these are interior.
    pub fn resting_locations(&self) -> Vec<(ThingId, StageId)> {
        self.things
            .values()
            .map(|t| (t.id.clone(), t.location.clone()))
            .collect()
    }

    pub fn thing_payload(&self, thing: &ThingId) -> Option<&Payload> {
        self.things.get(thing).map(|t| &t.payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TransferDir;

    /// A release chain from A to B:
    /// A.create -> A.release -> A.transfer_out -> B.transfer_in -> B.receive
    fn chain_model() -> StaticModel {
        let mut m = StaticModel::new("chain");
        let a = m.add_thimac("A", None).unwrap();
        let b = m.add_thimac("B", None).unwrap();
        let a_create = m.add_stage(&a, StageKind::Create).unwrap();
        let a_release = m.add_stage(&a, StageKind::Release).unwrap();
        let a_out = m
            .add_stage(&a, StageKind::Transfer(TransferDir::Out))
            .unwrap();
        let b_in = m
            .add_stage(&b, StageKind::Transfer(TransferDir::In))
            .unwrap();
        let b_recv = m.add_stage(&b, StageKind::Receive).unwrap();
        m.add_flow(&a_create, &a_release).unwrap();
        m.add_flow(&a_release, &a_out).unwrap();
        m.add_flow(&a_out, &b_in).unwrap();
        m.add_flow(&b_in, &b_recv).unwrap();
        m
    }

    fn ungated(model: StaticModel, seed: u64) -> Sim {
        init_sim(model, BehaviorGraph::unconstrained(), seed).unwrap()
    }

    fn actions(records: &[TraceRecord]) -> Vec<Action> {
        records.iter().map(|r| r.action).collect()
    }

    #[test]
    fn inject_checks_stage() {
        let mut sim = ungated(chain_model(), 7);
        assert!(matches!(
            sim.inject_thing(&StageId::new("A.release"), Payload::new()),
            Err(SimError::NotACreateStage(_))
        ));
        assert!(matches!(
            sim.inject_thing(&StageId::new("Z.create"), Payload::new()),
            Err(SimError::UnknownStage(_))
        ));
        let t = sim
            .inject_thing(&StageId::new("A.create"), Payload::new())
            .unwrap();
        assert_eq!(t.as_str(), "t1");
        assert_eq!(actions(sim.trace()), vec![Action::Create]);
    }

    #[test]
    fn progression_chain_in_one_step() {
        let mut sim = ungated(chain_model(), 7);
        sim.inject_thing(&StageId::new("A.create"), Payload::new())
            .unwrap();
        let recs = sim.step();
        assert_eq!(
            actions(&recs),
            vec![
                Action::Release,
                Action::Transfer,
                Action::Transfer,
                Action::Arrive,
                Action::Accept
            ]
        );
        // the thing rests at B's receive (accept state)
        let rest = sim.resting_locations();
        assert_eq!(rest.len(), 1);
        assert_eq!(rest[0].1.as_str(), "B.receive");
        // quiescent now
        assert!(sim.step().is_empty());
    }

    #[test]
    fn process_trigger_create_in_one_step() {
        // A.create -> A.process, trigger A.process ~> B.create
        let mut m = StaticModel::new("trig");
        let a = m.add_thimac("Credit", None).unwrap();
        let b = m.add_thimac("Billing", None).unwrap();
        let c = m.add_stage(&a, StageKind::Create).unwrap();
        let p = m.add_stage(&a, StageKind::Process).unwrap();
        let bc = m.add_stage(&b, StageKind::Create).unwrap();
        m.add_flow(&c, &p).unwrap();
        m.add_trigger(&p, &bc).unwrap();
        let mut sim = ungated(m, 1);
        sim.inject_thing(&StageId::new("Credit.create"), Payload::new())
            .unwrap();
        let recs = sim.step();
        assert_eq!(
            actions(&recs),
            vec![Action::Process, Action::Trigger, Action::Create]
        );
        assert_eq!(recs[2].thing.as_str(), "t2");
        assert_eq!(recs[2].stage.as_str(), "Billing.create");
    }

    #[test]
    fn fifo_order_of_injections() {
        let mut sim = ungated(chain_model(), 42);
        let t1 = sim
            .inject_thing(&StageId::new("A.create"), Payload::new())
            .unwrap();
        let t2 = sim
            .inject_thing(&StageId::new("A.create"), Payload::new())
            .unwrap();
        let trace = sim.run(100);
        assert!(!trace.budget_exhausted);
        let movers: Vec<&ThingId> = trace
            .records
            .iter()
            .filter(|r| r.action == Action::Accept)
            .map(|r| &r.thing)
            .collect();
        assert_eq!(movers, vec![&t1, &t2]);
    }

    #[test]
    fn determinism_same_seed_same_trace() {
        let runs: Vec<String> = (0..3)
            .map(|_| {
                let mut sim = ungated(chain_model(), 99);
                sim.inject_thing(&StageId::new("A.create"), Payload::new())
                    .unwrap();
                sim.run(100).to_jsonl()
            })
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[1], runs[2]);
    }

    #[test]
    fn quiescent_run_is_empty() {
        let mut sim = ungated(chain_model(), 7);
        let trace = sim.run(50);
        assert!(trace.records.is_empty());
        assert!(!trace.budget_exhausted);
    }

    #[test]
    fn scripted_injections_respect_steps() {
        let mut sim = ungated(chain_model(), 7);
        let script = vec![
            Injection {
                step: 0,
                stage: StageId::new("A.create"),
                payload: Payload::new(),
            },
            Injection {
                step: 3,
                stage: StageId::new("A.create"),
                payload: Payload::new(),
            },
        ];
        let trace = sim.run_script(&script, 100).unwrap();
        assert!(!trace.budget_exhausted);
        let creates: Vec<u64> = trace
            .records
            .iter()
            .filter(|r| r.action == Action::Create)
            .map(|r| r.step)
            .collect();
        assert_eq!(creates.len(), 2);
        assert_eq!(creates[0], 0);
        assert!(creates[1] >= 3 || sim.is_quiescent());
        // both things complete the chain
        let accepts = trace
            .records
            .iter()
            .filter(|r| r.action == Action::Accept)
            .count();
        assert_eq!(accepts, 2);
    }

    #[test]
    fn budget_exhaustion_is_metadata() {
        // process -> create loop runs forever
        let mut m = StaticModel::new("loop");
        let a = m.add_thimac("A", None).unwrap();
        let c = m.add_stage(&a, StageKind::Create).unwrap();
        let p = m.add_stage(&a, StageKind::Process).unwrap();
        m.add_flow(&c, &p).unwrap();
        m.add_flow(&p, &c).unwrap();
        let mut sim = ungated(m, 5);
        sim.inject_thing(&StageId::new("A.create"), Payload::new())
            .unwrap();
        let trace = sim.run(10);
        assert!(trace.budget_exhausted);
        assert_eq!(trace.records.len(), 10);
    }

    #[test]
    fn region_foreign_behavior_rejected() {
        let mut other = StaticModel::new("other");
        let z = other.add_thimac("Z", None).unwrap();
        other.add_stage(&z, StageKind::Create).unwrap();
        let mut b = BehaviorGraph::builder(&other);
        b.define_thimac_event("E1", &"Z".into(), "").unwrap();
        let graph = b.build(vec![], vec![EventId::new("E1")]).unwrap();
        assert!(matches!(
            init_sim(chain_model(), graph, 0),
            Err(SimError::RegionForeign { .. })
        ));
    }

    #[test]
    fn mode_matches_action_in_traces() {
        let mut sim = ungated(chain_model(), 3);
        sim.inject_thing(&StageId::new("A.create"), Payload::new())
            .unwrap();
        let trace = sim.run(100);
        for rec in &trace.records {
            assert_eq!(rec.mode, rec.action.mode());
        }
    }

    #[test]
    fn resting_post_invariant_between_steps() {
        let mut sim = ungated(chain_model(), 11);
        sim.inject_thing(&StageId::new("A.create"), Payload::new())
            .unwrap();
        loop {
            for (_, loc) in sim.resting_locations() {
                let kind = sim.model().stage(&loc).unwrap().kind;
                assert_eq!(kind.post(), Post::Interior);
            }
            if sim.step().is_empty() {
                break;
            }
        }
    }
}

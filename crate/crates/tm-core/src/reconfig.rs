//! Event-level reconfiguration.
//!
//! Several behavior graphs can be registered over one static model; a
//! controller activates one of them for new cases and switches between
//! them without ever touching the static description. In-flight cases
//! are pinned to the configuration active when they started, which is
//! what keeps old and new configuration processes simultaneously
//! available during a drain.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::behavior::BehaviorGraph;
use crate::model::{StageId, StaticModel};
use crate::sim::{CaseId, ConfigId, Sim, SimError, ThingId};
use crate::trace::{Payload, TraceRecord};

/// A named behavior graph over the shared static model.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub id: ConfigId,
    pub behavior: BehaviorGraph,
    pub description: String,
}

impl Configuration {
    pub fn new(
        id: impl Into<ConfigId>,
        behavior: BehaviorGraph,
        description: impl Into<String>,
    ) -> Self {
        Configuration {
            id: id.into(),
            behavior,
            description: description.into(),
        }
    }
}

/// How in-flight cases are handled by [`Controller::switch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchPolicy {
    /// In-flight cases finish under their pinned configuration while new
    /// cases use the target; old and new coexist.
    DrainOld,
    /// In-flight cases re-pin to the target where their current events
    /// exist in the target graph; the rest are reported stranded and
    /// keep draining under their old configuration.
    Immediate,
}

/// Outcome of a switch: which configurations still carry live cases and
/// which cases could not be migrated.
#[derive(Debug, Clone, Serialize)]
pub struct SwitchReport {
    pub policy: SwitchPolicy,
    pub to: ConfigId,
    /// Live-case counts per pinned configuration after the switch.
    pub coexisting: BTreeMap<ConfigId, usize>,
    pub stranded: Vec<CaseId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReconfigError {
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// The control system of the behavioral level: registered configurations
/// plus the switching machinery. Mutations are serialized through
/// `&mut self`; reads of registered configurations are safe to share.
#[derive(Debug, Clone)]
pub struct Controller {
    sim: Sim,
    descriptions: BTreeMap<ConfigId, String>,
}

impl Controller {
    pub fn new(model: StaticModel, seed: u64) -> Result<Controller, ReconfigError> {
        let mut sim = Sim::new(model, seed)?;
        sim.set_case_tagging(true);
        Ok(Controller {
            sim,
            descriptions: BTreeMap::new(),
        })
    }

    pub fn model(&self) -> &StaticModel {
        self.sim.model()
    }

    /// The underlying simulation, for stepping and trace access.
    pub fn sim(&self) -> &Sim {
        &self.sim
    }

    pub fn sim_mut(&mut self) -> &mut Sim {
        &mut self.sim
    }

    /// Register a configuration. The static model is untouched.
    pub fn register_config(&mut self, config: Configuration) -> Result<(), ReconfigError> {
        self.sim
            .register_config(config.id.clone(), config.behavior)?;
        self.descriptions.insert(config.id, config.description);
        Ok(())
    }

    /// New cases start under this configuration. Re-activating the
    /// active configuration is a no-op.
    pub fn activate(&mut self, id: &ConfigId) -> Result<(), ReconfigError> {
        self.sim.set_active(id)?;
        Ok(())
    }

    pub fn active(&self) -> Option<&ConfigId> {
        self.sim.active_config()
    }

    /// Inject a root thing, starting a case pinned to the active
    /// configuration.
    pub fn inject_case(
        &mut self,
        stage: &StageId,
        payload: Payload,
    ) -> Result<ThingId, ReconfigError> {
        Ok(self.sim.inject_thing(stage, payload)?)
    }

    pub fn step(&mut self) -> Vec<TraceRecord> {
        self.sim.step()
    }

    /// Switch the active configuration.
    pub fn switch(
        &mut self,
        to: &ConfigId,
        policy: SwitchPolicy,
    ) -> Result<SwitchReport, ReconfigError> {
        self.sim.set_active(to)?;
        let live = self.sim.live_cases();
        let mut stranded = Vec::new();
        if policy == SwitchPolicy::Immediate {
            let target_events = self.sim.config(to).expect("target registered").event_ids();
            for case in &live {
                let current = self.sim.active_events(case);
                if current.iter().all(|e| target_events.contains(e)) {
                    self.sim.repin_case(case, to)?;
                } else {
                    stranded.push(case.clone());
                }
            }
        }
        let mut coexisting: BTreeMap<ConfigId, usize> = BTreeMap::new();
        for case in self.sim.live_cases() {
            let config = self
                .sim
                .case_config(&case)
                .expect("live case is registered")
                .clone();
            *coexisting.entry(config).or_insert(0) += 1;
        }
        Ok(SwitchReport {
            policy,
            to: to.clone(),
            coexisting,
            stranded,
        })
    }
}

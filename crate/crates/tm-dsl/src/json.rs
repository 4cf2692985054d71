//! Canonical JSON for models and behavior graphs.
//!
//! The encoding is canonical: fixed field order, sorted thimac, stage and
//! edge lists, no whitespace. Structurally equal models serialize to
//! byte-identical text, so hashes and diffs of the text are meaningful.
//! Deserialization is structural only; semantic problems are left to
//! [`StaticModel::validate`] and [`validate_behavior`] so that invalid
//! documents can be loaded and inspected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tm_core::behavior::{
    validate_behavior, BehaviorError, BehaviorGraph, Event, EventId, OrderKind, OrderingEdge,
};
use tm_core::model::{
    FlowEdge, ModelError, Stage, StageId, StageKind, StaticModel, Thimac, ThimacId, TriggerEdge,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported schema version {found} (expected {SCHEMA_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("document does not fit the model: {0}")]
    Model(#[from] ModelError),
    #[error("document is not a valid behavior graph: {0}")]
    Behavior(#[from] BehaviorError),
    #[error("behavior graph does not fit the model: {0}")]
    ForeignBehavior(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    name: String,
    thimacs: Vec<ThimacDoc>,
    flows: Vec<EdgeDoc>,
    triggers: Vec<EdgeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ThimacDoc {
    id: String,
    name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    parent: Option<String>,
    stages: Vec<StageDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StageDoc {
    id: String,
    kind: StageKind,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
struct EdgeDoc {
    from: String,
    to: String,
}

/// Canonical JSON text of a model.
pub fn model_to_json(model: &StaticModel) -> String {
    let doc = ModelDoc {
        version: SCHEMA_VERSION,
        name: model.name.clone(),
        thimacs: model
            .thimacs()
            .map(|t| ThimacDoc {
                id: t.id.to_string(),
                name: t.name.clone(),
                parent: t.parent.as_ref().map(|p| p.to_string()),
                stages: t
                    .stages
                    .iter()
                    .filter_map(|sid| model.stage(sid))
                    .map(|s| StageDoc {
                        id: s.id.to_string(),
                        kind: s.kind,
                    })
                    .collect(),
            })
            .collect(),
        flows: model
            .flows()
            .map(|f| EdgeDoc {
                from: f.from.to_string(),
                to: f.to.to_string(),
            })
            .collect(),
        triggers: model
            .triggers()
            .map(|t| EdgeDoc {
                from: t.from.to_string(),
                to: t.to.to_string(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("model serializes")
}

/// Rebuild a model from its JSON document. The result may be invalid;
/// callers decide whether to run validation.
pub fn model_from_json(text: &str) -> Result<StaticModel, JsonError> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    if doc.version != SCHEMA_VERSION {
        return Err(JsonError::VersionMismatch { found: doc.version });
    }
    let mut thimacs = Vec::new();
    let mut stages = Vec::new();
    for t in doc.thimacs {
        let id = ThimacId::new(t.id);
        for s in t.stages {
            stages.push(Stage {
                id: StageId::new(s.id),
                owner: id.clone(),
                kind: s.kind,
            });
        }
        thimacs.push(Thimac {
            id: id.clone(),
            name: t.name,
            parent: t.parent.map(ThimacId::new),
            stages: Default::default(),
        });
    }
    // re-derive thimac stage sets from stage ownership
    let mut model_thimacs = thimacs;
    for stage in &stages {
        if let Some(t) = model_thimacs.iter_mut().find(|t| t.id == stage.owner) {
            t.stages.insert(stage.id.clone());
        }
    }
    let flows = doc
        .flows
        .into_iter()
        .map(|e| FlowEdge {
            from: StageId::new(e.from),
            to: StageId::new(e.to),
        })
        .collect();
    let triggers = doc
        .triggers
        .into_iter()
        .map(|e| TriggerEdge {
            from: StageId::new(e.from),
            to: StageId::new(e.to),
        })
        .collect();
    Ok(StaticModel::from_parts(
        doc.name,
        model_thimacs,
        stages,
        flows,
        triggers,
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct BehaviorDoc {
    version: u32,
    events: Vec<EventDoc>,
    edges: Vec<BehaviorEdgeDoc>,
    initial: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventDoc {
    id: String,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    description: String,
    stages: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
struct BehaviorEdgeDoc {
    from: String,
    to: String,
    kind: OrderKind,
}

/// Canonical JSON text of a behavior graph. Regions are stored as stage
/// id lists; the edges of each region are re-derived on load.
pub fn behavior_to_json(graph: &BehaviorGraph) -> String {
    let mut edges: Vec<BehaviorEdgeDoc> = graph
        .edges()
        .iter()
        .map(|e| BehaviorEdgeDoc {
            from: e.from.to_string(),
            to: e.to.to_string(),
            kind: e.kind,
        })
        .collect();
    edges.sort();
    let doc = BehaviorDoc {
        version: SCHEMA_VERSION,
        events: graph
            .events()
            .map(|e| EventDoc {
                id: e.id.to_string(),
                description: e.description.clone(),
                stages: e.region.stages.iter().map(|s| s.to_string()).collect(),
            })
            .collect(),
        edges,
        initial: graph.initial().iter().map(|e| e.to_string()).collect(),
    };
    serde_json::to_string(&doc).expect("graph serializes")
}

/// Load a behavior graph against the model its regions index into.
pub fn behavior_from_json(model: &StaticModel, text: &str) -> Result<BehaviorGraph, JsonError> {
    let doc: BehaviorDoc = serde_json::from_str(text)?;
    if doc.version != SCHEMA_VERSION {
        return Err(JsonError::VersionMismatch { found: doc.version });
    }
    let mut events = Vec::new();
    for e in doc.events {
        let stage_ids: Vec<StageId> = e.stages.into_iter().map(StageId::new).collect();
        let region = model.extract_region(stage_ids.iter())?;
        events.push(Event {
            id: EventId::new(e.id),
            region,
            description: e.description,
        });
    }
    let edges = doc
        .edges
        .into_iter()
        .map(|e| OrderingEdge {
            from: EventId::new(e.from),
            to: EventId::new(e.to),
            kind: e.kind,
        })
        .collect();
    let initial = doc.initial.into_iter().map(EventId::new).collect();
    let graph = BehaviorGraph::from_parts(events, edges, initial)?;
    let report = validate_behavior(model, &graph);
    if report.has_errors() {
        return Err(JsonError::ForeignBehavior(
            report.violations[0].message.clone(),
        ));
    }
    Ok(graph)
}

//! Mapping a BPMN graph onto a thinging-machine model plus behavior
//! graph.
//!
//! Tasks become thimacs with a transfer-in/receive/process/release/
//! transfer-out chain; sequence flows become transfer handshakes;
//! gateways become process stages in dedicated router thimacs. Parallel
//! gateways are the exception to the handshake rule: a split signals each
//! branch by triggering its create stage (that is how one thing fans out
//! into simultaneously active branches), and branch ends signal the join
//! the same way, the join's create firing once per case. Start maps to a
//! create in a boundary thimac, end to a terminal release behind a
//! receive.
//!
//! The behavior graph carries one event per task and per gateway; flows
//! out of an exclusive gateway become choice edges, flows out of a
//! parallel split become parallel-split edges and flows into a parallel
//! join become parallel-join edges.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use tm_core::behavior::{BehaviorError, BehaviorGraph, EventId, OrderKind, OrderingEdge};
use tm_core::model::{ModelError, StageId, StageKind, StaticModel, ThimacId, TransferDir};

use crate::parse::{BpmnGraph, BpmnNodeKind};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("gateway `{0}` is degenerate: an exclusive gateway needs two outgoing flows, a parallel gateway two outgoing or two incoming")]
    DegenerateGateway(String),
    #[error("flow `{0}` cannot be mapped: its source has no process stage to signal from")]
    UnsupportedStructure(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GatewayRole {
    Split,
    Join,
}

fn sanitize(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect()
}

/// Stable thimac names: sanitized element name, falling back to the id,
/// uniquified with a numeric suffix.
fn assign_names(graph: &BpmnGraph) -> BTreeMap<String, String> {
    let mut names = BTreeMap::new();
    let mut used = BTreeSet::new();
    for node in graph.nodes() {
        let mut base = sanitize(&node.name);
        if base.is_empty() {
            base = sanitize(&node.id);
        }
        if base.is_empty() {
            base = "Node".to_owned();
        }
        let mut candidate = base.clone();
        let mut n = 1;
        while !used.insert(candidate.clone()) {
            n += 1;
            candidate = format!("{base}_{n}");
        }
        names.insert(node.id.clone(), candidate);
    }
    names
}

fn gateway_role(graph: &BpmnGraph, id: &str) -> Result<GatewayRole, MapError> {
    let outgoing = graph.outgoing(id).count();
    let incoming = graph.incoming(id).count();
    if outgoing >= 2 {
        Ok(GatewayRole::Split)
    } else if incoming >= 2 {
        Ok(GatewayRole::Join)
    } else {
        Err(MapError::DegenerateGateway(id.to_owned()))
    }
}

/// Does the BPMN flow map to a trigger (parallel fan-out or fan-in)
/// rather than a transfer handshake?
fn maps_to_trigger(
    graph: &BpmnGraph,
    roles: &BTreeMap<String, GatewayRole>,
    source: &str,
    target: &str,
) -> bool {
    let split_source = graph.node(source).is_some_and(|n| {
        n.kind == BpmnNodeKind::ParallelGateway && roles.get(source) == Some(&GatewayRole::Split)
    });
    let join_target = graph.node(target).is_some_and(|n| {
        n.kind == BpmnNodeKind::ParallelGateway && roles.get(target) == Some(&GatewayRole::Join)
    });
    split_source || join_target
}

/// Map a parsed BPMN graph to a static model and its behavior graph.
pub fn map_bpmn(graph: &BpmnGraph) -> Result<(StaticModel, BehaviorGraph), MapError> {
    let names = assign_names(graph);
    let mut roles = BTreeMap::new();
    for node in graph.nodes() {
        match node.kind {
            BpmnNodeKind::ExclusiveGateway => {
                if graph.outgoing(&node.id).count() < 2 {
                    return Err(MapError::DegenerateGateway(node.id.clone()));
                }
            }
            BpmnNodeKind::ParallelGateway => {
                roles.insert(node.id.clone(), gateway_role(graph, &node.id)?);
            }
            _ => {}
        }
    }

    let model_name = {
        let s = sanitize(&graph.process_name);
        if s.is_empty() {
            sanitize(&graph.process_id)
        } else {
            s
        }
    };
    let mut model = StaticModel::new(model_name);

    // synthesize each node's stage set from how it is fed and exited
    for node in graph.nodes() {
        let thimac = model.add_thimac(&names[&node.id], None)?;
        let fed_by_trigger = node.kind == BpmnNodeKind::StartEvent
            || graph
                .incoming(&node.id)
                .any(|f| maps_to_trigger(graph, &roles, &f.source, &f.target));
        let fed_by_flow = graph
            .incoming(&node.id)
            .any(|f| !maps_to_trigger(graph, &roles, &f.source, &f.target));
        let exits_by_flow = graph
            .outgoing(&node.id)
            .any(|f| !maps_to_trigger(graph, &roles, &f.source, &f.target));
        let has_process = !matches!(node.kind, BpmnNodeKind::StartEvent | BpmnNodeKind::EndEvent);
        let has_release = exits_by_flow || node.kind == BpmnNodeKind::EndEvent;

        let create = fed_by_trigger
            .then(|| model.add_stage(&thimac, StageKind::Create))
            .transpose()?;
        let (t_in, receive) = if fed_by_flow {
            let t_in = model.add_stage(&thimac, StageKind::Transfer(TransferDir::In))?;
            let receive = model.add_stage(&thimac, StageKind::Receive)?;
            (Some(t_in), Some(receive))
        } else {
            (None, None)
        };
        let process = has_process
            .then(|| model.add_stage(&thimac, StageKind::Process))
            .transpose()?;
        let release = has_release
            .then(|| model.add_stage(&thimac, StageKind::Release))
            .transpose()?;
        let t_out = exits_by_flow
            .then(|| model.add_stage(&thimac, StageKind::Transfer(TransferDir::Out)))
            .transpose()?;

        if let (Some(t_in), Some(receive)) = (&t_in, &receive) {
            model.add_flow(t_in, receive)?;
        }
        match (&create, &process, &release) {
            (Some(c), Some(p), _) => {
                model.add_flow(c, p)?;
            }
            (Some(c), None, Some(r)) => {
                model.add_flow(c, r)?;
            }
            _ => {}
        }
        match (&receive, &process, &release) {
            (Some(v), Some(p), _) => {
                model.add_flow(v, p)?;
            }
            (Some(v), None, Some(r)) => {
                model.add_flow(v, r)?;
            }
            _ => {}
        }
        if let (Some(p), Some(r)) = (&process, &release) {
            model.add_flow(p, r)?;
        }
        if let (Some(r), Some(t)) = (&release, &t_out) {
            model.add_flow(r, t)?;
        }
    }

    // inter-node links
    for flow in graph.flows() {
        let from_name = ThimacId::new(names[&flow.source].clone());
        let to_name = ThimacId::new(names[&flow.target].clone());
        if maps_to_trigger(graph, &roles, &flow.source, &flow.target) {
            let from_stage = model
                .stage_of(&from_name, StageKind::Process)
                .map(|s| s.id.clone())
                .ok_or_else(|| MapError::UnsupportedStructure(flow.id.clone()))?;
            let to_stage = model
                .stage_of(&to_name, StageKind::Create)
                .map(|s| s.id.clone())
                .ok_or_else(|| MapError::UnsupportedStructure(flow.id.clone()))?;
            model.add_trigger(&from_stage, &to_stage)?;
        } else {
            let from_stage = model
                .stage_of(&from_name, StageKind::Transfer(TransferDir::Out))
                .map(|s| s.id.clone())
                .expect("exit chain synthesized above");
            let to_stage = model
                .stage_of(&to_name, StageKind::Transfer(TransferDir::In))
                .map(|s| s.id.clone())
                .expect("receive chain synthesized above");
            model.add_flow(&from_stage, &to_stage)?;
        }
    }

    // one behavior event per task and per gateway
    let evented: BTreeSet<&str> = graph
        .nodes()
        .filter(|n| {
            matches!(
                n.kind,
                BpmnNodeKind::Task | BpmnNodeKind::ExclusiveGateway | BpmnNodeKind::ParallelGateway
            )
        })
        .map(|n| n.id.as_str())
        .collect();
    let mut builder = BehaviorGraph::builder(&model);
    for id in &evented {
        let node = graph.node(id).expect("evented node exists");
        let thimac = ThimacId::new(names[*id].clone());
        builder.define_thimac_event(
            names[*id].as_str(),
            &thimac,
            format!("activity of {}", node.name),
        )?;
    }
    let mut edges = Vec::new();
    for flow in graph.flows() {
        if !evented.contains(flow.source.as_str()) || !evented.contains(flow.target.as_str()) {
            continue;
        }
        let source = graph.node(&flow.source).expect("endpoint exists");
        let target = graph.node(&flow.target).expect("endpoint exists");
        let kind = if target.kind == BpmnNodeKind::ParallelGateway
            && roles.get(&flow.target) == Some(&GatewayRole::Join)
        {
            OrderKind::ParallelJoin
        } else if source.kind == BpmnNodeKind::ParallelGateway
            && roles.get(&flow.source) == Some(&GatewayRole::Split)
        {
            OrderKind::ParallelSplit
        } else if source.kind == BpmnNodeKind::ExclusiveGateway {
            OrderKind::Choice
        } else {
            OrderKind::Sequence
        };
        edges.push(OrderingEdge {
            from: EventId::new(names[&flow.source].clone()),
            to: EventId::new(names[&flow.target].clone()),
            kind,
        });
    }
    let initial: Vec<EventId> = evented
        .iter()
        .filter(|id| {
            !graph
                .incoming(id)
                .any(|f| evented.contains(f.source.as_str()))
        })
        .map(|id| EventId::new(names[*id].clone()))
        .collect();
    let behavior = builder.build(edges, initial)?;
    Ok((model, behavior))
}

/// Stage id of `kind` in the thimac mapped for BPMN node `name`.
pub fn mapped_stage(model: &StaticModel, thimac: &str, kind: StageKind) -> Option<StageId> {
    model
        .stage_of(&ThimacId::new(thimac), kind)
        .map(|s| s.id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_bpmn;

    const MINIMAL: &str = r#"<definitions><process id="p1" name="Minimal">
        <startEvent id="start" name="Start"/>
        <task id="t1" name="Work"/>
        <endEvent id="end" name="End"/>
        <sequenceFlow id="f1" sourceRef="start" targetRef="t1"/>
        <sequenceFlow id="f2" sourceRef="t1" targetRef="end"/>
    </process></definitions>"#;

    #[test]
    fn minimal_maps_to_one_task_thimac_and_one_event() {
        let parsed = parse_bpmn(MINIMAL).unwrap();
        let (model, behavior) = map_bpmn(&parsed.graph).unwrap();
        assert!(model.validate().is_clean());
        assert_eq!(model.thimac_count(), 3);
        // the single task carries the full chain
        for kind in [
            StageKind::Transfer(TransferDir::In),
            StageKind::Receive,
            StageKind::Process,
            StageKind::Release,
            StageKind::Transfer(TransferDir::Out),
        ] {
            assert!(mapped_stage(&model, "Work", kind).is_some());
        }
        assert_eq!(behavior.event_ids().len(), 1);
        assert!(behavior.initial().contains(&EventId::new("Work")));
    }

    #[test]
    fn start_and_end_are_boundary_thimacs() {
        let parsed = parse_bpmn(MINIMAL).unwrap();
        let (model, _) = map_bpmn(&parsed.graph).unwrap();
        assert!(mapped_stage(&model, "Start", StageKind::Create).is_some());
        assert!(mapped_stage(&model, "Start", StageKind::Process).is_none());
        assert!(mapped_stage(&model, "End", StageKind::Release).is_some());
        assert!(mapped_stage(&model, "End", StageKind::Process).is_none());
        assert!(mapped_stage(&model, "End", StageKind::Transfer(TransferDir::Out)).is_none());
    }

    #[test]
    fn degenerate_exclusive_gateway_rejected() {
        let xml = r#"<definitions><process id="p">
            <startEvent id="s"/>
            <exclusiveGateway id="g" name="G"/>
            <task id="t" name="T"/>
            <sequenceFlow id="f1" sourceRef="s" targetRef="g"/>
            <sequenceFlow id="f2" sourceRef="g" targetRef="t"/>
        </process></definitions>"#;
        let parsed = parse_bpmn(xml).unwrap();
        assert!(matches!(
            map_bpmn(&parsed.graph),
            Err(MapError::DegenerateGateway(_))
        ));
    }

    #[test]
    fn one_in_one_out_parallel_gateway_rejected() {
        let xml = r#"<definitions><process id="p">
            <startEvent id="s"/>
            <parallelGateway id="g" name="G"/>
            <task id="t" name="T"/>
            <sequenceFlow id="f1" sourceRef="s" targetRef="g"/>
            <sequenceFlow id="f2" sourceRef="g" targetRef="t"/>
        </process></definitions>"#;
        let parsed = parse_bpmn(xml).unwrap();
        assert!(matches!(
            map_bpmn(&parsed.graph),
            Err(MapError::DegenerateGateway(_))
        ));
    }

    #[test]
    fn name_collisions_get_suffixes() {
        let xml = r#"<definitions><process id="p">
            <startEvent id="s" name="Go"/>
            <task id="t1" name="Same Name"/>
            <task id="t2" name="SameName"/>
            <sequenceFlow id="f1" sourceRef="s" targetRef="t1"/>
            <sequenceFlow id="f2" sourceRef="t1" targetRef="t2"/>
        </process></definitions>"#;
        let parsed = parse_bpmn(xml).unwrap();
        let (model, _) = map_bpmn(&parsed.graph).unwrap();
        let names: Vec<String> = model.thimacs().map(|t| t.name.clone()).collect();
        assert!(names.contains(&"SameName".to_owned()));
        assert!(names.contains(&"SameName_2".to_owned()));
    }
}

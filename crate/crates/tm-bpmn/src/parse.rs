//! Parser for the supported BPMN subset: task, startEvent, endEvent,
//! exclusiveGateway, parallelGateway and sequenceFlow, namespace
//! prefixes ignored. Anything else inside a process is reported by name
//! and skipped.

use std::collections::BTreeMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpmnNodeKind {
    Task,
    StartEvent,
    EndEvent,
    ExclusiveGateway,
    ParallelGateway,
}

impl BpmnNodeKind {
    fn from_element(local: &[u8]) -> Option<BpmnNodeKind> {
        Some(match local {
            b"task" => BpmnNodeKind::Task,
            b"startEvent" => BpmnNodeKind::StartEvent,
            b"endEvent" => BpmnNodeKind::EndEvent,
            b"exclusiveGateway" => BpmnNodeKind::ExclusiveGateway,
            b"parallelGateway" => BpmnNodeKind::ParallelGateway,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BpmnNode {
    pub id: String,
    pub name: String,
    pub kind: BpmnNodeKind,
}

#[derive(Debug, Clone)]
pub struct BpmnFlow {
    pub id: String,
    pub source: String,
    pub target: String,
}

/// A parsed process: nodes by id plus its sequence flows.
#[derive(Debug, Clone, Default)]
pub struct BpmnGraph {
    pub process_id: String,
    pub process_name: String,
    nodes: BTreeMap<String, BpmnNode>,
    flows: Vec<BpmnFlow>,
}

impl BpmnGraph {
    pub fn nodes(&self) -> impl Iterator<Item = &BpmnNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&BpmnNode> {
        self.nodes.get(id)
    }

    pub fn flows(&self) -> &[BpmnFlow] {
        &self.flows
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn count_of(&self, kind: BpmnNodeKind) -> usize {
        self.nodes.values().filter(|n| n.kind == kind).count()
    }

    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a BpmnFlow> {
        self.flows.iter().filter(move |f| f.target == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a BpmnFlow> {
        self.flows.iter().filter(move |f| f.source == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    UnsupportedElement,
    DroppedFlow,
    ExtraProcess,
}

#[derive(Debug, Clone)]
pub struct BpmnDiagnostic {
    pub kind: DiagnosticKind,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum BpmnError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("no process element found")]
    NoProcess,
    #[error("process `{0}` has no start event")]
    MissingStartEvent(String),
    #[error("process `{0}` has {1} start events; exactly one is supported")]
    MultipleStartEvents(String, usize),
}

#[derive(Debug)]
pub struct BpmnParse {
    pub graph: BpmnGraph,
    pub diagnostics: Vec<BpmnDiagnostic>,
}

fn attr(e: &BytesStart<'_>, name: &str) -> Option<String> {
    e.attributes()
        .flatten()
        .find(|a| a.key.local_name().as_ref() == name.as_bytes())
        .and_then(|a| a.unescape_value().ok().map(|v| v.into_owned()))
}

/// Parse BPMN XML. Unsupported elements become diagnostics; malformed
/// XML and start-event violations are hard errors.
pub fn parse_bpmn(xml: &str) -> Result<BpmnParse, BpmnError> {
    let mut reader = Reader::from_str(xml);
    let mut graph = BpmnGraph::default();
    let mut diagnostics = Vec::new();
    let mut in_process = false;
    let mut seen_process = false;

    loop {
        let event = reader
            .read_event()
            .map_err(|e| BpmnError::Xml(e.to_string()))?;
        let (e, is_empty) = match event {
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            Event::End(e) => {
                if e.local_name().as_ref() == b"process" {
                    in_process = false;
                }
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        {
            {
                let local = e.local_name().as_ref().to_vec();
                match local.as_slice() {
                    b"definitions" => {}
                    b"process" if !seen_process => {
                        seen_process = true;
                        in_process = !is_empty;
                        graph.process_id = attr(&e, "id").unwrap_or_default();
                        graph.process_name = attr(&e, "name").unwrap_or_default();
                    }
                    b"process" => {
                        diagnostics.push(BpmnDiagnostic {
                            kind: DiagnosticKind::ExtraProcess,
                            detail: format!(
                                "additional process `{}` ignored",
                                attr(&e, "id").unwrap_or_default()
                            ),
                        });
                        if !is_empty {
                            skip_subtree(&mut reader, &local)?;
                        }
                    }
                    b"sequenceFlow" if in_process => {
                        let id = attr(&e, "id").unwrap_or_default();
                        let source = attr(&e, "sourceRef").unwrap_or_default();
                        let target = attr(&e, "targetRef").unwrap_or_default();
                        graph.flows.push(BpmnFlow { id, source, target });
                        if !is_empty {
                            skip_subtree(&mut reader, &local)?;
                        }
                    }
                    other if in_process => {
                        match BpmnNodeKind::from_element(other) {
                            Some(kind) => {
                                let id = attr(&e, "id").unwrap_or_default();
                                let name = attr(&e, "name").unwrap_or_default();
                                graph.nodes.insert(id.clone(), BpmnNode { id, name, kind });
                            }
                            None => {
                                diagnostics.push(BpmnDiagnostic {
                                    kind: DiagnosticKind::UnsupportedElement,
                                    detail: format!(
                                        "unsupported element `{}` skipped",
                                        String::from_utf8_lossy(other)
                                    ),
                                });
                            }
                        }
                        if !is_empty {
                            skip_subtree(&mut reader, &local)?;
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    if !seen_process {
        return Err(BpmnError::NoProcess);
    }
    // drop flows whose endpoints were skipped or never declared
    let nodes = &graph.nodes;
    let mut dropped = Vec::new();
    graph.flows.retain(|f| {
        let ok = nodes.contains_key(&f.source) && nodes.contains_key(&f.target);
        if !ok {
            dropped.push(f.id.clone());
        }
        ok
    });
    for id in dropped {
        diagnostics.push(BpmnDiagnostic {
            kind: DiagnosticKind::DroppedFlow,
            detail: format!("sequence flow `{id}` references a missing or skipped node"),
        });
    }
    let starts = graph.count_of(BpmnNodeKind::StartEvent);
    if starts == 0 {
        return Err(BpmnError::MissingStartEvent(graph.process_id));
    }
    if starts > 1 {
        return Err(BpmnError::MultipleStartEvents(graph.process_id, starts));
    }
    Ok(BpmnParse { graph, diagnostics })
}

fn skip_subtree(reader: &mut Reader<&[u8]>, local: &[u8]) -> Result<(), BpmnError> {
    // consume until the matching end tag, ignoring nested content
    let mut depth = 1usize;
    loop {
        match reader
            .read_event()
            .map_err(|e| BpmnError::Xml(e.to_string()))?
        {
            Event::Start(e) if e.local_name().as_ref() == local => depth += 1,
            Event::End(e) if e.local_name().as_ref() == local => {
                depth -= 1;
                if depth == 0 {
                    return Ok(());
                }
            }
            Event::Eof => return Err(BpmnError::Xml("unexpected end of file".into())),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL" id="defs">
  <process id="p1" name="Minimal">
    <startEvent id="start" name="Start"/>
    <task id="t1" name="Work"/>
    <endEvent id="end" name="End"/>
    <sequenceFlow id="f1" sourceRef="start" targetRef="t1"/>
    <sequenceFlow id="f2" sourceRef="t1" targetRef="end"/>
  </process>
</definitions>"#;

    #[test]
    fn minimal_counts() {
        let parsed = parse_bpmn(MINIMAL).unwrap();
        assert!(parsed.diagnostics.is_empty());
        assert_eq!(parsed.graph.node_count(), 3);
        assert_eq!(parsed.graph.flows().len(), 2);
        assert_eq!(parsed.graph.process_name, "Minimal");
    }

    #[test]
    fn unsupported_elements_are_skipped_with_diagnostics() {
        let xml = r#"<definitions><process id="p" name="P">
            <startEvent id="s"/>
            <userTask id="u" name="Manual"><extension/></userTask>
            <task id="t" name="Auto"/>
            <sequenceFlow id="f1" sourceRef="s" targetRef="t"/>
            <sequenceFlow id="f2" sourceRef="t" targetRef="u"/>
        </process></definitions>"#;
        let parsed = parse_bpmn(xml).unwrap();
        let unsupported: Vec<_> = parsed
            .diagnostics
            .iter()
            .filter(|d| d.kind == DiagnosticKind::UnsupportedElement)
            .collect();
        assert_eq!(unsupported.len(), 1);
        assert!(unsupported[0].detail.contains("userTask"));
        // the flow into the skipped node is dropped, with a diagnostic
        assert_eq!(parsed.graph.flows().len(), 1);
        assert!(parsed
            .diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::DroppedFlow));
    }

    #[test]
    fn missing_start_event_is_an_error() {
        let xml = r#"<definitions><process id="p"><task id="t"/></process></definitions>"#;
        assert!(matches!(
            parse_bpmn(xml),
            Err(BpmnError::MissingStartEvent(_))
        ));
    }

    #[test]
    fn malformed_xml_is_an_error() {
        assert!(matches!(
            parse_bpmn("<definitions><process id='p'>"),
            Err(BpmnError::Xml(_))
                | Err(BpmnError::NoProcess)
                | Err(BpmnError::MissingStartEvent(_))
        ));
        assert!(matches!(
            parse_bpmn("not xml at < all"),
            Err(BpmnError::Xml(_)) | Err(BpmnError::NoProcess)
        ));
    }

    #[test]
    fn no_process_is_an_error() {
        assert!(matches!(
            parse_bpmn("<definitions></definitions>"),
            Err(BpmnError::NoProcess)
        ));
    }
}

//! BPMN subset importer: parse process XML and map it onto a
//! thinging-machine model plus behavior graph.

pub mod map;
pub mod order_case;
pub mod parse;

pub use map::{map_bpmn, MapError};
pub use order_case::{
    accept_payload, build_order_case, inject_stage, reject_payload, OrderCase, ORDER_CASE_XML,
};
pub use parse::{parse_bpmn, BpmnDiagnostic, BpmnError, BpmnGraph, BpmnNodeKind, BpmnParse};

//! The order-handling case study, imported from its BPMN source.
//!
//! `build_order_case` yields the shared static model and two
//! configurations over the same twelve events: `E20`, where billing and
//! shipping are simultaneously activated, and `E21`, where billing must
//! complete before shipping starts. The difference is one control-imposed
//! ordering edge; the static model is identical.

use tm_core::behavior::{EventId, OrderKind, OrderingEdge};
use tm_core::model::{StageId, StaticModel};
use tm_core::reconfig::Configuration;
use tm_core::trace::{Payload, PayloadValue};

use crate::map::map_bpmn;
use crate::parse::parse_bpmn;

/// BPMN source of the case study.
pub const ORDER_CASE_XML: &str = include_str!("../fixtures/order.xml");

/// Where root things of the case are injected.
pub const INJECT_STAGE: &str = "Start.create";

#[derive(Debug, Clone)]
pub struct OrderCase {
    pub model: StaticModel,
    pub e20: Configuration,
    pub e21: Configuration,
}

/// Import the case study and derive both configurations.
pub fn build_order_case() -> OrderCase {
    let parsed = parse_bpmn(ORDER_CASE_XML).expect("embedded fixture parses");
    assert!(
        parsed.diagnostics.is_empty(),
        "embedded fixture uses only supported elements"
    );
    let (model, behavior) = map_bpmn(&parsed.graph).expect("embedded fixture maps");
    let e21_behavior = behavior.with_extra_edges([OrderingEdge {
        from: EventId::new("Billing"),
        to: EventId::new("Shipping"),
        kind: OrderKind::Sequence,
    }]);
    OrderCase {
        model,
        e20: Configuration::new(
            "E20",
            behavior,
            "billing and shipping simultaneously activated",
        ),
        e21: Configuration::new(
            "E21",
            e21_behavior,
            "billing completes before shipping starts",
        ),
    }
}

/// Payload of an order that passes the checks: item and shipping costs
/// plus the decision to proceed to the parallel block.
pub fn accept_payload() -> Payload {
    let mut payload = Payload::new();
    payload.insert(
        "item_costs".into(),
        PayloadValue::MoneyList(vec!["30".parse().unwrap(), "20".parse().unwrap()]),
    );
    payload.insert(
        "shipping_costs".into(),
        PayloadValue::Money("10".parse().unwrap()),
    );
    payload.insert(
        "choice:Decision".into(),
        PayloadValue::Text("SplitShipBill".into()),
    );
    payload
}

/// Payload of an order the decision gateway rejects.
pub fn reject_payload() -> Payload {
    let mut payload = accept_payload();
    payload.insert(
        "choice:Decision".into(),
        PayloadValue::Text("RejectOrder".into()),
    );
    payload
}

pub fn inject_stage() -> StageId {
    StageId::new(INJECT_STAGE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tm_core::behavior::validate_behavior;

    #[test]
    fn shared_model_and_event_sets() {
        let case = build_order_case();
        assert!(case.model.validate().is_clean());
        assert_eq!(case.e20.behavior.event_ids(), case.e21.behavior.event_ids());
        assert_eq!(case.e20.behavior.event_ids().len(), 12);
    }

    #[test]
    fn e21_adds_exactly_the_billing_shipping_sequence() {
        let case = build_order_case();
        let e20: Vec<_> = case.e20.behavior.edges().to_vec();
        let e21: Vec<_> = case.e21.behavior.edges().to_vec();
        let extra: Vec<_> = e21.iter().filter(|e| !e20.contains(e)).collect();
        assert_eq!(extra.len(), 1);
        assert_eq!(extra[0].from, EventId::new("Billing"));
        assert_eq!(extra[0].to, EventId::new("Shipping"));
        assert_eq!(extra[0].kind, OrderKind::Sequence);
        assert!(e20.iter().all(|e| e21.contains(e)));
    }

    #[test]
    fn both_configs_validate_and_extra_edge_is_control_imposed() {
        let case = build_order_case();
        assert!(!validate_behavior(&case.model, &case.e20.behavior).has_errors());
        let report = validate_behavior(&case.model, &case.e21.behavior);
        assert!(!report.has_errors());
        assert!(report
            .violations
            .iter()
            .any(|v| v.subject == "Billing->Shipping"));
    }

    #[test]
    fn parallel_block_encloses_billing_and_shipping() {
        let case = build_order_case();
        let edges = case.e20.behavior.edges();
        let splits: Vec<_> = edges
            .iter()
            .filter(|e| e.kind == OrderKind::ParallelSplit)
            .collect();
        let joins: Vec<_> = edges
            .iter()
            .filter(|e| e.kind == OrderKind::ParallelJoin)
            .collect();
        assert_eq!(splits.len(), 2);
        assert_eq!(joins.len(), 2);
        let split_targets: Vec<&str> = splits.iter().map(|e| e.to.as_str()).collect();
        assert!(split_targets.contains(&"Billing"));
        assert!(split_targets.contains(&"Shipping"));
        let join_sources: Vec<&str> = joins.iter().map(|e| e.from.as_str()).collect();
        assert!(join_sources.contains(&"Billing"));
        assert!(join_sources.contains(&"Shipping"));
        // one split/join pair: each set shares a single gateway event
        assert!(splits.iter().all(|e| e.from == splits[0].from));
        assert!(joins.iter().all(|e| e.to == joins[0].to));
    }
}

//! Canonical .tm text for a model: nested thimac blocks with stages in
//! a fixed kind order, then all flows and triggers at top level with
//! absolute references. Printing then reparsing reproduces the model.

use tm_core::model::{StageKind, StaticModel, Thimac, TransferDir};

const KIND_ORDER: [StageKind; 6] = [
    StageKind::Create,
    StageKind::Process,
    StageKind::Release,
    StageKind::Receive,
    StageKind::Transfer(TransferDir::In),
    StageKind::Transfer(TransferDir::Out),
];

pub fn print_tm(model: &StaticModel) -> String {
    let mut out = String::new();
    let roots: Vec<&Thimac> = model.thimacs().filter(|t| t.parent.is_none()).collect();
    for thimac in roots {
        print_thimac(model, thimac, 0, &mut out);
    }
    for flow in model.flows() {
        out.push_str(&format!("flow {} -> {};\n", flow.from, flow.to));
    }
    for trigger in model.triggers() {
        out.push_str(&format!("trigger {} -> {};\n", trigger.from, trigger.to));
    }
    out
}

fn print_thimac(model: &StaticModel, thimac: &Thimac, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    out.push_str(&format!("{pad}thimac {} {{\n", thimac.name));
    for kind in KIND_ORDER {
        if model.stage_of(&thimac.id, kind).is_some() {
            out.push_str(&format!("{pad}  {};\n", kind.token()));
        }
    }
    let children: Vec<&Thimac> = model
        .thimacs()
        .filter(|t| t.parent.as_ref() == Some(&thimac.id))
        .collect();
    for child in children {
        print_thimac(model, child, depth + 1, out);
    }
    out.push_str(&format!("{pad}}}\n"));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;

    #[test]
    fn print_parse_fixpoint() {
        let source = "thimac Order {\n  create; process;\n  thimac Form { create; release; transfer_out; }\n}\nthimac Bank { transfer_in; receive; }\nflow Order.Form.transfer_out -> Bank.transfer_in;\ntrigger Order.process -> Bank.receive;";
        let (model, diags) = parse_model(source);
        assert!(diags.is_empty());
        let printed = print_tm(&model);
        let (reparsed, diags2) = parse_model(&printed);
        assert!(
            diags2.is_empty(),
            "printed text reparses: {diags2:?}\n{printed}"
        );
        assert_eq!(model, reparsed);
        // printing is deterministic
        assert_eq!(printed, print_tm(&reparsed));
    }
}

//! Graphviz DOT rendering: one cluster per thimac (nested clusters for
//! nested thimacs), solid arrows for flows, dashed for triggers. Output
//! is deterministic for equal inputs.

use std::collections::BTreeSet;

use tm_core::behavior::{BehaviorGraph, OrderKind};
use tm_core::model::{StaticModel, Thimac, ThimacId};

#[derive(Debug, Clone, Default)]
pub struct DotOptions {
    /// Thimacs drawn filled, e.g. the settle node of a lattice.
    pub highlight: BTreeSet<ThimacId>,
}

pub fn render_dot(model: &StaticModel) -> String {
    render_dot_with(model, &DotOptions::default())
}

pub fn render_dot_with(model: &StaticModel, options: &DotOptions) -> String {
    let mut out = String::new();
    out.push_str("digraph tm {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n");
    for thimac in model.thimacs().filter(|t| t.parent.is_none()) {
        render_cluster(model, thimac, options, 1, &mut out);
    }
    for flow in model.flows() {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [style=solid];\n",
            flow.from, flow.to
        ));
    }
    for trigger in model.triggers() {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [style=dashed];\n",
            trigger.from, trigger.to
        ));
    }
    out.push_str("}\n");
    out
}

fn render_cluster(
    model: &StaticModel,
    thimac: &Thimac,
    options: &DotOptions,
    depth: usize,
    out: &mut String,
) {
    let pad = "  ".repeat(depth);
    out.push_str(&format!("{pad}subgraph \"cluster_{}\" {{\n", thimac.id));
    out.push_str(&format!("{pad}  label=\"{}\";\n", thimac.name));
    if options.highlight.contains(&thimac.id) {
        out.push_str(&format!("{pad}  style=filled;\n{pad}  color=lightgrey;\n"));
    }
    for stage_id in &thimac.stages {
        if let Some(stage) = model.stage(stage_id) {
            out.push_str(&format!(
                "{pad}  \"{}\" [label=\"{}\"];\n",
                stage.id,
                stage.kind.token()
            ));
        }
    }
    for child in model
        .thimacs()
        .filter(|t| t.parent.as_ref() == Some(&thimac.id))
    {
        render_cluster(model, child, options, depth + 1, out);
    }
    out.push_str(&format!("{pad}}}\n"));
}

/// Behavior graphs render as plain digraphs: events as ellipses, edges
/// labeled by their ordering kind, choices dashed.
pub fn render_behavior_dot(graph: &BehaviorGraph) -> String {
    let mut out = String::new();
    out.push_str("digraph behavior {\n  rankdir=LR;\n  node [shape=ellipse, fontsize=10];\n");
    for event in graph.events() {
        let shape = if graph.initial().contains(&event.id) {
            " peripheries=2"
        } else {
            ""
        };
        out.push_str(&format!(
            "  \"{}\" [label=\"{}\"{shape}];\n",
            event.id, event.id
        ));
    }
    let mut edges: Vec<_> = graph.edges().to_vec();
    edges.sort();
    for edge in edges {
        let label = match edge.kind {
            OrderKind::Sequence => "seq",
            OrderKind::ParallelSplit => "split",
            OrderKind::ParallelJoin => "join",
            OrderKind::Choice => "choice",
        };
        let style = if edge.kind == OrderKind::Choice {
            "dashed"
        } else {
            "solid"
        };
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"{label}\", style={style}];\n",
            edge.from, edge.to
        ));
    }
    out.push_str("}\n");
    out
}

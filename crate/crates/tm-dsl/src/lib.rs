//! Textual front-end and serializers for thinging-machine models.
//!
//! - [`parser`] — the .tm language: thimac blocks, stage declarations,
//!   flow and trigger edges, with span-carrying diagnostics.
//! - [`printer`] — canonical .tm text back out of a model.
//! - [`json`] — canonical JSON for models and behavior graphs.
//! - [`dot`] — Graphviz renderings.

pub mod diag;
pub mod dot;
pub mod json;
mod lexer;
pub mod parser;
pub mod printer;

pub use diag::{Diagnostic, Severity, SourceSpan};
pub use dot::{render_behavior_dot, render_dot, render_dot_with, DotOptions};
pub use json::{behavior_from_json, behavior_to_json, model_from_json, model_to_json, JsonError};
pub use parser::{parse_model, parse_model_named};
pub use printer::print_tm;

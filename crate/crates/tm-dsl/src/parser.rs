//! Recursive-descent parser for the .tm model language.
//!
//! ```text
//! model   := item*
//! item    := thimac | edge
//! thimac  := "thimac" NAME "{" (stage | thimac | edge)* "}"
//! stage   := ("create" | "process" | "release" | "receive"
//!             | "transfer_in" | "transfer_out") ";"?
//! edge    := ("flow" | "trigger") path "->" path ";"?
//! path    := NAME ("." NAME)* "." STAGE | STAGE
//! ```
//!
//! Semicolons are separators, not terminators, and may be omitted.
//! Inside a thimac, paths resolve against the enclosing thimac first and
//! fall back to the model root. Every problem — syntax or model
//! legality — comes back as a diagnostic; no input text panics.

use tm_core::model::{StageId, StageKind, StaticModel, ThimacId};

use crate::diag::{Diagnostic, SourceSpan};
use crate::lexer::{tokenize, Token, TokenKind};

struct PathRef {
    segments: Vec<String>,
    span: SourceSpan,
}

struct EdgeDecl {
    trigger: bool,
    from: PathRef,
    to: PathRef,
    /// Thimac path of the enclosing scope, outermost first.
    scope: Vec<String>,
}

enum StageOrNest {
    Stage(StageKind, SourceSpan),
    Nest(ThimacDecl),
}

struct ThimacDecl {
    name: String,
    span: SourceSpan,
    members: Vec<StageOrNest>,
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    file: String,
    diagnostics: Vec<Diagnostic>,
    thimacs: Vec<ThimacDecl>,
    edges: Vec<EdgeDecl>,
}

/// Parse .tm source into a model plus diagnostics, using `<input>` as
/// the file name.
pub fn parse_model(text: &str) -> (StaticModel, Vec<Diagnostic>) {
    parse_model_named("<input>", text)
}

pub fn parse_model_named(file: &str, text: &str) -> (StaticModel, Vec<Diagnostic>) {
    let tokens = tokenize(file, text);
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        file: file.to_owned(),
        diagnostics: Vec::new(),
        thimacs: Vec::new(),
        edges: Vec::new(),
    };
    parser.parse_items(&mut Vec::new(), false);
    let mut model = StaticModel::new("");
    parser.declare_thimacs(&mut model);
    parser.apply_edges(&mut model);
    let mut diagnostics = parser.diagnostics;
    diagnostics.sort_by(|a, b| a.span.cmp(&b.span).then_with(|| a.message.cmp(&b.message)));
    (model, diagnostics)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn eof_span(&self) -> SourceSpan {
        self.tokens
            .last()
            .map(|t| t.span.clone())
            .unwrap_or(SourceSpan {
                file: self.file.clone(),
                line: 1,
                column: 1,
            })
    }

    fn error_at(&mut self, span: SourceSpan, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic::error(span, message));
    }

    /// Skip to the next plausible statement start after a syntax error.
    fn recover(&mut self) {
        while let Some(tok) = self.peek() {
            match &tok.kind {
                TokenKind::Semi => {
                    self.pos += 1;
                    return;
                }
                TokenKind::RBrace => return,
                TokenKind::Ident(id) if id == "thimac" || id == "flow" || id == "trigger" => {
                    return;
                }
                _ => self.pos += 1,
            }
        }
    }

    /// `scope` is the thimac path enclosing the items; `nested` marks a
    /// thimac body (terminated by `}`) as opposed to top level.
    /// Returns collected members when nested.
    fn parse_items(&mut self, scope: &mut Vec<String>, nested: bool) -> Vec<StageOrNest> {
        let mut members = Vec::new();
        loop {
            let Some(tok) = self.peek() else {
                if nested {
                    let span = self.eof_span();
                    self.error_at(span, "unexpected end of input: missing `}`");
                }
                return members;
            };
            let span = tok.span.clone();
            match tok.kind.clone() {
                TokenKind::RBrace if nested => {
                    self.pos += 1;
                    return members;
                }
                TokenKind::RBrace => {
                    self.pos += 1;
                    self.error_at(span, "unmatched `}`");
                }
                TokenKind::Semi => {
                    self.pos += 1;
                }
                TokenKind::Ident(word) => match word.as_str() {
                    "thimac" => {
                        self.pos += 1;
                        if let Some(decl) = self.parse_thimac(scope) {
                            if nested {
                                members.push(StageOrNest::Nest(decl));
                            } else {
                                self.thimacs.push(decl);
                            }
                        }
                    }
                    "flow" | "trigger" => {
                        self.pos += 1;
                        self.parse_edge(word == "trigger", scope.clone());
                    }
                    stage_word => match StageKind::from_token(stage_word) {
                        Some(kind) if nested => {
                            self.pos += 1;
                            members.push(StageOrNest::Stage(kind, span));
                        }
                        Some(_) => {
                            self.pos += 1;
                            self.error_at(
                                span,
                                format!("stage `{stage_word}` declared outside a thimac"),
                            );
                        }
                        None if stage_word == "transfer" => {
                            self.pos += 1;
                            self.error_at(
                                span,
                                "transfer ports are directional: use `transfer_in` or `transfer_out`",
                            );
                        }
                        None => {
                            self.pos += 1;
                            self.error_at(
                                span,
                                format!("expected `thimac`, a stage, `flow` or `trigger`; found `{stage_word}`"),
                            );
                            self.recover();
                        }
                    },
                },
                other => {
                    self.pos += 1;
                    self.error_at(span, format!("unexpected token {other:?}"));
                    self.recover();
                }
            }
        }
    }

    fn parse_thimac(&mut self, scope: &mut Vec<String>) -> Option<ThimacDecl> {
        let (name, span) = match self.bump() {
            Some(Token {
                kind: TokenKind::Ident(name),
                span,
            }) => (name.clone(), span.clone()),
            Some(tok) => {
                let span = tok.span.clone();
                self.error_at(span, "expected a thimac name after `thimac`");
                self.recover();
                return None;
            }
            None => {
                let span = self.eof_span();
                self.error_at(span, "expected a thimac name after `thimac`");
                return None;
            }
        };
        match self.peek() {
            Some(Token {
                kind: TokenKind::LBrace,
                ..
            }) => {
                self.pos += 1;
            }
            _ => {
                self.error_at(span.clone(), format!("expected `{{` after `thimac {name}`"));
                self.recover();
                return None;
            }
        }
        scope.push(name.clone());
        let members = self.parse_items(scope, true);
        scope.pop();
        Some(ThimacDecl {
            name,
            span,
            members,
        })
    }

    fn parse_path(&mut self) -> Option<PathRef> {
        let (first, span) = match self.bump() {
            Some(Token {
                kind: TokenKind::Ident(seg),
                span,
            }) => (seg.clone(), span.clone()),
            Some(tok) => {
                let span = tok.span.clone();
                self.error_at(span, "expected a stage reference");
                return None;
            }
            None => {
                let span = self.eof_span();
                self.error_at(span, "expected a stage reference");
                return None;
            }
        };
        let mut segments = vec![first];
        while matches!(
            self.peek(),
            Some(Token {
                kind: TokenKind::Dot,
                ..
            })
        ) {
            self.pos += 1;
            match self.bump() {
                Some(Token {
                    kind: TokenKind::Ident(seg),
                    ..
                }) => segments.push(seg.clone()),
                _ => {
                    self.error_at(span.clone(), "expected a name after `.`");
                    return None;
                }
            }
        }
        Some(PathRef { segments, span })
    }

    fn parse_edge(&mut self, trigger: bool, scope: Vec<String>) {
        let Some(from) = self.parse_path() else {
            self.recover();
            return;
        };
        match self.peek() {
            Some(Token {
                kind: TokenKind::Arrow,
                ..
            }) => {
                self.pos += 1;
            }
            _ => {
                self.error_at(from.span.clone(), "expected `->` in edge");
                self.recover();
                return;
            }
        }
        let Some(to) = self.parse_path() else {
            self.recover();
            return;
        };
        self.edges.push(EdgeDecl {
            trigger,
            from,
            to,
            scope,
        });
    }

    // ---- model building ----------------------------------------------

    fn declare_thimacs(&mut self, model: &mut StaticModel) {
        let decls = std::mem::take(&mut self.thimacs);
        for decl in &decls {
            self.declare_one(model, decl, None);
        }
        self.thimacs = decls;
    }

    fn declare_one(
        &mut self,
        model: &mut StaticModel,
        decl: &ThimacDecl,
        parent: Option<&ThimacId>,
    ) {
        let id = match model.add_thimac(&decl.name, parent) {
            Ok(id) => id,
            Err(err) => {
                self.diagnostics
                    .push(Diagnostic::error(decl.span.clone(), err.to_string()));
                return;
            }
        };
        for member in &decl.members {
            match member {
                StageOrNest::Stage(kind, span) => {
                    if let Err(err) = model.add_stage(&id, *kind) {
                        self.diagnostics
                            .push(Diagnostic::error(span.clone(), err.to_string()));
                    }
                }
                StageOrNest::Nest(nested) => self.declare_one(model, nested, Some(&id)),
            }
        }
    }

    fn apply_edges(&mut self, model: &mut StaticModel) {
        let edges = std::mem::take(&mut self.edges);
        for edge in &edges {
            let Some(from) = self.resolve(model, &edge.scope, &edge.from) else {
                continue;
            };
            let Some(to) = self.resolve(model, &edge.scope, &edge.to) else {
                continue;
            };
            let result = if edge.trigger {
                model.add_trigger(&from, &to).map(|_| ())
            } else {
                model.add_flow(&from, &to).map(|_| ())
            };
            if let Err(err) = result {
                self.diagnostics
                    .push(Diagnostic::error(edge.from.span.clone(), err.to_string()));
            }
        }
        self.edges = edges;
    }

    /// Resolve a dotted reference: the final segment names the stage,
    /// anything before it names a thimac, first relative to the enclosing
    /// scope and then from the root.
    fn resolve(
        &mut self,
        model: &StaticModel,
        scope: &[String],
        path: &PathRef,
    ) -> Option<StageId> {
        let (stage_seg, thimac_segs) = path.segments.split_last().expect("paths are non-empty");
        let Some(kind) = StageKind::from_token(stage_seg) else {
            self.diagnostics.push(Diagnostic::error(
                path.span.clone(),
                format!(
                    "`{}` is not a stage; references end in a stage token",
                    stage_seg
                ),
            ));
            return None;
        };
        let mut candidates = Vec::new();
        if !scope.is_empty() {
            let mut segs = scope.to_vec();
            segs.extend(thimac_segs.iter().cloned());
            candidates.push(segs.join("."));
        }
        if !thimac_segs.is_empty() {
            candidates.push(thimac_segs.join("."));
        }
        for candidate in &candidates {
            let id = ThimacId::new(candidate.clone());
            if model.thimac(&id).is_some() {
                if let Some(stage) = model.stage_of(&id, kind) {
                    return Some(stage.id.clone());
                }
                // thimac found but stage missing: keep looking at the
                // absolute candidate before giving up
            }
        }
        self.diagnostics.push(Diagnostic::error(
            path.span.clone(),
            format!("unknown stage `{}`", path.segments.join(".")),
        ));
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean(text: &str) -> StaticModel {
        let (model, diags) = parse_model(text);
        assert!(diags.is_empty(), "unexpected diagnostics: {diags:?}");
        model
    }

    #[test]
    fn minimal_model() {
        let model = clean("thimac Order { create; process; }\nflow Order.create -> Order.process;");
        assert_eq!(model.thimac_count(), 1);
        assert_eq!(model.stage_count(), 2);
        assert_eq!(model.flow_count(), 1);
        assert!(model.validate().is_clean());
    }

    #[test]
    fn duplicate_stage_kind_is_diagnosed_with_span() {
        let (_, diags) = parse_model("thimac Order { create create; }");
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("create"));
        assert_eq!(diags[0].span.line, 1);
    }

    #[test]
    fn nested_thimacs_and_relative_references() {
        let model = clean(
            "thimac Order {\n  thimac Form { create; process; }\n  flow Form.create -> Form.process;\n}",
        );
        assert_eq!(model.thimac_count(), 2);
        assert!(model.thimac(&ThimacId::new("Order.Form")).is_some());
        assert_eq!(model.flow_count(), 1);
        let flow = model.flows().next().unwrap();
        assert_eq!(flow.from.as_str(), "Order.Form.create");
    }

    #[test]
    fn bare_stage_reference_inside_thimac() {
        let model = clean("thimac A { create; process; flow create -> process; }");
        assert_eq!(model.flow_count(), 1);
    }

    #[test]
    fn semicolons_are_optional() {
        let model = clean("thimac A { create process }\nflow A.create -> A.process");
        assert_eq!(model.stage_count(), 2);
        assert_eq!(model.flow_count(), 1);
    }

    #[test]
    fn illegal_flow_surfaces_as_diagnostic() {
        let (model, diags) =
            parse_model("thimac A { process; transfer_out; }\nflow A.process -> A.transfer_out;");
        assert_eq!(model.flow_count(), 0);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("illegal flow"));
    }

    #[test]
    fn transfer_needs_direction() {
        let (_, diags) = parse_model("thimac A { transfer; }");
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("transfer_in"));
    }

    #[test]
    fn unknown_references_and_syntax_recovery() {
        let (model, diags) =
            parse_model("thimac A { create; }\nflow A.create -> B.process;\nthimac C { process; }");
        // the parser recovered and still built C
        assert_eq!(model.thimac_count(), 2);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("unknown stage"));
    }

    #[test]
    fn diagnostics_are_ordered_by_span() {
        let (_, diags) =
            parse_model("thimac A { create create; }\nthimac A { }\nflow X.create -> A.create;");
        assert!(diags.len() >= 3);
        for pair in diags.windows(2) {
            assert!(pair[0].span <= pair[1].span);
        }
    }

    #[test]
    fn garbage_never_panics() {
        for text in [
            "{}{}{",
            "thimac",
            "flow ->",
            "thimac A { flow -> }",
            "@@@@",
            "thimac A {",
        ] {
            let (_, diags) = parse_model(text);
            assert!(!diags.is_empty());
        }
    }
}

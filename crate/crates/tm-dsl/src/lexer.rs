//! Tokenizer for .tm sources. Comments run from `#` to end of line.

use crate::diag::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    LBrace,
    RBrace,
    Semi,
    Dot,
    Arrow,
    /// Anything the lexer cannot place; surfaced as a diagnostic by the
    /// parser, never a crash.
    Unexpected(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

pub fn tokenize(file: &str, text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line: u32 = 1;
    let mut column: u32 = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let span = SourceSpan {
            file: file.to_owned(),
            line,
            column,
        };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '{' => {
                chars.next();
                column += 1;
                tokens.push(Token {
                    kind: TokenKind::LBrace,
                    span,
                });
            }
            '}' => {
                chars.next();
                column += 1;
                tokens.push(Token {
                    kind: TokenKind::RBrace,
                    span,
                });
            }
            ';' => {
                chars.next();
                column += 1;
                tokens.push(Token {
                    kind: TokenKind::Semi,
                    span,
                });
            }
            '.' => {
                chars.next();
                column += 1;
                tokens.push(Token {
                    kind: TokenKind::Dot,
                    span,
                });
            }
            '-' => {
                chars.next();
                column += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    column += 1;
                    tokens.push(Token {
                        kind: TokenKind::Arrow,
                        span,
                    });
                } else {
                    tokens.push(Token {
                        kind: TokenKind::Unexpected('-'),
                        span,
                    });
                }
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                        column += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(ident),
                    span,
                });
            }
            other => {
                chars.next();
                column += 1;
                tokens.push(Token {
                    kind: TokenKind::Unexpected(other),
                    span,
                });
            }
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_spans() {
        let toks = tokenize("t.tm", "thimac A {\n  create;\n}");
        assert_eq!(toks.len(), 6);
        assert_eq!(toks[0].kind, TokenKind::Ident("thimac".into()));
        assert_eq!(toks[3].kind, TokenKind::Ident("create".into()));
        assert_eq!(toks[3].span.line, 2);
        assert_eq!(toks[3].span.column, 3);
    }

    #[test]
    fn comments_and_arrows() {
        let toks = tokenize("t.tm", "# hello\nflow A.x -> B.y;");
        assert!(matches!(toks[0].kind, TokenKind::Ident(_)));
        assert!(toks.iter().any(|t| t.kind == TokenKind::Arrow));
    }

    #[test]
    fn stray_characters_are_tokens_not_panics() {
        let toks = tokenize("t.tm", "thimac @ A");
        assert!(toks
            .iter()
            .any(|t| matches!(t.kind, TokenKind::Unexpected('@'))));
    }
}

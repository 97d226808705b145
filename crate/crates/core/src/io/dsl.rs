//! Workload DSL.
//!
//! ```text
//! relation Account(N key, C)
//! template Deposit {
//!   R X:Account[N,C]
//!   U Z:Checking[C,B][B]
//! }
//! ```
//!
//! `#` starts a comment. The commit is implicit at the end of each template.
//! Diagnostic positions are 0-based.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{AttrSet, OpKind, Operation, Relation, Schema, Template, TemplateOp, Variable, Workload};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_alphanumeric() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: ln, column });
            } else if "(),{}[]:".contains(c) {
                out.push(Token { tok: Tok::Punct(c), line: ln, column });
                i += 1;
            } else {
                return Err(ParseError { line: ln, column, message: format!("unexpected character '{c}'") });
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = self.peek().map_or(self.end, |t| (t.line, t.column));
        ParseError { line, column, message: message.into() }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.error_here(format!("expected {what}, found {}", show(&t.tok)))),
            None => Err(self.error_here(format!("expected {what}, found end of input"))),
        }
    }

    fn punct(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Punct(p), .. }) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error_here(format!("expected '{c}', found {}", show(&t.tok)))),
            None => Err(self.error_here(format!("expected '{c}', found end of input"))),
        }
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(p), .. }) if *p == c)
    }

    fn attr_list(&mut self) -> Result<AttrSet, ParseError> {
        self.punct('[')?;
        let mut set = AttrSet::new();
        if self.at_punct(']') {
            self.pos += 1;
            return Ok(set);
        }
        loop {
            let start = self.pos;
            let a = self.ident("attribute name")?;
            if !set.insert(a.clone()) {
                self.pos = start;
                return Err(self.error_here(format!("duplicate attribute {a}")));
            }
            if self.at_punct(',') {
                self.pos += 1;
            } else {
                self.punct(']')?;
                return Ok(set);
            }
        }
    }

    fn relation(&mut self) -> Result<Relation, ParseError> {
        let name = self.ident("relation name")?;
        self.punct('(')?;
        let mut attrs = Vec::new();
        loop {
            let attr = self.ident("attribute name")?;
            let is_key = matches!(self.peek(), Some(Token { tok: Tok::Ident(k), .. }) if k == "key");
            if is_key {
                self.pos += 1;
            }
            attrs.push((attr, is_key));
            if self.at_punct(',') {
                self.pos += 1;
            } else {
                self.punct(')')?;
                break;
            }
        }
        Ok(Relation::new(name, attrs))
    }

    fn operation(&mut self) -> Result<TemplateOp, ParseError> {
        let kind = match self.ident("operation kind")?.as_str() {
            "R" => OpKind::Read,
            "W" => OpKind::Write,
            "U" => OpKind::Update,
            other => {
                self.pos -= 1;
                return Err(self.error_here(format!("unknown operation kind '{other}' (expected R, W or U)")));
            }
        };
        let var = self.ident("variable name")?;
        self.punct(':')?;
        let rel = self.ident("relation name")?;
        let first = self.attr_list()?;
        let target = Variable::new(var, rel);
        Ok(match kind {
            OpKind::Read => Operation::read(target, first),
            OpKind::Write => Operation::write(target, first),
            _ => {
                let second = self.attr_list()?;
                Operation::update(target, first, second)
            }
        })
    }

    fn template(&mut self) -> Result<Template, ParseError> {
        let name = self.ident("template name")?;
        self.punct('{')?;
        let mut body = Vec::new();
        while !self.at_punct('}') {
            if self.peek().is_none() {
                return Err(self.error_here("unterminated template body"));
            }
            body.push(self.operation()?);
        }
        self.pos += 1;
        Template::new(name, body).map_err(|e| self.error_here(e.to_string()))
    }
}

fn show(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Punct(c) => format!("'{c}'"),
    }
}

/// Parses a workload. Semantic checks are left to
/// [`crate::model::validate_workload`].
pub fn parse_workload(text: &str) -> Result<Workload, ParseError> {
    let tokens = lex(text)?;
    let end = (text.lines().count().saturating_sub(1), text.lines().last().map_or(0, |l| l.chars().count()));
    let mut p = Parser { tokens, pos: 0, end };
    let mut relations = Vec::new();
    let mut templates = Vec::new();
    while p.peek().is_some() {
        let start = p.pos;
        match p.ident("'relation' or 'template'")?.as_str() {
            "relation" => {
                if !templates.is_empty() {
                    p.pos = start;
                    return Err(p.error_here("relations must be declared before templates"));
                }
                relations.push(p.relation()?);
            }
            "template" => {
                let name_pos = p.pos;
                let t = p.template()?;
                if templates.iter().any(|x: &Template| x.name() == t.name()) {
                    p.pos = name_pos;
                    return Err(p.error_here(format!("duplicate template {}", t.name())));
                }
                templates.push(t);
            }
            other => {
                p.pos = start;
                return Err(p.error_here(format!("expected 'relation' or 'template', found '{other}'")));
            }
        }
    }
    Ok(Workload::new(Schema::new(relations), templates))
}

/// Schema order first, then any attributes the schema does not declare.
fn attr_list(out: &mut String, set: &AttrSet, relation: Option<&Relation>) {
    let mut names: Vec<&str> = Vec::new();
    if let Some(r) = relation {
        names.extend(r.attributes.iter().map(|a| a.name.as_str()).filter(|a| set.contains(a)));
    }
    let extra: Vec<&str> = set.iter().filter(|a| !names.contains(a)).collect();
    names.extend(extra);
    out.push('[');
    out.push_str(&names.join(","));
    out.push(']');
}

/// Renders a workload in the DSL; [`parse_workload`] reads it back unchanged.
pub fn print_workload(workload: &Workload) -> String {
    let mut out = String::new();
    for r in &workload.schema.relations {
        let attrs: Vec<String> =
            r.attributes.iter().map(|a| if a.is_key { format!("{} key", a.name) } else { a.name.clone() }).collect();
        let _ = writeln!(out, "relation {}({})", r.name, attrs.join(", "));
    }
    for t in &workload.templates {
        out.push('\n');
        let _ = writeln!(out, "template {} {{", t.name());
        for op in t.body() {
            let var = op.target.as_ref().expect("body operation has a target");
            let _ = write!(out, "  {} {}:{}", op.kind.symbol(), var.name, var.relation);
            let rel = workload.schema.relation(&var.relation);
            match op.kind {
                OpKind::Read => attr_list(&mut out, &op.read_set, rel),
                OpKind::Write => attr_list(&mut out, &op.write_set, rel),
                _ => {
                    attr_list(&mut out, &op.read_set, rel);
                    attr_list(&mut out, &op.write_set, rel);
                }
            }
            out.push('\n');
        }
        out.push_str("}\n");
    }
    out
}

/// Wrapper that displays a workload in DSL form.
pub struct Dsl<'a>(pub &'a Workload);

impl fmt::Display for Dsl<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_workload(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_empty_workload() {
        let w = parse_workload("# nothing\n\n").unwrap();
        assert!(w.templates.is_empty() && w.schema.relations.is_empty());
    }

    #[test]
    fn round_trip() {
        let text = "relation S(x, k key)\n\ntemplate T {\n  R X:S[x,k]\n  W Y:S[x]\n  U X:S[x][x]\n}\n";
        let w = parse_workload(text).unwrap();
        assert_eq!(print_workload(&w), text);
        assert_eq!(parse_workload(&print_workload(&w)).unwrap(), w);
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_workload("relation S(k key)\ntemplate T {\n  Q X:S[k]\n}").unwrap_err();
        assert_eq!((err.line, err.column), (2, 2));
        let err = parse_workload("relation S(k key)\ntemplate T {\n  R X:S[k]\n").unwrap_err();
        assert!(err.message.contains("unterminated"), "{err}");
        let err = parse_workload("relation S(k key) %").unwrap_err();
        assert_eq!((err.line, err.column), (0, 18));
    }
}

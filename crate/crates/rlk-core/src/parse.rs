//! Textual syntax shared by all file formats.
//!
//! Terms and atoms are written `ident` or `ident(t1, ..., tn)`. Identifiers
//! starting with an uppercase letter or underscore are variables; all other
//! identifiers name constants, functions, or predicates. Whitespace is
//! insignificant and `#` starts a comment running to end of line.
//!
//! Fact files hold one ground atom per line, terminated by `.`. Rule files
//! hold clauses `A1, ..., An -> C.`; a bare `C.` is a fact clause (which may
//! contain variables). Signature files hold one `name/arity` declaration per
//! line.

use std::fmt;

use thiserror::Error;

use crate::term::{Atom, Clause, RuleSet, Signature, Term};

/// A syntax or symbol-consistency error with source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}: {}", self.line, self.col, self.msg)
    }
}

fn err<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        col,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokKind {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Arrow,
    Dot,
}

#[derive(Debug, Clone)]
struct Tok {
    kind: TokKind,
    line: usize,
    col: usize,
}

/// True for identifiers the term syntax treats as variables.
pub fn is_variable_name(name: &str) -> bool {
    name.chars()
        .next()
        .is_some_and(|c| c.is_ascii_uppercase() || c == '_')
}

fn lex(src: &str) -> Result<(Vec<Tok>, (usize, usize)), ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' | ')' | ',' | '.' => {
                let kind = match c {
                    '(' => TokKind::LParen,
                    ')' => TokKind::RParen,
                    ',' => TokKind::Comma,
                    _ => TokKind::Dot,
                };
                toks.push(Tok { kind, line, col });
                chars.next();
                col += 1;
            }
            '-' => {
                let (l, c0) = (line, col);
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    toks.push(Tok {
                        kind: TokKind::Arrow,
                        line: l,
                        col: c0,
                    });
                } else {
                    return err(l, c0, "expected '>' after '-'");
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let (l, c0) = (line, col);
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        name.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                toks.push(Tok {
                    kind: TokKind::Ident(name),
                    line: l,
                    col: c0,
                });
            }
            other => return err(line, col, format!("unexpected character '{other}'")),
        }
    }
    Ok((toks, (line, col)))
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    end: (usize, usize),
    /// Symbols seen so far; arity conflicts are reported at the use site.
    sig: Signature,
}

impl Parser {
    fn new(src: &str) -> Result<Parser, ParseError> {
        let (toks, end) = lex(src)?;
        Ok(Parser {
            toks,
            pos: 0,
            end,
            sig: Signature::new(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.end, |t| (t.line, t.col))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokKind, what: &str) -> Result<Tok, ParseError> {
        let (l, c) = self.here();
        match self.next() {
            Some(t) if t.kind == kind => Ok(t),
            _ => err(l, c, format!("expected {what}")),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        let (l, c) = self.here();
        match self.next() {
            Some(Tok {
                kind: TokKind::Ident(name),
                line,
                col,
            }) => Ok((name, line, col)),
            _ => err(l, c, format!("expected {what}")),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (name, l, c) = self.ident("a term")?;
        if is_variable_name(&name) {
            if self.peek().map(|t| &t.kind) == Some(&TokKind::LParen) {
                return err(l, c, format!("variable {name} cannot take arguments"));
            }
            return Ok(Term::var(name));
        }
        let mut args = Vec::new();
        if self.eat(&TokKind::LParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&TokKind::Comma) {
                    continue;
                }
                self.expect(TokKind::RParen, "')' or ','")?;
                break;
            }
        }
        if let Err(msg) = self.sig.declare_function(&name, args.len()) {
            return err(l, c, msg);
        }
        Ok(Term::app(name, args))
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let (name, l, c) = self.ident("a predicate")?;
        if is_variable_name(&name) {
            return err(l, c, format!("predicate name {name} cannot be a variable"));
        }
        let mut args = Vec::new();
        if self.eat(&TokKind::LParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&TokKind::Comma) {
                    continue;
                }
                self.expect(TokKind::RParen, "')' or ','")?;
                break;
            }
        }
        if let Err(msg) = self.sig.declare_predicate(&name, args.len()) {
            return err(l, c, msg);
        }
        Ok(Atom::new(name, args))
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let mut atoms = vec![self.atom()?];
        while self.eat(&TokKind::Comma) {
            atoms.push(self.atom()?);
        }
        if self.eat(&TokKind::Arrow) {
            let conclusion = self.atom()?;
            self.expect(TokKind::Dot, "'.'")?;
            return Ok(Clause::new(atoms, conclusion));
        }
        let (l, c) = self.here();
        if atoms.len() == 1 {
            self.expect(TokKind::Dot, "'.' or '->'")?;
            Ok(Clause::fact(atoms.pop().expect("one atom")))
        } else {
            err(l, c, "expected '->' after antecedent list")
        }
    }
}

/// Parses a single term; the entire input must be consumed.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.term()?;
    let (l, c) = p.here();
    if !p.at_end() {
        return err(l, c, "unexpected input after term");
    }
    Ok(t)
}

/// Parses a single atom; the entire input must be consumed.
pub fn parse_atom(src: &str) -> Result<Atom, ParseError> {
    let mut p = Parser::new(src)?;
    let a = p.atom()?;
    let (l, c) = p.here();
    if !p.at_end() {
        return err(l, c, "unexpected input after atom");
    }
    Ok(a)
}

/// Parses a fact file: ground atoms, each terminated by `.`.
pub fn parse_facts(src: &str) -> Result<Vec<Atom>, ParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while !p.at_end() {
        let (l, c) = p.here();
        let a = p.atom()?;
        if !a.is_ground() {
            return err(l, c, format!("fact {a} is not ground"));
        }
        p.expect(TokKind::Dot, "'.'")?;
        out.push(a);
    }
    Ok(out)
}

/// Parses a rule file into a rule set named `name`, inferring the signature.
pub fn parse_rules(name: &str, src: &str) -> Result<RuleSet, ParseError> {
    let mut p = Parser::new(src)?;
    let mut clauses = Vec::new();
    while !p.at_end() {
        clauses.push(p.clause()?);
    }
    Ok(RuleSet {
        name: name.to_string(),
        signature: p.sig,
        clauses,
    })
}

/// Parses a signature file: one `name/arity` function declaration per line.
pub fn parse_signature(src: &str) -> Result<Signature, ParseError> {
    let mut sig = Signature::new();
    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let col = raw.find(text.chars().next().expect("nonempty")).unwrap_or(0) + 1;
        let Some((name, arity)) = text.split_once('/') else {
            return err(line_no, col, "expected 'name/arity'");
        };
        let name = name.trim();
        let arity = arity.trim();
        if name.is_empty()
            || is_variable_name(name)
            || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            || !name.chars().next().is_some_and(|c| c.is_ascii_lowercase())
        {
            return err(line_no, col, format!("invalid function symbol '{name}'"));
        }
        let Ok(arity) = arity.parse::<usize>() else {
            return err(line_no, col, format!("invalid arity '{arity}'"));
        };
        if let Err(msg) = sig.declare_function(name, arity) {
            return err(line_no, col, msg);
        }
    }
    Ok(sig)
}

//! Context-free recognition through bounded saturation.
//!
//! A grammar in the restricted two-shape form (`A -> B C`, `A -> c`)
//! compiles to a rule set over suffix pairs of the sentence term: the
//! predicate for a nonterminal holds of `(x, y)` when the words removed in
//! passing from list `x` to its suffix `y` parse as that nonterminal.
//! Recognition then asks the bounded engine for the acceptance atom, whose
//! universe is just the subterm closure of the sentence term, so the chart
//! stays quadratic in the sentence length and saturation stays cubic. An
//! independent CYK recognizer serves as the oracle in tests.

use std::collections::BTreeSet;

use crate::engine::{saturate_bounded, EvalStats, FactBase};
use crate::parse::ParseError;
use crate::term::{subterm_closure, Atom, Clause, RuleSet, Term};

/// A context-free production in one of the two compilable shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Production {
    /// `lhs -> left right`, both nonterminals.
    Binary {
        lhs: String,
        left: String,
        right: String,
    },
    /// `lhs -> word`, a single terminal.
    Lexical { lhs: String, word: String },
}

impl Production {
    fn lhs(&self) -> &str {
        match self {
            Production::Binary { lhs, .. } | Production::Lexical { lhs, .. } => lhs,
        }
    }
}

/// A context-free grammar restricted to binary and lexical productions.
/// The start symbol is the left-hand side of the first production.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub nonterminals: BTreeSet<String>,
    pub terminals: BTreeSet<String>,
    pub start: String,
    pub productions: Vec<Production>,
}

fn is_nonterminal(tok: &str) -> bool {
    tok.chars()
        .next()
        .is_some_and(|c| c.is_ascii_uppercase() || c == '_')
}

/// Parses a grammar file: one production per line, `A -> B C` with two
/// nonterminals or `A -> c` with one terminal, `#` starting a comment.
/// Nonterminals look like variables (leading uppercase or underscore),
/// terminals like constants. Empty and unit right-hand sides are rejected,
/// as are nonterminals that collide once lowercased, since each nonterminal
/// `A` becomes the predicate `pa_<lowercase a>`.
pub fn parse_grammar(src: &str) -> Result<Grammar, ParseError> {
    let mut productions = Vec::new();
    let mut nonterminals = BTreeSet::new();
    let mut terminals = BTreeSet::new();
    for (li, raw) in src.lines().enumerate() {
        let line = li + 1;
        let content = raw.split('#').next().unwrap_or("");
        // Token positions are tracked for error columns.
        let toks: Vec<(usize, &str)> = content
            .split_whitespace()
            .map(|t| {
                let off = t.as_ptr() as usize - content.as_ptr() as usize;
                (content[..off].chars().count() + 1, t)
            })
            .collect();
        if toks.is_empty() {
            continue;
        }
        let err = |col: usize, msg: &str| {
            Err(ParseError {
                line,
                col,
                msg: msg.to_string(),
            })
        };
        let (lhs_col, lhs) = toks[0];
        if !is_nonterminal(lhs) {
            return err(lhs_col, "production must start with a nonterminal");
        }
        if toks.len() < 2 || toks[1].1 != "->" {
            return err(toks.get(1).map_or(lhs_col, |t| t.0), "expected ->");
        }
        match toks[2..] {
            [] => return err(toks[1].0, "empty right-hand side"),
            [(col, sym)] => {
                if is_nonterminal(sym) {
                    return err(col, "unit nonterminal productions cannot be expressed");
                }
                terminals.insert(sym.to_string());
                productions.push(Production::Lexical {
                    lhs: lhs.to_string(),
                    word: sym.to_string(),
                });
            }
            [(lcol, left), (rcol, right)] => {
                if !is_nonterminal(left) {
                    return err(lcol, "two-symbol right-hand side must be nonterminals");
                }
                if !is_nonterminal(right) {
                    return err(rcol, "two-symbol right-hand side must be nonterminals");
                }
                nonterminals.insert(left.to_string());
                nonterminals.insert(right.to_string());
                productions.push(Production::Binary {
                    lhs: lhs.to_string(),
                    left: left.to_string(),
                    right: right.to_string(),
                });
            }
            [_, _, (col, _), ..] => {
                return err(col, "right-hand side has more than two symbols")
            }
        }
        nonterminals.insert(lhs.to_string());
    }
    let Some(first) = productions.first() else {
        return Err(ParseError {
            line: 1,
            col: 1,
            msg: "grammar has no productions".to_string(),
        });
    };
    let mut lowered = BTreeSet::new();
    for nt in &nonterminals {
        if !lowered.insert(nt.to_lowercase()) {
            return Err(ParseError {
                line: 1,
                col: 1,
                msg: format!("nonterminals collide after lowercasing: {nt}"),
            });
        }
    }
    Ok(Grammar {
        start: first.lhs().to_string(),
        nonterminals,
        terminals,
        productions,
    })
}

fn nt_pred(nt: &str) -> String {
    format!("pa_{}", nt.to_lowercase())
}

/// Compiles a grammar to rules over suffix pairs of a sentence term. Each
/// binary production becomes a chaining rule, each lexical production a
/// clause concluding `pa_<a>(cons(c, X), X)`, and the start symbol feeds the
/// acceptance rule `pa_<start>(X, nil) -> p(X)`.
pub fn compile(g: &Grammar) -> RuleSet {
    let (x, y, z) = (Term::var("X"), Term::var("Y"), Term::var("Z"));
    let mut clauses = Vec::new();
    for p in &g.productions {
        match p {
            Production::Binary { lhs, left, right } => clauses.push(Clause::new(
                vec![
                    Atom::new(nt_pred(left), vec![x.clone(), y.clone()]),
                    Atom::new(nt_pred(right), vec![y.clone(), z.clone()]),
                ],
                Atom::new(nt_pred(lhs), vec![x.clone(), z.clone()]),
            )),
            Production::Lexical { lhs, word } => clauses.push(Clause::fact(Atom::new(
                nt_pred(lhs),
                vec![
                    Term::app("cons", vec![Term::app(word, vec![]), x.clone()]),
                    x.clone(),
                ],
            ))),
        }
    }
    clauses.push(Clause::new(
        vec![Atom::new(
            nt_pred(&g.start),
            vec![x.clone(), Term::app("nil", vec![])],
        )],
        Atom::new("p", vec![x.clone()]),
    ));
    RuleSet::new("grammar", clauses).expect("compiled clauses use consistent arities")
}

/// Encodes a sentence as a right-nested `cons`/`nil` list of word constants.
pub fn encode<S: AsRef<str>>(words: &[S]) -> Term {
    words.iter().rev().fold(Term::app("nil", vec![]), |acc, w| {
        Term::app("cons", vec![Term::app(w.as_ref(), vec![]), acc])
    })
}

/// Recognizes a sentence by saturating the compiled rules inside the
/// subterm closure of the sentence term and looking for the acceptance
/// atom. A word outside the grammar's terminals is rejected outright, with
/// zero firings.
pub fn recognize<S: AsRef<str>>(g: &Grammar, words: &[S]) -> (bool, EvalStats) {
    if words.iter().any(|w| !g.terminals.contains(w.as_ref())) {
        return (false, EvalStats::default());
    }
    let goal = Atom::new("p", vec![encode(words)]);
    let universe = subterm_closure(&goal.args).expect("sentence terms are ground");
    let (derived, stats) = saturate_bounded(&compile(g), &FactBase::empty(), &universe);
    (derived.contains(&goal), stats)
}

/// Independent chart recognizer over the same two production shapes, used
/// as the oracle for [`recognize`]. The empty sentence is always rejected;
/// the production shapes cannot express it.
pub fn cyk_oracle<S: AsRef<str>>(g: &Grammar, words: &[S]) -> bool {
    let n = words.len();
    if n == 0 {
        return false;
    }
    // chart[(i, j)] = nonterminals deriving words[i..j].
    let mut chart: Vec<Vec<BTreeSet<&str>>> = vec![vec![BTreeSet::new(); n + 1]; n];
    for (i, w) in words.iter().enumerate() {
        for p in &g.productions {
            if let Production::Lexical { lhs, word } = p {
                if word == w.as_ref() {
                    chart[i][i + 1].insert(lhs);
                }
            }
        }
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            for mid in i + 1..j {
                for p in &g.productions {
                    if let Production::Binary { lhs, left, right } = p {
                        if chart[i][mid].contains(left.as_str())
                            && chart[mid][j].contains(right.as_str())
                        {
                            chart[i][j].insert(lhs);
                        }
                    }
                }
            }
        }
    }
    chart[0][n].contains(g.start.as_str())
}

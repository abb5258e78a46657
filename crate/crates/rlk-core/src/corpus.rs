//! A small corpus of named example rule sets.
//!
//! These serve as fixtures for the engine, the transformations, and the
//! locality checker, and are exposed on the command line through
//! `corpus:<key>` pseudo-paths.

use crate::parse::parse_rules;
use crate::term::RuleSet;

/// One named rule set with a short description.
#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub key: &'static str,
    pub notes: &'static str,
    text: &'static str,
}

impl CorpusEntry {
    /// The rule set, freshly parsed. Every corpus entry parses.
    pub fn rules(&self) -> RuleSet {
        parse_rules(self.key, self.text).expect("corpus entries parse")
    }

    /// The rule text in the shared clause syntax.
    pub fn text(&self) -> &'static str {
        self.text
    }
}

const TRANS_MONO: &str = "\
le(X, Y), le(Y, Z) -> le(X, Z).
le(X, Y) -> le(f(X), f(Y)).
";

const TRANS_MONO_SATURATED: &str = "\
le(X, Y), le(Y, Z) -> le(X, Z).
le(X, Y) -> le(f(X), f(Y)).
le(X, Z), le(Y, f(X)) -> le(Y, f(Z)).
le(Z, X), le(f(X), Y) -> le(f(Z), Y).
";

const MONOTONE_F: &str = "\
le(X, X).
le(X, Y), le(Y, Z) -> le(X, Z).
le(X, Y) -> le(f(X), f(Y)).
";

const MONOTONE_F_SUPERFICIAL: &str = "\
m(f(X)) -> m(X).
le(X, Y) -> m(X).
le(X, Y) -> m(Y).
m(X) -> le(X, X).
m(X), m(Y), m(Z), le(X, Y), le(Y, Z) -> le(X, Z).
m(f(X)), m(f(Y)), le(X, Y) -> le(f(X), f(Y)).
";

const LATTICE: &str = "\
le(X, X).
le(X, Y), le(Y, Z) -> le(X, Z).
le(X, join(X, Y)).
le(Y, join(X, Y)).
le(X, Z), le(Y, Z) -> le(join(X, Y), Z).
le(meet(X, Y), X).
le(meet(X, Y), Y).
le(Z, X), le(Z, Y) -> le(Z, meet(X, Y)).
";

const EQUALITY: &str = "\
eq(X, X).
eq(X, Y) -> eq(Y, X).
eq(X, Y), eq(Y, Z) -> eq(X, Z).
eq(X, Y) -> eq(f(X), f(Y)).
";

const NONLOCAL_DEMO: &str = "\
q(X) -> p(f(X)).
p(f(X)) -> r(X).
";

const ENTRIES: [CorpusEntry; 7] = [
    CorpusEntry {
        key: "trans-mono",
        notes: "Order transitivity plus monotonicity of a unary operator f.",
        text: TRANS_MONO,
    },
    CorpusEntry {
        key: "trans-mono-saturated",
        notes: "trans-mono extended with two derived chaining rules; same \
                inference relation, more clauses.",
        text: TRANS_MONO_SATURATED,
    },
    CorpusEntry {
        key: "monotone-f",
        notes: "Reflexivity, transitivity, and monotonicity of a unary \
                operator f.",
        text: MONOTONE_F,
    },
    CorpusEntry {
        key: "monotone-f-superficial",
        notes: "monotone-f gated by a mention predicate m, so forward \
                chaining only derives facts about mentioned terms; \
                superficial by construction.",
        text: MONOTONE_F_SUPERFICIAL,
    },
    CorpusEntry {
        key: "lattice",
        notes: "Lattice order axioms: reflexivity, transitivity, and the \
                join/meet bound and introduction rules.",
        text: LATTICE,
    },
    CorpusEntry {
        key: "equality",
        notes: "Equality axioms: reflexivity, symmetry, transitivity, and \
                congruence for a unary operator f.",
        text: EQUALITY,
    },
    CorpusEntry {
        key: "nonlocal-demo",
        notes: "Chains q(X) through p(f(X)) to r(X): deriving r(c) from \
                q(c) needs the term f(c), which no query universe over c \
                contains, so bounded and free derivability disagree.",
        text: NONLOCAL_DEMO,
    },
];

/// All corpus entries, in a fixed presentation order.
pub fn entries() -> &'static [CorpusEntry] {
    &ENTRIES
}

/// Looks up one entry by key.
pub fn corpus(key: &str) -> Option<&'static CorpusEntry> {
    ENTRIES.iter().find(|e| e.key == key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{check_superficial, proves_local, saturate_bounded, FactBase};
    use crate::parse::{parse_atom, parse_facts, parse_term};
    use crate::term::subterm_closure;

    #[test]
    fn every_entry_parses_and_round_trips() {
        for e in entries() {
            let rs = e.rules();
            assert!(!rs.clauses.is_empty(), "{} is nonempty", e.key);
            let reparsed = crate::parse::parse_rules(e.key, &rs.to_string()).unwrap();
            assert!(rs.canonically_equal(&reparsed), "{} round-trips", e.key);
        }
        assert!(corpus("no-such-key").is_none());
    }

    #[test]
    fn clause_counts_match_the_transcribed_sources() {
        let count = |k: &str| corpus(k).unwrap().rules().clauses.len();
        assert_eq!(count("trans-mono"), 2);
        assert_eq!(count("trans-mono-saturated"), 4);
        assert_eq!(count("monotone-f"), 3);
        assert_eq!(count("monotone-f-superficial"), 6);
        assert_eq!(count("lattice"), 8);
        assert_eq!(count("equality"), 4);
        assert_eq!(count("nonlocal-demo"), 2);
    }

    #[test]
    fn saturated_set_extends_trans_mono() {
        let base = corpus("trans-mono").unwrap().rules();
        let ext = corpus("trans-mono-saturated").unwrap().rules();
        assert_eq!(&ext.clauses[..2], &base.clauses[..]);
    }

    #[test]
    fn superficiality_of_the_corpus() {
        assert!(check_superficial(&corpus("monotone-f-superficial").unwrap().rules()).is_ok());
        assert!(check_superficial(&corpus("trans-mono").unwrap().rules()).is_err());
        assert!(check_superficial(&corpus("lattice").unwrap().rules()).is_err());
    }

    #[test]
    fn lattice_meet_bound_is_derivable_without_seeds() {
        let rules = corpus("lattice").unwrap().rules();
        let t = parse_term("meet(a, b)").unwrap();
        let universe = subterm_closure([&t]).unwrap();
        let (out, _) = saturate_bounded(&rules, &FactBase::empty(), &universe);
        assert!(out.contains(&parse_atom("le(meet(a, b), a)").unwrap()));
    }

    #[test]
    fn nonlocal_demo_blocks_bounded_derivation() {
        let rules = corpus("nonlocal-demo").unwrap().rules();
        let seed = FactBase::new(parse_facts("q(c).").unwrap()).unwrap();
        assert!(proves_local(&rules, &seed, &parse_atom("r(c)").unwrap()).is_none());
    }

    #[test]
    fn saturated_rules_change_no_answers() {
        let base = corpus("trans-mono").unwrap().rules();
        let ext = corpus("trans-mono-saturated").unwrap().rules();
        let seed = FactBase::new(parse_facts("le(a, b). le(b, c).").unwrap()).unwrap();
        for goal in ["le(a, c)", "le(f(a), f(c))", "le(f(b), f(a))"] {
            let goal = parse_atom(goal).unwrap();
            assert_eq!(
                proves_local(&base, &seed, &goal).is_some(),
                proves_local(&ext, &seed, &goal).is_some(),
                "{goal}"
            );
        }
    }
}

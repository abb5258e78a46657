//! Rule-set transformations that trade rule shape for evaluation shape.
//!
//! Two rewrites live here. [`mentionize`] makes an arbitrary rule set
//! superficial by guarding every clause with a unary mention predicate, so
//! that free saturation of the result simulates bounded saturation of the
//! original. [`prime_transform`] threads an extra tuple of arguments through
//! a superficial rule set, so that a single free saturation answers the
//! query "which input tuples reach acceptance" for all tuples at once.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::engine::{
    check_superficial, lemma2_bound, saturate_free, FactBase, SuperficialityViolation,
};
use crate::term::{subterm_closure, Atom, Clause, RuleSet, Term};

/// Mention predicate used when the caller does not pick a name.
pub const DEFAULT_MENTION: &str = "m__";

/// Suffix appended to every predicate renamed by [`prime_transform`].
pub const PRIME_SUFFIX: &str = "__p";

/// Why a transformation refused its input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    /// A name the transform must introduce already occurs in the rule set.
    #[error("symbol {0} already occurs in the rule set")]
    NameCollision(String),
    /// A designated predicate exists but with the wrong arity.
    #[error("predicate {pred} has arity {found}, expected {expected}")]
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    /// A designated predicate does not occur in the rule set at all.
    #[error("predicate {0} does not occur in the rule set")]
    MissingPredicate(String),
    /// The transform requires a superficial rule set and this one is not.
    #[error("rule set is not superficial: {0}")]
    NotSuperficial(SuperficialityViolation),
}

/// The argument terms of a clause that are not proper subterms of another
/// argument term of the same clause, in first-occurrence order (antecedents
/// before conclusion, arguments left to right).
fn maximal_clause_terms(clause: &Clause) -> Vec<Term> {
    let mut terms: Vec<Term> = Vec::new();
    for atom in clause.antecedents.iter().chain([&clause.conclusion]) {
        for arg in &atom.args {
            if !terms.contains(arg) {
                terms.push(arg.clone());
            }
        }
    }
    terms
        .iter()
        .filter(|t| !terms.iter().any(|u| u.properly_contains(t)))
        .cloned()
        .collect()
}

fn numbered_vars(stem: &str, n: usize) -> Vec<Term> {
    (1..=n).map(|i| Term::var(format!("{stem}{i}"))).collect()
}

/// Rewrites `rules` into a superficial rule set over an extended signature
/// with one new unary predicate, `mention`.
///
/// The output contains three groups of clauses:
///
/// * for every function symbol `f` of arity `n` and every `i`, the
///   unpacking clause `mention(f(X1, .., Xn)) -> mention(Xi)`;
/// * for every original predicate `P` of arity `m` and every `i`, the
///   projection clause `P(X1, .., Xm) -> mention(Xi)`;
/// * every original clause, with a guard `mention(t)` prepended for each
///   maximal argument term `t` of the clause. Every maximal term is guarded,
///   including those already bound by an original antecedent, so the guard
///   placement never depends on which atom happens to bind a term first.
///
/// Guarding every maximal term also bounds every conclusion variable by an
/// antecedent, so the output is always safe for free saturation.
///
/// Fails if `mention` already names a predicate or function of `rules`.
pub fn mentionize(rules: &RuleSet, mention: &str) -> Result<RuleSet, TransformError> {
    if rules.signature.predicates.contains_key(mention)
        || rules.signature.functions.contains_key(mention)
    {
        return Err(TransformError::NameCollision(mention.to_string()));
    }
    let mut clauses = Vec::new();
    for (f, &n) in &rules.signature.functions {
        let vars = numbered_vars("X", n);
        for i in 0..n {
            clauses.push(Clause::new(
                vec![Atom::new(mention, vec![Term::app(f, vars.clone())])],
                Atom::new(mention, vec![vars[i].clone()]),
            ));
        }
    }
    for (p, &m) in &rules.signature.predicates {
        let vars = numbered_vars("X", m);
        for i in 0..m {
            clauses.push(Clause::new(
                vec![Atom::new(p, vars.clone())],
                Atom::new(mention, vec![vars[i].clone()]),
            ));
        }
    }
    for clause in &rules.clauses {
        let mut antecedents: Vec<Atom> = maximal_clause_terms(clause)
            .into_iter()
            .map(|t| Atom::new(mention, vec![t]))
            .collect();
        antecedents.extend(clause.antecedents.iter().cloned());
        clauses.push(Clause::new(antecedents, clause.conclusion.clone()));
    }
    let name = format!("{}-mention", rules.name);
    Ok(RuleSet::new(name, clauses).expect("guarded clauses reuse the input arities"))
}

/// Answers a bounded query by free saturation of the mentionized rules.
///
/// Seeds the mention predicate with every maximal argument term of `seed`
/// and `goal`, runs [`mentionize`]`(rules)` to its fixed point, and reports
/// whether `goal` appears in the result. Agrees with
/// [`proves_local`](crate::engine::proves_local) on the original rules: the
/// mention closure reaches exactly the subterms of the seed and the goal, so
/// the guards confine derived facts to the same universe the bounded engine
/// would use, while superficiality of the output keeps the saturation
/// finite.
///
/// The mention predicate is [`DEFAULT_MENTION`], extended with underscores
/// until it avoids every symbol of `rules`.
///
/// # Panics
///
/// Panics if `goal` is not ground.
pub fn bounded_query_via_mention(rules: &RuleSet, seed: &FactBase, goal: &Atom) -> bool {
    assert!(goal.is_ground(), "query atom must be ground");
    let mut mention = DEFAULT_MENTION.to_string();
    while rules.signature.predicates.contains_key(&mention)
        || rules.signature.functions.contains_key(&mention)
    {
        mention.push('_');
    }
    let mentioned = mentionize(rules, &mention).expect("mention name was made fresh");

    let mut args: Vec<Term> = Vec::new();
    for arg in seed.iter().flat_map(|a| a.args.iter()).chain(&goal.args) {
        if !args.contains(arg) {
            args.push(arg.clone());
        }
    }
    let maximal = args
        .iter()
        .filter(|t| !args.iter().any(|u| u.properly_contains(t)));
    let mut atoms: Vec<Atom> = seed.iter().cloned().collect();
    atoms.extend(maximal.map(|t| Atom::new(mention.as_str(), vec![t.clone()])));
    let seeded = FactBase::new(atoms).expect("seed facts and ground mention facts");

    // Each round before the fixed point adds a fact, and every derivable
    // fact is a label formula over the subterm closure of the seeded terms,
    // so the fact-count bound plus two rounds always reaches the fixed
    // point.
    let closure = subterm_closure(&args).expect("query terms are ground");
    let cap = lemma2_bound(&mentioned.signature, closure.len()).min(1_000_000) as usize + 2;
    let (derived, _, exhausted) =
        saturate_free(&mentioned, &seeded, cap).expect("guards bind every conclusion variable");
    assert!(
        exhausted,
        "superficial saturation must reach its fixed point within the fact-count bound"
    );
    derived.contains(goal)
}

/// Threads `k` extra leading arguments through a superficial rule set so
/// that one free saturation decides acceptance for every input tuple at
/// once.
///
/// Every predicate `P` of `rules` becomes `P__p` with `k` additional leading
/// arguments, shared across all atoms of a clause so each derivation is
/// tagged with the input tuple it started from. Two clauses frame the
/// renamed rules: an antecedent-free clause concluding
/// `input__p(X1, .., Xk, X1, .., Xk)`, which launches one derivation per
/// candidate tuple, and `accept__p(X1, .., Xk) -> goal(X1, .., Xk)`, which
/// exposes the accepted tuples under the fresh predicate `goal`.
///
/// Requires `rules` to be superficial, `input` to have arity `k`, `accept`
/// to have arity 0, and `goal` plus every renamed predicate to be fresh.
/// Renaming preserves superficiality clause by clause; the launch clause is
/// the one exception, since its conclusion variables are bound by nothing.
/// The output is therefore meant for bounded evaluation, which instantiates
/// those variables over the universe.
pub fn prime_transform(
    rules: &RuleSet,
    k: usize,
    input: &str,
    accept: &str,
    goal: &str,
) -> Result<RuleSet, TransformError> {
    if let Err(v) = check_superficial(rules) {
        return Err(TransformError::NotSuperficial(v));
    }
    for (pred, expected) in [(input, k), (accept, 0)] {
        match rules.signature.predicates.get(pred) {
            None => return Err(TransformError::MissingPredicate(pred.to_string())),
            Some(&found) if found != expected => {
                return Err(TransformError::ArityMismatch {
                    pred: pred.to_string(),
                    expected,
                    found,
                })
            }
            Some(_) => {}
        }
    }
    let primed = |p: &str| format!("{p}{PRIME_SUFFIX}");
    let mut fresh = vec![goal.to_string()];
    fresh.extend(rules.signature.predicates.keys().map(|p| primed(p)));
    for name in &fresh {
        if rules.signature.predicates.contains_key(name)
            || rules.signature.functions.contains_key(name)
        {
            return Err(TransformError::NameCollision(name.clone()));
        }
    }

    // Tag variables must avoid every variable of every original clause.
    let mut used = BTreeSet::new();
    for clause in &rules.clauses {
        clause.collect_vars(&mut used);
    }
    let mut stem = "K".to_string();
    while (1..=k).any(|i| used.contains(&format!("{stem}{i}"))) {
        stem.push('K');
    }
    let tags = numbered_vars(&stem, k);
    let prime_atom = |a: &Atom| {
        let args = tags.iter().chain(&a.args).cloned().collect();
        Atom::new(primed(&a.pred), args)
    };

    let seed_vars = numbered_vars("X", k);
    let mut doubled = seed_vars.clone();
    doubled.extend(seed_vars.iter().cloned());
    let mut clauses = vec![Clause::fact(Atom::new(primed(input), doubled))];
    for clause in &rules.clauses {
        clauses.push(Clause::new(
            clause.antecedents.iter().map(prime_atom).collect(),
            prime_atom(&clause.conclusion),
        ));
    }
    clauses.push(Clause::new(
        vec![Atom::new(primed(accept), seed_vars.clone())],
        Atom::new(goal, seed_vars),
    ));
    let name = format!("{}-prime", rules.name);
    Ok(RuleSet::new(name, clauses).expect("renamed clauses use consistent arities"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::corpus;
    use crate::engine::proves_local;
    use crate::parse::{parse_atom, parse_facts, parse_rules};

    fn rules(src: &str) -> RuleSet {
        parse_rules("test", src).expect("test rules parse")
    }

    fn facts(src: &str) -> FactBase {
        FactBase::new(parse_facts(src).expect("test facts parse")).expect("ground facts")
    }

    fn atom(src: &str) -> Atom {
        parse_atom(src).expect("test atom parses")
    }

    #[test]
    fn mentionizing_transitivity_guards_every_variable() {
        let out = mentionize(&rules("le(X, Y), le(Y, Z) -> le(X, Z)."), "m").unwrap();
        let expected = rules(
            "le(X, Y) -> m(X).\n\
             le(X, Y) -> m(Y).\n\
             m(X), m(Y), m(Z), le(X, Y), le(Y, Z) -> le(X, Z).",
        );
        assert!(out.canonically_equal(&expected));
    }

    #[test]
    fn mentionizing_the_monotone_rules_matches_the_hand_written_guards() {
        let out = mentionize(&corpus("monotone-f").unwrap().rules(), "m").unwrap();
        let expected = corpus("monotone-f-superficial").unwrap().rules();
        assert!(out.canonically_equal(&expected));
    }

    #[test]
    fn mentionized_rule_sets_are_superficial() {
        for entry in crate::corpus::entries() {
            let out = mentionize(&entry.rules(), DEFAULT_MENTION).unwrap();
            assert!(
                check_superficial(&out).is_ok(),
                "mentionize({}) must be superficial",
                entry.key
            );
        }
    }

    #[test]
    fn mention_name_collisions_are_rejected() {
        let r = corpus("monotone-f-superficial").unwrap().rules();
        assert_eq!(
            mentionize(&r, "m"),
            Err(TransformError::NameCollision("m".to_string()))
        );
        assert_eq!(
            mentionize(&r, "le"),
            Err(TransformError::NameCollision("le".to_string()))
        );
        assert_eq!(
            mentionize(&r, "f"),
            Err(TransformError::NameCollision("f".to_string()))
        );
        assert!(mentionize(&r, "m2").is_ok());
    }

    #[test]
    fn guards_cover_constants_in_conclusions() {
        let out = mentionize(&rules("p(X) -> q(f(X, c))."), "m").unwrap();
        let expected = rules(
            "m(f(X1, X2)) -> m(X1).\n\
             m(f(X1, X2)) -> m(X2).\n\
             p(X1) -> m(X1).\n\
             q(X1) -> m(X1).\n\
             m(f(X, c)), p(X) -> q(f(X, c)).",
        );
        assert!(out.canonically_equal(&expected));
    }

    #[test]
    fn mention_query_agrees_with_the_bounded_engine() {
        let r = corpus("monotone-f").unwrap().rules();
        let seed = facts("le(a, b).");
        let yes = atom("le(f(a), f(b))");
        let no = atom("le(f(b), f(a))");
        assert!(bounded_query_via_mention(&r, &seed, &yes));
        assert!(proves_local(&r, &seed, &yes).is_some());
        assert!(!bounded_query_via_mention(&r, &seed, &no));
        assert!(proves_local(&r, &seed, &no).is_none());
    }

    #[test]
    fn mention_query_respects_the_bound() {
        let r = corpus("nonlocal-demo").unwrap().rules();
        let seed = facts("q(c).");
        // Deriving r(c) needs the intermediate p(f(c)), which mentions a
        // term outside the subterm closure of the query.
        assert!(!bounded_query_via_mention(&r, &seed, &atom("r(c)")));
        assert!(bounded_query_via_mention(&r, &seed, &atom("q(c)")));
    }

    #[test]
    fn mention_query_uniquifies_its_predicate() {
        let r = rules("m__(X, Y) -> m__(Y, X).");
        let seed = facts("m__(a, b).");
        assert!(bounded_query_via_mention(&r, &seed, &atom("m__(b, a)")));
    }

    #[test]
    fn priming_a_unary_chain_matches_the_expected_shape() {
        let r = rules("input(X) -> p(X).\np(X) -> accept.");
        let out = prime_transform(&r, 1, "input", "accept", "q").unwrap();
        let expected = rules(
            "input__p(X, X).\n\
             input__p(W, X) -> p__p(W, X).\n\
             p__p(W, X) -> accept__p(W).\n\
             accept__p(X) -> q(X).",
        );
        assert!(out.canonically_equal(&expected));
    }

    #[test]
    fn only_the_launch_clause_breaks_superficiality() {
        let r = rules("input(X) -> p(X).\np(f(X)) -> p(X).\np(X) -> accept.");
        let out = prime_transform(&r, 1, "input", "accept", "q").unwrap();
        let violation = check_superficial(&out).unwrap_err();
        assert_eq!(violation.clause, 0);
        assert!(violation.term.is_var());
        let rest = RuleSet::new("rest", out.clauses[1..].to_vec()).unwrap();
        assert!(check_superficial(&rest).is_ok());
    }

    #[test]
    fn priming_rejects_bad_designations() {
        let r = rules("input(X) -> p(X).\np(X) -> accept.");
        assert_eq!(
            prime_transform(&r, 2, "input", "accept", "q"),
            Err(TransformError::ArityMismatch {
                pred: "input".to_string(),
                expected: 2,
                found: 1,
            })
        );
        assert_eq!(
            prime_transform(&r, 1, "input", "p", "q"),
            Err(TransformError::ArityMismatch {
                pred: "p".to_string(),
                expected: 0,
                found: 1,
            })
        );
        assert_eq!(
            prime_transform(&r, 1, "start", "accept", "q"),
            Err(TransformError::MissingPredicate("start".to_string()))
        );
        assert_eq!(
            prime_transform(&r, 1, "input", "accept", "p"),
            Err(TransformError::NameCollision("p".to_string()))
        );
        let clash = rules("input(X) -> p(X).\np(X) -> accept.\np__p(X) -> accept.");
        assert_eq!(
            prime_transform(&clash, 1, "input", "accept", "q"),
            Err(TransformError::NameCollision("p__p".to_string()))
        );
        let unsafe_rules = rules("input(X) -> p(f(X)).\np(X) -> accept.");
        assert!(matches!(
            prime_transform(&unsafe_rules, 1, "input", "accept", "q"),
            Err(TransformError::NotSuperficial(_))
        ));
    }

    #[test]
    fn tag_variables_avoid_clause_variables() {
        let r = rules("input(K1) -> p(K1).\np(K1) -> accept.");
        let out = prime_transform(&r, 1, "input", "accept", "q").unwrap();
        let expected = rules(
            "input__p(X, X).\n\
             input__p(KK1, K1) -> p__p(KK1, K1).\n\
             p__p(KK1, K1) -> accept__p(KK1).\n\
             accept__p(X) -> q(X).",
        );
        assert!(out.canonically_equal(&expected));
    }

    #[test]
    fn primed_queries_answer_per_tuple_acceptance() {
        let r = rules("input(f(X)) -> p(X).\np(X) -> accept.");
        let out = prime_transform(&r, 1, "input", "accept", "q").unwrap();
        let empty = FactBase::empty();
        assert!(proves_local(&out, &empty, &atom("q(f(a))")).is_some());
        assert!(proves_local(&out, &empty, &atom("q(a)")).is_none());
    }
}

//! Property tests for the term layer: printing and parsing invert each
//! other, unification is a sound idempotent unifier, and canonical renaming
//! is a stable normal form.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rlk_core::{
    canonical_rename, dag_size, parse_atom, parse_rules, parse_term, subterm_closure, unify, Atom,
    Clause, RuleSet, Substitution, Term,
};

fn any_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::app("a", vec![])),
        Just(Term::app("b", vec![])),
        Just(Term::var("X")),
        Just(Term::var("Y")),
        Just(Term::var("Z")),
        Just(Term::var("W")),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::app("g", vec![t])),
            (inner.clone(), inner.clone()).prop_map(|(s, t)| Term::app("f", vec![s, t])),
            (inner.clone(), inner.clone(), inner)
                .prop_map(|(r, s, t)| Term::app("h", vec![r, s, t])),
        ]
    })
}

fn ground_term() -> impl Strategy<Value = Term> {
    any_term().prop_filter("ground terms only", |t| t.is_ground())
}

fn any_atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        Just(Atom::new("r", vec![])),
        any_term().prop_map(|t| Atom::new("p", vec![t])),
        (any_term(), any_term()).prop_map(|(s, t)| Atom::new("q", vec![s, t])),
    ]
}

fn any_clause() -> impl Strategy<Value = Clause> {
    (proptest::collection::vec(any_atom(), 0..3), any_atom())
        .prop_map(|(ants, concl)| Clause::new(ants, concl))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn terms_print_and_reparse_exactly(t in any_term()) {
        prop_assert_eq!(parse_term(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn atoms_print_and_reparse_exactly(a in any_atom()) {
        prop_assert_eq!(parse_atom(&a.to_string()).unwrap(), a);
    }

    #[test]
    fn rule_sets_print_and_reparse_exactly(clauses in proptest::collection::vec(any_clause(), 1..5)) {
        let rules = RuleSet::new("roundtrip", clauses).expect("fixed arities");
        let reparsed = parse_rules("roundtrip", &rules.to_string()).unwrap();
        prop_assert_eq!(&reparsed.clauses, &rules.clauses);
        prop_assert!(reparsed.canonically_equal(&rules));
    }

    #[test]
    fn unifiers_are_sound_and_idempotent(s in any_term(), t in any_term()) {
        let a = Atom::new("u", vec![s]);
        let b = Atom::new("u", vec![t]);
        if let Some(u) = unify(&a, &b) {
            let ua = u.apply_atom(&a);
            prop_assert_eq!(&ua, &u.apply_atom(&b));
            prop_assert_eq!(&u.apply_atom(&ua), &ua);
        }
        // Unifiability is symmetric.
        prop_assert_eq!(unify(&a, &b).is_some(), unify(&b, &a).is_some());
    }

    #[test]
    fn instances_unify_with_their_pattern(
        t in any_term(),
        img in proptest::collection::vec(ground_term(), 4),
    ) {
        // Map the four possible variables to ground terms; the result is an
        // instance of t, so unification must succeed and reproduce it.
        let sub = Substitution::from_pairs(
            ["X", "Y", "Z", "W"]
                .iter()
                .zip(img)
                .map(|(v, g)| (v.to_string(), g))
                .collect::<std::collections::BTreeMap<_, _>>(),
        );
        let pat = Atom::new("u", vec![t]);
        let inst = sub.apply_atom(&pat);
        let u = unify(&pat, &inst).expect("patterns unify with their instances");
        prop_assert_eq!(u.apply_atom(&pat), inst);
    }

    #[test]
    fn occurs_check_rejects_cyclic_bindings(t in any_term()) {
        let mut vars = BTreeSet::new();
        t.collect_vars(&mut vars);
        for v in vars {
            if t.is_var() {
                continue;
            }
            let a = Atom::new("u", vec![Term::var(v)]);
            let b = Atom::new("u", vec![t.clone()]);
            prop_assert_eq!(unify(&a, &b), None);
        }
    }

    #[test]
    fn canonical_renaming_is_idempotent_and_renaming_invariant(c in any_clause()) {
        let canon = canonical_rename(&c);
        prop_assert_eq!(&canonical_rename(&canon), &canon);

        // A fresh injective renaming of the clause variables must not
        // change the canonical form.
        let mut vars = BTreeSet::new();
        c.collect_vars(&mut vars);
        let sub = Substitution::from_pairs(
            vars.iter()
                .rev()
                .enumerate()
                .map(|(i, v)| (v.clone(), Term::var(format!("R{i}"))))
                .collect::<std::collections::BTreeMap<_, _>>(),
        );
        let renamed = sub.apply_clause(&c);
        prop_assert_eq!(&canonical_rename(&renamed), &canon);
    }

    #[test]
    fn subterm_closures_are_closed_and_measure_dag_size(t in ground_term()) {
        let closure = subterm_closure([&t]).unwrap();
        for member in closure.iter() {
            if let Some((_, args)) = member.app_parts() {
                for arg in args {
                    prop_assert!(closure.contains(arg), "{member} in closure but {arg} missing");
                }
            }
        }
        prop_assert_eq!(dag_size(&t).unwrap(), closure.len());
        prop_assert!(closure.contains(&t));
    }
}

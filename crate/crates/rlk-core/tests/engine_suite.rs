//! Cross-validation of the saturation engine against a brute-force
//! reference, plus monotonicity, bound, and derivation-replay properties on
//! randomized inputs.

mod common;

use std::collections::BTreeSet;

use rand::Rng;
use rlk_core::{
    lemma2_bound, proves_local, saturate_bounded, saturate_free, subterm_closure,
    validate_derivation, Atom, FactBase, Source, Term,
};

use common::{
    naive_bounded, random_rules, random_seed_atoms, random_superficial_rules, random_universe,
    rng, seed_base, GEN_PREDS,
};

#[test]
fn bounded_saturation_matches_brute_force_on_random_inputs() {
    let mut rng = rng(0xE1);
    for case in 0..150 {
        let rules = random_rules(&mut rng, 4);
        let universe = random_universe(&mut rng, 5);
        let seed = random_seed_atoms(&mut rng, GEN_PREDS, &universe, 4);
        let expected = naive_bounded(&rules, &seed, &universe);

        let (out, stats) = saturate_bounded(&rules, &seed_base(&seed), &universe);
        let got: BTreeSet<Atom> = out.iter().cloned().collect();
        assert_eq!(got, expected, "case {case}: rules\n{rules}");
        assert_eq!(stats.facts, out.len(), "case {case}: stats.facts miscounts");
        assert!(
            out.len() as u64 <= seed_base(&seed).len() as u64 + stats.firings,
            "case {case}: more facts than seed plus firings"
        );
    }
}

#[test]
fn bounded_saturation_is_monotone_in_the_universe() {
    let mut rng = rng(0xE2);
    for case in 0..80 {
        let rules = random_rules(&mut rng, 4);
        let small = random_universe(&mut rng, 4);
        let large = small.union(&random_universe(&mut rng, 5));
        let seed = random_seed_atoms(&mut rng, GEN_PREDS, &small, 3);

        let (out_small, _) = saturate_bounded(&rules, &seed_base(&seed), &small);
        let (out_large, _) = saturate_bounded(&rules, &seed_base(&seed), &large);
        for a in out_small.iter() {
            assert!(
                out_large.contains(a),
                "case {case}: {a} lost when the universe grew"
            );
        }
    }
}

#[test]
fn bounded_saturation_is_monotone_in_the_seed() {
    let mut rng = rng(0xE3);
    for case in 0..80 {
        let rules = random_rules(&mut rng, 4);
        let universe = random_universe(&mut rng, 5);
        let mut seed = random_seed_atoms(&mut rng, GEN_PREDS, &universe, 3);
        let (out_small, _) = saturate_bounded(&rules, &seed_base(&seed), &universe);
        seed.extend(random_seed_atoms(&mut rng, GEN_PREDS, &universe, 2));
        let (out_large, _) = saturate_bounded(&rules, &seed_base(&seed), &universe);
        for a in out_small.iter() {
            assert!(
                out_large.contains(a),
                "case {case}: {a} lost when the seed grew"
            );
        }
    }
}

#[test]
fn derived_fact_count_respects_the_label_formula_bound() {
    let mut rng = rng(0xE4);
    for case in 0..100 {
        let rules = random_rules(&mut rng, 5);
        let universe = random_universe(&mut rng, 5);
        let seed = random_seed_atoms(&mut rng, GEN_PREDS, &universe, 4);
        let base = seed_base(&seed);
        let seed_len = base.len();
        let (out, _) = saturate_bounded(&rules, &base, &universe);
        let bound = lemma2_bound(&rules.signature, universe.len());
        assert!(
            (out.len() - seed_len) as u128 <= bound,
            "case {case}: {} derived facts exceed the bound {bound}",
            out.len() - seed_len
        );
    }
}

#[test]
fn free_saturation_agrees_with_bounded_on_superficial_sets() {
    let mut rng = rng(0xE5);
    for case in 0..60 {
        let k = rng.gen_range(1..=2);
        let rules = random_superficial_rules(&mut rng, k);
        let universe = random_universe(&mut rng, 5);
        let mut seed = random_seed_atoms(&mut rng, &[("r", 1), ("t", 2)], &universe, 3);
        let pool: Vec<Term> = universe.iter().cloned().collect();
        seed.push(Atom::new(
            "input",
            (0..k).map(|i| pool[i % pool.len()].clone()).collect(),
        ));

        // Superficial rules never build terms, so free saturation stays
        // inside the seed's subterm closure and the two modes coincide.
        let base = seed_base(&seed);
        let closure = subterm_closure(seed.iter().flat_map(|a| a.args.iter()))
            .expect("seed atoms are ground");
        let (free, _, fixpoint) = saturate_free(&rules, &base, 1000).expect("superficial rules");
        assert!(fixpoint, "case {case}: no fixpoint on a superficial set");
        let (bounded, _) = saturate_bounded(&rules, &base, &closure);
        let free_set: BTreeSet<Atom> = free.iter().cloned().collect();
        let bounded_set: BTreeSet<Atom> = bounded.iter().cloned().collect();
        assert_eq!(free_set, bounded_set, "case {case}: rules\n{rules}");
    }
}

#[test]
fn derivations_replay_through_the_validator() {
    let mut rng = rng(0xE6);
    let mut checked = 0;
    for _ in 0..250 {
        let rules = random_rules(&mut rng, 4);
        let universe = random_universe(&mut rng, 5);
        let seed = random_seed_atoms(&mut rng, GEN_PREDS, &universe, 3);
        let base = seed_base(&seed);
        let (out, _) = saturate_bounded(&rules, &base, &universe);
        // Validate a derivation of every derived (non-seed) fact.
        for a in out.iter().skip(base.len()).take(4) {
            let d = out.derivation_of(a).expect("derived facts have derivations");
            assert!(
                validate_derivation(&rules, &base, &d, Some(&universe)),
                "derivation of {a} rejected\n{d}"
            );
            checked += 1;
        }
    }
    assert!(checked > 50, "too few derivations exercised: {checked}");
}

#[test]
fn corrupted_derivations_are_rejected() {
    let mut rng = rng(0xE7);
    let mut mutated = 0;
    for _ in 0..60 {
        let rules = random_rules(&mut rng, 4);
        let universe = random_universe(&mut rng, 5);
        let seed = random_seed_atoms(&mut rng, GEN_PREDS, &universe, 3);
        let base = seed_base(&seed);
        let (out, _) = saturate_bounded(&rules, &base, &universe);
        let Some(goal) = out.iter().skip(base.len()).last() else {
            continue;
        };
        let d = out.derivation_of(goal).expect("derived fact");
        for (i, step) in d.steps.iter().enumerate() {
            for slot in 0..step.sources.len() {
                // Every fact index is unique to its atom, so any reindexing
                // makes the cited antecedent disagree with the clause
                // instance (or dangle), and validation must fail.
                let mut bad = d.clone();
                bad.steps[i].sources[slot] = match step.sources[slot] {
                    Source::Seed(_) => Source::Seed(base.len() + 7),
                    Source::Step(_) => Source::Step(i),
                };
                assert!(
                    !validate_derivation(&rules, &base, &bad, Some(&universe)),
                    "dangling source accepted at step {i} slot {slot}\n{d}"
                );
                mutated += 1;
            }
        }
    }
    assert!(mutated > 30, "too few mutations exercised: {mutated}");
}

#[test]
fn local_queries_only_use_subterms_of_the_question() {
    // le(a, b) with transitivity and monotone f: the f-image is derivable
    // exactly when the query mentions it.
    let rules = rlk_core::corpus("trans-mono").unwrap().rules();
    let facts = FactBase::new(vec![rlk_core::parse_atom("le(a, b)").unwrap()]).unwrap();
    let yes = rlk_core::parse_atom("le(f(a), f(b))").unwrap();
    let no = rlk_core::parse_atom("le(g(a), g(b))").unwrap();
    assert!(proves_local(&rules, &facts, &yes).is_some());
    assert!(proves_local(&rules, &facts, &no).is_none());

    // Deeper images need deeper queries, and the derivation validates.
    let deep = rlk_core::parse_atom("le(f(f(a)), f(f(b)))").unwrap();
    let d = proves_local(&rules, &facts, &deep).expect("two monotone steps");
    let closure = subterm_closure(
        facts
            .iter()
            .flat_map(|a| a.args.iter())
            .chain(deep.args.iter()),
    )
    .unwrap();
    assert!(validate_derivation(&rules, &facts, &d, Some(&closure)));
    assert_eq!(d.steps.len(), 2);
}

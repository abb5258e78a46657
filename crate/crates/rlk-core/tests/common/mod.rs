//! Shared random generators and a brute-force reference engine for the
//! integration suites. Everything is seeded, so every suite is
//! deterministic run to run.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rlk_core::{subterm_closure, Atom, BoundingSet, Clause, FactBase, RuleSet, Term};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Ground terms and universes
// ---------------------------------------------------------------------------

/// The fixed term vocabulary used by the randomized suites.
pub const FUNCS: &[(&str, usize)] = &[("a", 0), ("b", 0), ("f", 2), ("g", 1)];

fn grow_term(rng: &mut ChaCha8Rng, depth: usize) -> Term {
    if depth == 0 {
        return if rng.gen_bool(0.5) {
            Term::app("a", vec![])
        } else {
            Term::app("b", vec![])
        };
    }
    match rng.gen_range(0u8..10) {
        0..=2 => Term::app(if rng.gen_bool(0.5) { "a" } else { "b" }, vec![]),
        3..=5 => Term::app("g", vec![grow_term(rng, depth - 1)]),
        _ => Term::app(
            "f",
            vec![grow_term(rng, depth - 1), grow_term(rng, depth - 1)],
        ),
    }
}

/// A random ground term over [`FUNCS`] with `dag_size` at most `max_dag`.
pub fn random_ground_term(rng: &mut ChaCha8Rng, max_dag: usize) -> Term {
    loop {
        let depth = rng.gen_range(0..=5);
        let t = grow_term(rng, depth);
        if rlk_core::dag_size(&t).expect("generated term is ground") <= max_dag {
            return t;
        }
    }
}

/// A random subterm-closed universe over [`FUNCS`] with at most `max_terms`
/// members (and at least one).
pub fn random_universe(rng: &mut ChaCha8Rng, max_terms: usize) -> BoundingSet {
    assert!(max_terms >= 1);
    let root = Term::app("a", vec![]);
    let mut u = subterm_closure([&root]).expect("constants are ground");
    let mut terms: Vec<Term> = u.iter().cloned().collect();
    for _ in 0..rng.gen_range(0..3 * max_terms) {
        let candidate = match rng.gen_range(0u8..4) {
            0 => Term::app("b", vec![]),
            1 => Term::app("g", vec![terms.choose(rng).unwrap().clone()]),
            _ => Term::app(
                "f",
                vec![
                    terms.choose(rng).unwrap().clone(),
                    terms.choose(rng).unwrap().clone(),
                ],
            ),
        };
        let grown = u.inserted(&candidate).expect("ground candidate");
        if grown.len() <= max_terms {
            u = grown;
            terms = u.iter().cloned().collect();
        }
    }
    u
}

/// Random ground atoms over the given predicates with arguments drawn from
/// the universe.
pub fn random_seed_atoms(
    rng: &mut ChaCha8Rng,
    preds: &[(&str, usize)],
    universe: &BoundingSet,
    max_atoms: usize,
) -> Vec<Atom> {
    let pool: Vec<Term> = universe.iter().cloned().collect();
    let mut out = Vec::new();
    for _ in 0..rng.gen_range(0..=max_atoms) {
        let &(p, n) = preds.choose(rng).unwrap();
        let args = (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect();
        out.push(Atom::new(p, args));
    }
    out
}

pub fn random_ground_atom(
    rng: &mut ChaCha8Rng,
    preds: &[(&str, usize)],
    universe: &BoundingSet,
) -> Atom {
    random_seed_atoms(rng, preds, universe, 1)
        .pop()
        .unwrap_or_else(|| {
            let &(p, n) = preds.choose(rng).unwrap();
            let pool: Vec<Term> = universe.iter().cloned().collect();
            Atom::new(
                p,
                (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect(),
            )
        })
}

// ---------------------------------------------------------------------------
// Random rule sets
// ---------------------------------------------------------------------------

const VAR_POOL: &[&str] = &["X", "Y", "Z", "W"];

/// Predicates used by the general-purpose random rule sets.
pub const GEN_PREDS: &[(&str, usize)] = &[("p", 1), ("q", 2)];

fn random_pattern_arg(rng: &mut ChaCha8Rng) -> Term {
    match rng.gen_range(0u8..10) {
        0..=5 => Term::var(*VAR_POOL.choose(rng).unwrap()),
        6 => Term::app(if rng.gen_bool(0.5) { "a" } else { "b" }, vec![]),
        7 => Term::app("g", vec![Term::var(*VAR_POOL.choose(rng).unwrap())]),
        _ => Term::app(
            "f",
            vec![
                Term::var(*VAR_POOL.choose(rng).unwrap()),
                Term::var(*VAR_POOL.choose(rng).unwrap()),
            ],
        ),
    }
}

fn random_pattern_atom(rng: &mut ChaCha8Rng, preds: &[(&str, usize)]) -> Atom {
    let &(p, n) = preds.choose(rng).unwrap();
    Atom::new(p, (0..n).map(|_| random_pattern_arg(rng)).collect())
}

/// A random rule set over [`GEN_PREDS`] and [`FUNCS`]. Conclusions may
/// build new terms and may (rarely) bind a variable in the conclusion only,
/// which bounded evaluation instantiates over the universe.
pub fn random_rules(rng: &mut ChaCha8Rng, max_clauses: usize) -> RuleSet {
    loop {
        let n_clauses = rng.gen_range(1..=max_clauses);
        let mut clauses = Vec::new();
        for _ in 0..n_clauses {
            let n_ants = rng.gen_range(1..=2);
            let ants: Vec<Atom> = (0..n_ants)
                .map(|_| random_pattern_atom(rng, GEN_PREDS))
                .collect();
            let mut concl = random_pattern_atom(rng, GEN_PREDS);
            // Mostly reuse antecedent variables in the conclusion so rules
            // chain; conclusion-only variables stay possible but rare.
            if rng.gen_bool(0.9) {
                let mut ant_vars = BTreeSet::new();
                for a in &ants {
                    a.collect_vars(&mut ant_vars);
                }
                let ant_vars: Vec<&String> = ant_vars.iter().collect();
                if !ant_vars.is_empty() {
                    concl = rebind_vars(rng, &concl, &ant_vars);
                }
            }
            clauses.push(Clause::new(ants, concl));
        }
        if let Ok(rules) = RuleSet::new("random", clauses) {
            return rules;
        }
    }
}

fn rebind_vars(rng: &mut ChaCha8Rng, a: &Atom, pool: &[&String]) -> Atom {
    fn walk(rng: &mut ChaCha8Rng, t: &Term, pool: &[&String]) -> Term {
        if t.is_var() {
            return Term::var(pool.choose(rng).unwrap().as_str());
        }
        let (f, args) = t.app_parts().unwrap();
        Term::app(f, args.iter().map(|s| walk(rng, s, pool)).collect())
    }
    Atom::new(
        a.pred.clone(),
        a.args.iter().map(|t| walk(rng, t, pool)).collect(),
    )
}

/// A random superficial rule set with designated `input/k` and `accept/0`
/// predicates: conclusions only use variables bound by their antecedents
/// and never build composite terms, so no clause introduces new terms.
pub fn random_superficial_rules(rng: &mut ChaCha8Rng, k: usize) -> RuleSet {
    assert!((1..=2).contains(&k));
    let input_vars: Vec<Term> = (1..=k).map(|i| Term::var(format!("V{i}"))).collect();
    let mut clauses = Vec::new();

    // Launch: project the input tuple into the unary working predicate.
    let projected = input_vars[rng.gen_range(0..k)].clone();
    clauses.push(Clause::new(
        vec![Atom::new("input", input_vars.clone())],
        Atom::new("r", vec![projected]),
    ));
    if k == 2 && rng.gen_bool(0.7) {
        clauses.push(Clause::new(
            vec![Atom::new("input", input_vars.clone())],
            Atom::new("t", vec![input_vars[0].clone(), input_vars[1].clone()]),
        ));
    }

    // Middle clauses chain r/1 and t/2; antecedents may pattern-match
    // composite arguments, conclusions reuse bound variables.
    for _ in 0..rng.gen_range(1..=3) {
        let ants: Vec<Atom> = (0..rng.gen_range(1..=2))
            .map(|_| {
                let arg = |rng: &mut ChaCha8Rng| match rng.gen_range(0u8..6) {
                    0 => Term::app("g", vec![Term::var(*VAR_POOL.choose(rng).unwrap())]),
                    1 => Term::app(
                        "f",
                        vec![
                            Term::var(*VAR_POOL.choose(rng).unwrap()),
                            Term::var(*VAR_POOL.choose(rng).unwrap()),
                        ],
                    ),
                    _ => Term::var(*VAR_POOL.choose(rng).unwrap()),
                };
                if rng.gen_bool(0.5) {
                    Atom::new("r", vec![arg(rng)])
                } else {
                    Atom::new("t", vec![arg(rng), arg(rng)])
                }
            })
            .collect();
        let mut ant_vars = BTreeSet::new();
        for a in &ants {
            a.collect_vars(&mut ant_vars);
        }
        let pool: Vec<&String> = ant_vars.iter().collect();
        let pick = |rng: &mut ChaCha8Rng| Term::var(pool.choose(rng).unwrap().as_str());
        let concl = if rng.gen_bool(0.5) {
            Atom::new("r", vec![pick(rng)])
        } else {
            Atom::new("t", vec![pick(rng), pick(rng)])
        };
        clauses.push(Clause::new(ants, concl));
    }

    // Accepting clause; usually shape-selective so acceptance genuinely
    // varies with the input tuple.
    let shape = |rng: &mut ChaCha8Rng| match rng.gen_range(0u8..4) {
        0 => Term::var("X"),
        1 => Term::app("g", vec![Term::var("X")]),
        _ => Term::app("f", vec![Term::var("X"), Term::var("Y")]),
    };
    let final_ant = if rng.gen_bool(0.5) {
        Atom::new("r", vec![shape(rng)])
    } else {
        Atom::new("t", vec![shape(rng), Term::var("Z")])
    };
    clauses.push(Clause::new(vec![final_ant], Atom::new("accept", vec![])));

    let rules = RuleSet::new("random-superficial", clauses).expect("consistent arities");
    rlk_core::check_superficial(&rules).expect("generator output is superficial");
    rules
}

// ---------------------------------------------------------------------------
// Brute-force reference engine
// ---------------------------------------------------------------------------

fn assignments(vars: &[String], pool: &[Term]) -> Vec<BTreeMap<String, Term>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        let mut next = Vec::with_capacity(out.len() * pool.len());
        for partial in &out {
            for t in pool {
                let mut m = partial.clone();
                m.insert(v.clone(), t.clone());
                next.push(m);
            }
        }
        out = next;
    }
    out
}

fn apply(map: &BTreeMap<String, Term>, t: &Term) -> Term {
    if let Some(v) = t.var_name() {
        return map.get(v).cloned().unwrap_or_else(|| t.clone());
    }
    let (f, args) = t.app_parts().unwrap();
    Term::app(f, args.iter().map(|s| apply(map, s)).collect())
}

fn apply_atom(map: &BTreeMap<String, Term>, a: &Atom) -> Atom {
    Atom::new(a.pred.clone(), a.args.iter().map(|t| apply(map, t)).collect())
}

fn is_label(a: &Atom, universe: &BoundingSet) -> bool {
    a.args.iter().all(|t| universe.contains(t))
}

/// Chaos-iteration bounded saturation: every clause instance over the
/// universe whose formulas are all label formulas fires, until nothing new
/// appears. Deliberately naive; the reference the engine is tested against.
pub fn naive_bounded(rules: &RuleSet, seed: &[Atom], universe: &BoundingSet) -> BTreeSet<Atom> {
    let pool: Vec<Term> = universe.iter().cloned().collect();
    let mut facts: BTreeSet<Atom> = seed.iter().cloned().collect();
    loop {
        let mut added = false;
        for clause in &rules.clauses {
            let mut vars = BTreeSet::new();
            clause.collect_vars(&mut vars);
            let vars: Vec<String> = vars.into_iter().collect();
            for map in assignments(&vars, &pool) {
                let concl = apply_atom(&map, &clause.conclusion);
                if !is_label(&concl, universe) || facts.contains(&concl) {
                    continue;
                }
                let fires = clause.antecedents.iter().all(|ant| {
                    let ant = apply_atom(&map, ant);
                    is_label(&ant, universe) && facts.contains(&ant)
                });
                if fires {
                    facts.insert(concl);
                    added = true;
                }
            }
        }
        if !added {
            return facts;
        }
    }
}

/// Builds a seed fact base, deduplicating first.
pub fn seed_base(atoms: &[Atom]) -> FactBase {
    FactBase::new(atoms.iter().cloned()).expect("seed atoms are ground")
}

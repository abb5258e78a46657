//! Generated support rules that define a successor ordering on the subterms
//! of an input term.
//!
//! [`scaffold_rules`] instantiates, for every symbol of a signature, rule
//! schemas for a family of auxiliary relations over the subterms of a term
//! marked with the `input` predicate: `m` (mentioned), `pf_<f>` (argument
//! unpacking), `su` (subterm), `ne` (distinctness), `ni` (non-containment),
//! `w`/`wp`/`l` (walk, walk modulo elimination, last), and finally `s`, the
//! successor relation of a left-to-right preorder traversal of the input
//! with later duplicates removed. Saturating these rules inside the subterm
//! closure of the input yields a total successor ordering in polynomial
//! time, which downstream rule sets can consume as a scaffold.
//!
//! [`traversal_oracle`] computes the same traversal directly and is the
//! reference the generated rules are tested against.

use std::collections::BTreeSet;

use crate::engine::{saturate_bounded, FactBase};
use crate::term::{subterm_closure, Atom, Clause, RuleSet, Signature, Term};

fn xvars(n: usize) -> Vec<Term> {
    (1..=n).map(|i| Term::var(format!("X{i}"))).collect()
}

fn yvars(n: usize) -> Vec<Term> {
    (1..=n).map(|i| Term::var(format!("Y{i}"))).collect()
}

fn unary(pred: &str, t: Term) -> Atom {
    Atom::new(pred, vec![t])
}

fn binary(pred: &str, s: Term, t: Term) -> Atom {
    Atom::new(pred, vec![s, t])
}

fn ternary(pred: &str, a: Term, b: Term, c: Term) -> Atom {
    Atom::new(pred, vec![a, b, c])
}

/// Walk and last rules for a unary function: the traversal of `f(x)` is
/// `f(x)` followed by the traversal of `x`, with nothing to eliminate.
fn walk_unary(f: &str, clauses_l: &mut Vec<Clause>, clauses_w: &mut Vec<Clause>) {
    let fx = Term::app(f, vec![Term::var("X")]);
    let x = Term::var("X");
    let s = Term::var("S");
    let (u, v) = (Term::var("U"), Term::var("V"));
    clauses_l.push(Clause::new(
        vec![unary("m", fx.clone()), binary("l", s.clone(), x.clone())],
        binary("l", s, fx.clone()),
    ));
    clauses_w.push(Clause::new(
        vec![unary("m", fx.clone())],
        ternary("w", fx.clone(), x.clone(), fx.clone()),
    ));
    clauses_w.push(Clause::new(
        vec![unary("m", fx.clone()), ternary("w", u.clone(), v.clone(), x)],
        ternary("w", u, v, fx),
    ));
}

/// Walk and last rules for a binary function, with elimination of the
/// right-argument subterms already seen on the left.
fn walk_binary(f: &str, clauses_l: &mut Vec<Clause>, clauses_w: &mut Vec<Clause>) {
    let (x, y) = (Term::var("X"), Term::var("Y"));
    let fxy = Term::app(f, vec![x.clone(), y.clone()]);
    let (xlast, ylast, flast) = (Term::var("Xlast"), Term::var("Ylast"), Term::var("Flast"));
    let (s, u, v, w) = (
        Term::var("S"),
        Term::var("U"),
        Term::var("V"),
        Term::var("W"),
    );

    // Last: the right argument's last survives unless it lies inside the
    // left argument; then either the whole right argument is swallowed, or
    // the last right-side survivor is found by walking modulo elimination.
    clauses_l.push(Clause::new(
        vec![
            unary("m", fxy.clone()),
            binary("l", ylast.clone(), y.clone()),
            binary("ni", ylast.clone(), x.clone()),
        ],
        binary("l", ylast.clone(), fxy.clone()),
    ));
    clauses_l.push(Clause::new(
        vec![
            unary("m", fxy.clone()),
            binary("su", y.clone(), x.clone()),
            binary("l", xlast.clone(), x.clone()),
        ],
        binary("l", xlast, fxy.clone()),
    ));
    clauses_l.push(Clause::new(
        vec![
            binary("l", ylast.clone(), y.clone()),
            binary("su", ylast.clone(), x.clone()),
            binary("ni", y.clone(), x.clone()),
            ternary("wp", flast.clone(), ylast.clone(), fxy.clone()),
            binary("ni", flast.clone(), x.clone()),
        ],
        binary("l", flast, fxy.clone()),
    ));

    // Walk: left-argument edges survive unchanged; the right argument
    // enters after the left's last element; right-argument edges survive
    // once both endpoints escape the left argument, skipping over
    // eliminated elements.
    clauses_w.push(Clause::new(
        vec![unary("m", fxy.clone())],
        ternary("w", fxy.clone(), x.clone(), fxy.clone()),
    ));
    clauses_w.push(Clause::new(
        vec![
            unary("m", fxy.clone()),
            ternary("w", u.clone(), v.clone(), x.clone()),
        ],
        ternary("w", u.clone(), v.clone(), fxy.clone()),
    ));
    clauses_w.push(Clause::new(
        vec![
            unary("m", fxy.clone()),
            binary("ni", y.clone(), x.clone()),
            binary("l", s.clone(), x.clone()),
        ],
        ternary("w", s, y.clone(), fxy.clone()),
    ));
    clauses_w.push(Clause::new(
        vec![
            unary("m", fxy.clone()),
            ternary("w", u.clone(), v.clone(), y.clone()),
        ],
        ternary("wp", u.clone(), v.clone(), fxy.clone()),
    ));
    clauses_w.push(Clause::new(
        vec![
            ternary("wp", u.clone(), v.clone(), fxy.clone()),
            binary("ni", u.clone(), x.clone()),
            binary("ni", v.clone(), x.clone()),
        ],
        ternary("w", u.clone(), v.clone(), fxy.clone()),
    ));
    clauses_w.push(Clause::new(
        vec![
            ternary("wp", u.clone(), v.clone(), fxy.clone()),
            ternary("wp", v.clone(), w.clone(), fxy.clone()),
            binary("su", v, x),
        ],
        ternary("wp", u, w, fxy),
    ));
}

/// Walk and last rules for arity three and up. The traversal of
/// `f(x1, .., xn)` is `f(x1, .., xn)` followed by the traversals of the
/// arguments in order, where each element already seen inside an earlier
/// argument is eliminated. Per argument position `k`, `wsq_<f>_<k>` relates
/// traversal elements of `xk` whose intermediates are all eliminated, and
/// `lp_<f>_<k>(s, t)` says `s` is the last survivor among the first `k`
/// argument traversals of `t`.
fn walk_general(f: &str, n: usize, clauses_l: &mut Vec<Clause>, clauses_w: &mut Vec<Clause>) {
    let xs = xvars(n);
    let fx = Term::app(f, xs.clone());
    let (s, t) = (Term::var("S"), Term::var("T"));
    let (u, v, w) = (Term::var("U"), Term::var("V"), Term::var("W"));
    let wsq = |k: usize| format!("wsq_{f}_{k}");
    let lp = |k: usize| format!("lp_{f}_{k}");
    // ni guards saying a term escapes every argument before position k.
    let escapes = |term: &Term, k: usize| -> Vec<Atom> {
        xs[..k - 1]
            .iter()
            .map(|xj| binary("ni", term.clone(), xj.clone()))
            .collect()
    };

    clauses_w.push(Clause::new(
        vec![unary("m", fx.clone())],
        ternary("w", fx.clone(), xs[0].clone(), fx.clone()),
    ));
    clauses_w.push(Clause::new(
        vec![
            unary("m", fx.clone()),
            ternary("w", u.clone(), v.clone(), xs[0].clone()),
        ],
        ternary("w", u.clone(), v.clone(), fx.clone()),
    ));
    clauses_l.push(Clause::new(
        vec![unary("m", fx.clone()), binary("l", s.clone(), xs[0].clone())],
        binary(&lp(1), s.clone(), fx.clone()),
    ));

    for k in 2..=n {
        let xk = xs[k - 1].clone();
        // Edges within argument k, closed over eliminated intermediates,
        // then promoted once both endpoints survive.
        clauses_w.push(Clause::new(
            vec![
                unary("m", fx.clone()),
                ternary("w", u.clone(), v.clone(), xk.clone()),
            ],
            ternary(&wsq(k), u.clone(), v.clone(), fx.clone()),
        ));
        for xj in &xs[..k - 1] {
            clauses_w.push(Clause::new(
                vec![
                    ternary(&wsq(k), u.clone(), v.clone(), fx.clone()),
                    ternary(&wsq(k), v.clone(), w.clone(), fx.clone()),
                    binary("su", v.clone(), xj.clone()),
                ],
                ternary(&wsq(k), u.clone(), w.clone(), fx.clone()),
            ));
        }
        let mut ants = vec![ternary(&wsq(k), u.clone(), v.clone(), fx.clone())];
        ants.extend(escapes(&u, k));
        ants.extend(escapes(&v, k));
        clauses_w.push(Clause::new(
            ants,
            ternary("w", u.clone(), v.clone(), fx.clone()),
        ));
        // Entry edge: argument k follows the last survivor of the prefix
        // whenever argument k itself survives.
        let mut ants = vec![binary(&lp(k - 1), s.clone(), fx.clone())];
        ants.extend(escapes(&xk, k));
        clauses_w.push(Clause::new(ants, ternary("w", s.clone(), xk.clone(), fx.clone())));

        // Last survivor of the first k arguments: carried over when
        // argument k is swallowed whole, else the last survivor within
        // argument k.
        for xj in &xs[..k - 1] {
            clauses_l.push(Clause::new(
                vec![
                    binary(&lp(k - 1), s.clone(), fx.clone()),
                    binary("su", xk.clone(), xj.clone()),
                ],
                binary(&lp(k), s.clone(), fx.clone()),
            ));
        }
        let mut ants = vec![unary("m", fx.clone()), binary("l", t.clone(), xk.clone())];
        ants.extend(escapes(&t, k));
        clauses_l.push(Clause::new(ants, binary(&lp(k), t.clone(), fx.clone())));
        for xj in &xs[..k - 1] {
            let mut ants = vec![
                binary("l", t.clone(), xk.clone()),
                binary("su", t.clone(), xj.clone()),
                ternary(&wsq(k), u.clone(), t.clone(), fx.clone()),
            ];
            ants.extend(escapes(&u, k));
            clauses_l.push(Clause::new(ants, binary(&lp(k), u.clone(), fx.clone())));
        }
    }
    clauses_l.push(Clause::new(
        vec![binary(&lp(n), s.clone(), fx.clone())],
        binary("l", s, fx),
    ));
}

/// Instantiates the scaffold rule schemas for every function symbol of
/// `sig`. The generated set defines, for a term `t` seeded as `input(t)`
/// and saturated inside the subterm closure of `t`:
///
/// * `m(s)` for every subterm `s` of `t`;
/// * `pf_<f>(s, s1, .., sn)` unpacking each application subterm;
/// * `su(u, v)` when `u` is a subterm of `v`;
/// * `ne(u, v)` when `u` and `v` are distinct;
/// * `ni(u, v)` when `u` is not a subterm of `v`;
/// * `w(u, v, z)`, `l(u, z)` walking the duplicate-free preorder traversal
///   of each subterm `z`, with `wp` and the per-position `wsq`/`lp`
///   predicates as intermediates;
/// * `s(u, v)` when `v` follows `u` in the traversal of `t` itself.
///
/// The `l` base facts for constants are the only clauses that are not
/// superficial; everything else re-derives its conclusion terms from its
/// antecedents.
pub fn scaffold_rules(sig: &Signature) -> RuleSet {
    let x = Term::var("X");
    let y = Term::var("Y");
    let z = Term::var("Z");
    let mut clauses = Vec::new();

    // Mentioned: the input and, recursively, every argument.
    clauses.push(Clause::new(
        vec![unary("input", x.clone())],
        unary("m", x.clone()),
    ));
    for (f, &n) in &sig.functions {
        let fx = Term::app(f, xvars(n));
        for xi in xvars(n) {
            clauses.push(Clause::new(vec![unary("m", fx.clone())], unary("m", xi)));
        }
    }

    // Unpacking: each mentioned application, spread over its arguments.
    for (f, &n) in &sig.functions {
        let xs = xvars(n);
        let fx = Term::app(f, xs.clone());
        let mut args = vec![fx.clone()];
        args.extend(xs);
        clauses.push(Clause::new(
            vec![unary("m", fx)],
            Atom::new(format!("pf_{f}"), args),
        ));
    }

    // Subterm: reflexive, and through each argument position.
    clauses.push(Clause::new(
        vec![unary("m", x.clone())],
        binary("su", x.clone(), x.clone()),
    ));
    for (f, &n) in &sig.functions {
        let fx = Term::app(f, xvars(n));
        for xi in xvars(n) {
            clauses.push(Clause::new(
                vec![unary("m", fx.clone()), binary("su", y.clone(), xi)],
                binary("su", y.clone(), fx.clone()),
            ));
        }
    }

    // Distinctness: different head symbols are distinct outright; equal
    // head symbols are distinct exactly when they differ somewhere, so one
    // witnessing position with otherwise independent arguments keeps the
    // relation complete even for terms that differ at several positions.
    for (f, &n) in &sig.functions {
        let fx = Term::app(f, xvars(n));
        for (g, &m) in &sig.functions {
            if f != g {
                let gy = Term::app(g, yvars(m));
                clauses.push(Clause::new(
                    vec![unary("m", fx.clone()), unary("m", gy.clone())],
                    binary("ne", fx.clone(), gy),
                ));
            }
        }
    }
    for (f, &n) in &sig.functions {
        let fx = Term::app(f, xvars(n));
        let fy = Term::app(f, yvars(n));
        for (xi, yi) in xvars(n).into_iter().zip(yvars(n)) {
            clauses.push(Clause::new(
                vec![
                    unary("m", fx.clone()),
                    unary("m", fy.clone()),
                    binary("ne", xi, yi),
                ],
                binary("ne", fx.clone(), fy.clone()),
            ));
        }
    }

    // Non-containment: distinct from the whole and not inside any argument.
    for (f, &n) in &sig.functions {
        let xs = xvars(n);
        let fx = Term::app(f, xs.clone());
        let mut ants = vec![binary("ne", z.clone(), fx.clone())];
        for xi in xs {
            ants.push(binary("ni", z.clone(), xi));
        }
        clauses.push(Clause::new(ants, binary("ni", z.clone(), fx)));
    }

    // Walk and last, per arity.
    let mut clauses_l = Vec::new();
    let mut clauses_w = Vec::new();
    for (f, &n) in &sig.functions {
        match n {
            0 => clauses_l.push(Clause::fact(binary(
                "l",
                Term::app(f, vec![]),
                Term::app(f, vec![]),
            ))),
            1 => walk_unary(f, &mut clauses_l, &mut clauses_w),
            2 => walk_binary(f, &mut clauses_l, &mut clauses_w),
            _ => walk_general(f, n, &mut clauses_l, &mut clauses_w),
        }
    }
    clauses.extend(clauses_l);
    clauses.extend(clauses_w);

    // Successor: the walk of the input term itself.
    clauses.push(Clause::new(
        vec![
            unary("input", z.clone()),
            ternary("w", x.clone(), y.clone(), z.clone()),
        ],
        binary("s", x, y),
    ));

    RuleSet::new("scaffold", clauses).expect("generated clauses use consistent arities")
}

/// The left-to-right preorder traversal of the subterms of `t` with later
/// duplicates eliminated. This is the ordering the generated successor
/// relation is tested against.
///
/// # Panics
///
/// Panics if `t` is not ground.
pub fn traversal_oracle(t: &Term) -> Vec<Term> {
    assert!(t.is_ground(), "traversal is defined on ground terms");
    let mut out = Vec::new();
    t.for_each_subterm(&mut |s| out.push(s.clone()));
    out
}

/// Saturates the scaffold rules on `input(t)` inside the subterm closure of
/// `t` and projects out the derived successor facts.
///
/// # Panics
///
/// Panics if `t` is not ground or uses a symbol not declared in `sig`.
pub fn successor_facts(sig: &Signature, t: &Term) -> BTreeSet<Atom> {
    assert!(t.is_ground(), "the input term must be ground");
    t.for_each_subterm(&mut |s| {
        if let Some((f, args)) = s.app_parts() {
            assert_eq!(
                sig.functions.get(f),
                Some(&args.len()),
                "input term uses {f}/{} outside the signature",
                args.len()
            );
        }
    });
    let rules = scaffold_rules(sig);
    let seed =
        FactBase::new(vec![Atom::new("input", vec![t.clone()])]).expect("one ground seed fact");
    let universe = subterm_closure([t]).expect("ground input term");
    let (derived, _) = saturate_bounded(&rules, &seed, &universe);
    derived
        .iter()
        .filter(|a| a.pred == "s")
        .cloned()
        .collect()
}

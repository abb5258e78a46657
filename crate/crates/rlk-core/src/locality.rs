//! Inductive-locality checking: certify that bounded evaluation never needs
//! a term outside its bounding set, or refute with a concrete witness.
//!
//! A *feedback event* is a set of facts Σ over a bounding set Y, a goal Φ
//! not derivable under Y, and a single one-step extension α of Y that makes
//! Φ derivable. Rule sets with no feedback events are local: bounded and
//! free derivability agree on bounded goals. The checker works on *template
//! schemas*, liftings of candidate events in which variables stand for
//! arbitrary bounded terms and a distinguished marker constant stands for
//! the extension. Starting from the schemas readable off the clauses
//! ([`generate_initial`]), backchaining ([`backchain`], [`b_step`]) grows
//! the set until every schema is either critical or justified by the set
//! itself ([`self_justifying`]); reaching that state at some depth certifies
//! the rule set inductively local ([`check_locality`]). A critical schema
//! that freezes into a real event refutes locality and the witness is
//! re-verified by the evaluation engine before it is reported.
//!
//! [`ground_templates`] repeats the whole construction over explicit small
//! universes with no lifting at all. It exists to cross-validate the schema
//! machinery and is guarded against combinatorial blowup.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::engine::{saturate_bounded, FactBase};
use crate::par;
use crate::term::{
    subterm_closure, unify, Atom, BoundingSet, Clause, RuleSet, Substitution, Term,
};

/// Default node budget for the justification match search.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Default number of backchaining levels explored by [`check_locality`].
pub const DEFAULT_MAX_DEPTH: usize = 10;

/// Ground-oracle guard: universes above this size are refused.
const MAX_ORACLE_UNIVERSE: usize = 8;

/// Canonicalization enumerates atom orderings only while the permutation
/// count stays below this; beyond it, deduplication falls back to a fixed
/// sorted order (coarser but still sound).
const MAX_CANONICAL_PERMUTATIONS: u64 = 5040;

/// Name of the marker constant standing for the extension inside schema
/// atoms. Deliberately not a lexable identifier, so it can never collide
/// with a symbol of a parsed rule set.
const MARKER: &str = "\u{3b1}";

/// Variable standing for an opaque extension during unification; disjoint
/// from canonical schema variables (`V*`) and renamed clause variables
/// (`U*`).
const MARKER_VAR: &str = "A_";

/// The distinguished constant standing for the extension α in schema atoms.
///
/// Gamma atoms of a [`TemplateSchema`] carry this constant in the argument
/// positions the extension occupies.
pub fn extension_marker() -> Term {
    Term::app(MARKER, Vec::new())
}

fn is_marker(t: &Term) -> bool {
    matches!(t.app_parts(), Some((MARKER, args)) if args.is_empty())
}

/// Shape knowledge about a schema's extension.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AlphaShape {
    /// Any one-step extension of the bounding set.
    Opaque,
    /// An application `f(t1, ..., tn)` whose arguments are bounded terms.
    App(String, Vec<Term>),
}

/// A lifted feedback template: variables stand for bounded terms, the
/// marker constant stands for the extension.
///
/// Invariants, preserved by every operation here:
/// - `sigma`, `phi`, and the arguments of a shaped `alpha` never contain
///   the marker;
/// - every atom of `gamma` carries the marker in at least one argument
///   position, and only ever as a whole argument (the extension is never a
///   proper subterm of another term);
/// - every marker-free term of the schema is implicitly constrained to lie
///   in the bounding set, the extension is not, and nothing else is
///   assumed;
/// - schemas are kept in a canonical variable renaming, so structural
///   equality coincides with equality up to renaming.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateSchema {
    /// Extension-free antecedent facts.
    pub sigma: BTreeSet<Atom>,
    /// Extension-carrying facts; a multiset kept sorted.
    pub gamma: Vec<Atom>,
    /// The conclusion at stake.
    pub phi: Atom,
    /// What is known about the extension's shape.
    pub alpha: AlphaShape,
}

impl TemplateSchema {
    /// A schema with nothing left to backchain; the candidate events.
    pub fn is_critical(&self) -> bool {
        self.gamma.is_empty()
    }
}

impl fmt::Display for TemplateSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, atoms: &mut dyn Iterator<Item = &Atom>| {
            let mut first = true;
            write!(f, "{{")?;
            for a in atoms {
                if !first {
                    write!(f, ", ")?;
                }
                write!(f, "{a}")?;
                first = false;
            }
            write!(f, "}}")
        };
        write!(f, "sigma=")?;
        list(f, &mut self.sigma.iter())?;
        write!(f, " gamma=")?;
        list(f, &mut self.gamma.iter())?;
        write!(f, " phi={} alpha=", self.phi)?;
        match &self.alpha {
            AlphaShape::Opaque => write!(f, "{MARKER}"),
            AlphaShape::App(g, args) => write!(f, "{}", Term::app(g.clone(), args.clone())),
        }
    }
}

/// A concrete refutation of locality: facts Σ over Y cannot derive Φ, yet
/// extending Y by the single term α makes Φ derivable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FeedbackEvent {
    /// Ground facts over `y`.
    pub sigma: BTreeSet<Atom>,
    /// The goal separated by the extension.
    pub phi: Atom,
    /// The bounding set.
    pub y: BoundingSet,
    /// The one-step extension of `y`.
    pub alpha: Term,
}

impl fmt::Display for FeedbackEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.sigma {
            writeln!(f, "sigma: {a}")?;
        }
        writeln!(f, "phi: {}", self.phi)?;
        for t in self.y.iter() {
            writeln!(f, "y: {t}")?;
        }
        write!(f, "alpha: {}", self.alpha)
    }
}

/// Why a check run stopped without an answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InconclusiveReason {
    /// The level or node budget ran out before either outcome.
    DepthExhausted,
    /// Backchaining reached a fixed point that is not self-justifying.
    FixpointWithoutJustification,
}

impl fmt::Display for InconclusiveReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InconclusiveReason::DepthExhausted => write!(f, "depth-exhausted"),
            InconclusiveReason::FixpointWithoutJustification => {
                write!(f, "fixpoint-without-justification")
            }
        }
    }
}

/// Outcome of a locality check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Some backchaining level is self-justifying; no feedback event exists
    /// at any depth. Carries the certifying level.
    InductivelyLocal(usize),
    /// A feedback event was found and engine-verified.
    NotLocal(FeedbackEvent),
    /// Neither outcome within the allotted depth and budget.
    Inconclusive(InconclusiveReason),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::InductivelyLocal(n) => write!(f, "inductively-local n={n}"),
            Verdict::NotLocal(e) => write!(f, "not-local\n{e}"),
            Verdict::Inconclusive(r) => write!(f, "inconclusive {r}"),
        }
    }
}

/// A verdict plus per-level statistics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    /// Schema count at each level examined, starting with the initial set.
    pub schemas_per_level: Vec<usize>,
}

/// Failure modes of the ground oracle.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocalityError {
    #[error("universe too large for ground oracle")]
    UniverseTooLarge,
}

/// Internal signal that the justification node budget ran out.
struct Exhausted;

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

/// The atom with every variable replaced by a fixed placeholder; two atoms
/// have equal shapes iff some renaming maps one onto the other.
fn atom_shape(a: &Atom) -> Atom {
    fn blur(t: &Term) -> Term {
        if t.is_var() {
            Term::var("_")
        } else {
            let (f, args) = t.app_parts().expect("not a variable");
            Term::app(f, args.iter().map(blur).collect())
        }
    }
    Atom::new(a.pred.clone(), a.args.iter().map(blur).collect())
}

/// Groups atoms by shape, each group sorted; group order follows shape
/// order, which renaming cannot disturb.
fn shape_groups(atoms: &[Atom]) -> Vec<Vec<Atom>> {
    let mut keyed: Vec<(Atom, Atom)> =
        atoms.iter().map(|a| (atom_shape(a), a.clone())).collect();
    keyed.sort();
    let mut groups: Vec<(Atom, Vec<Atom>)> = Vec::new();
    for (shape, atom) in keyed {
        match groups.last_mut() {
            Some((s, g)) if *s == shape => g.push(atom),
            _ => groups.push((shape, vec![atom])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            let mut v = Vec::with_capacity(items.len());
            v.push(head.clone());
            v.append(&mut tail);
            out.push(v);
        }
    }
    out
}

/// All concatenations of one permutation per group.
fn group_orderings(groups: &[Vec<Atom>]) -> Vec<Vec<Atom>> {
    let mut acc: Vec<Vec<Atom>> = vec![Vec::new()];
    for g in groups {
        let perms = permutations(g);
        let mut next = Vec::with_capacity(acc.len() * perms.len());
        for base in &acc {
            for p in &perms {
                let mut v = base.clone();
                v.extend(p.iter().cloned());
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

fn factorial(n: usize) -> u64 {
    (2..=n as u64).product::<u64>().max(1)
}

fn assign_vars_preorder(t: &Term, sub: &mut Substitution, next: &mut usize) {
    if let Some(v) = t.var_name() {
        if sub.get(v).is_none() {
            sub.insert(v, Term::var(format!("V{}", *next)));
            *next += 1;
        }
    } else if let Some((_, args)) = t.app_parts() {
        for a in args {
            assign_vars_preorder(a, sub, next);
        }
    }
}

/// First-occurrence renaming of every variable across the given atom
/// sequence, then the alpha pattern arguments.
fn canonical_var_rename(atoms: &[&Atom], alpha: &AlphaShape) -> Substitution {
    let mut sub = Substitution::new();
    let mut next = 0usize;
    for a in atoms {
        for t in &a.args {
            assign_vars_preorder(t, &mut sub, &mut next);
        }
    }
    if let AlphaShape::App(_, args) = alpha {
        for t in args {
            assign_vars_preorder(t, &mut sub, &mut next);
        }
    }
    sub
}

fn rename_alpha(alpha: &AlphaShape, sub: &Substitution) -> AlphaShape {
    match alpha {
        AlphaShape::Opaque => AlphaShape::Opaque,
        AlphaShape::App(f, args) => {
            AlphaShape::App(f.clone(), args.iter().map(|t| sub.apply_term(t)).collect())
        }
    }
}

/// Brings a schema into canonical form so that structural equality is
/// equality up to variable renaming.
///
/// A renaming maps atoms onto same-shape atoms, so the lexicographic
/// minimum over orderings that permute only within equal-shape groups is
/// renaming-invariant.
fn canonicalize(sigma: Vec<Atom>, gamma: Vec<Atom>, phi: Atom, alpha: AlphaShape) -> TemplateSchema {
    let mut sigma = sigma;
    sigma.sort();
    sigma.dedup();
    let sigma_groups = shape_groups(&sigma);
    let gamma_groups = shape_groups(&gamma);
    let mut count: u64 = 1;
    for g in sigma_groups.iter().chain(gamma_groups.iter()) {
        count = count.saturating_mul(factorial(g.len()));
    }
    let (sigma_orders, gamma_orders) = if count > MAX_CANONICAL_PERMUTATIONS {
        (
            vec![sigma_groups.concat()],
            vec![gamma_groups.concat()],
        )
    } else {
        (group_orderings(&sigma_groups), group_orderings(&gamma_groups))
    };
    let mut best: Option<TemplateSchema> = None;
    for so in &sigma_orders {
        for go in &gamma_orders {
            let seq: Vec<&Atom> = so.iter().chain(go.iter()).chain([&phi]).collect();
            let sub = canonical_var_rename(&seq, &alpha);
            let mut renamed_gamma: Vec<Atom> = go.iter().map(|a| sub.apply_atom(a)).collect();
            renamed_gamma.sort();
            let cand = TemplateSchema {
                sigma: so.iter().map(|a| sub.apply_atom(a)).collect(),
                gamma: renamed_gamma,
                phi: sub.apply_atom(&phi),
                alpha: rename_alpha(&alpha, &sub),
            };
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best.expect("at least one ordering")
}

/// Checks the structural invariants of a schema: marker-free sigma, phi,
/// and alpha arguments; every gamma atom carrying the marker, and only as a
/// whole argument.
pub fn is_well_formed(s: &TemplateSchema) -> bool {
    let m = extension_marker();
    let clean = |t: &Term| !t.contains_term(&m);
    s.sigma.iter().all(|a| a.args.iter().all(clean))
        && s.phi.args.iter().all(clean)
        && s.gamma.iter().all(|a| {
            a.args.iter().any(is_marker) && a.args.iter().all(|t| is_marker(t) || clean(t))
        })
        && match &s.alpha {
            AlphaShape::Opaque => true,
            AlphaShape::App(_, args) => args.iter().all(clean),
        }
}

// ---------------------------------------------------------------------------
// Generation and backchaining
// ---------------------------------------------------------------------------

/// The initial schema set: one schema per clause and per admissible
/// extension candidate.
///
/// A candidate is a clause argument term that occurs nowhere in the
/// conclusion and is never a proper subterm of another clause term; its
/// whole-argument occurrences become the marker, antecedents split into
/// `sigma` (marker-free) and `gamma`, and the conclusion becomes `phi`. A
/// variable candidate leaves the extension opaque; a compound candidate
/// records its shape.
pub fn generate_initial(rules: &RuleSet) -> BTreeSet<TemplateSchema> {
    let mut out = BTreeSet::new();
    for clause in &rules.clauses {
        let mut args: Vec<&Term> = Vec::new();
        for atom in clause.antecedents.iter().chain([&clause.conclusion]) {
            for t in &atom.args {
                if !args.contains(&t) {
                    args.push(t);
                }
            }
        }
        for cand in &args {
            if args.iter().any(|u| u.properly_contains(cand)) {
                continue;
            }
            if clause.conclusion.args.iter().any(|t| t.contains_term(cand)) {
                continue;
            }
            let alpha = match cand.app_parts() {
                Some((f, fa)) => AlphaShape::App(f.to_string(), fa.to_vec()),
                None => AlphaShape::Opaque,
            };
            let contract = |a: &Atom| {
                Atom::new(
                    a.pred.clone(),
                    a.args
                        .iter()
                        .map(|t| if t == *cand { extension_marker() } else { t.clone() })
                        .collect(),
                )
            };
            let mut sigma = Vec::new();
            let mut gamma = Vec::new();
            for ant in &clause.antecedents {
                let a = contract(ant);
                if a.args.iter().any(is_marker) {
                    gamma.push(a);
                } else {
                    sigma.push(a);
                }
            }
            // the candidate occurs somewhere, and not in the conclusion
            debug_assert!(!gamma.is_empty());
            let schema = canonicalize(sigma, gamma, clause.conclusion.clone(), alpha);
            debug_assert!(is_well_formed(&schema));
            out.insert(schema);
        }
    }
    out
}

/// The clause with its variables renamed `U0, U1, ...`, keeping them
/// disjoint from canonical schema variables.
fn rename_apart(clause: &Clause) -> Clause {
    let mut vars = BTreeSet::new();
    clause.collect_vars(&mut vars);
    let sub = Substitution::from_pairs(
        vars.into_iter()
            .enumerate()
            .map(|(i, v)| (v, Term::var(format!("U{i}")))),
    );
    sub.apply_clause(clause)
}

/// The atom with marker arguments replaced by the unification
/// representative of the extension.
fn expand_marker(a: &Atom, repr: &Term) -> Atom {
    Atom::new(
        a.pred.clone(),
        a.args
            .iter()
            .map(|t| if is_marker(t) { repr.clone() } else { t.clone() })
            .collect(),
    )
}

fn atom_free_of(a: &Atom, needle: &Term) -> bool {
    a.args.iter().all(|t| !t.contains_term(needle))
}

/// One backchaining step on the gamma atom at `target`.
///
/// Each clause whose conclusion unifies with the target (the extension
/// acting as an opaque constant, or as its recorded application pattern)
/// yields schemas with the target replaced by the clause's instantiated
/// antecedents. Where the unifier leaves the extension's identity to a
/// clause variable the shape stays opaque; where it meets a compound
/// conclusion argument the emitted schema records that shape. Every
/// leftover clause variable that could still be the extension branches both
/// ways. Branches that would place the extension anywhere other than as a
/// whole argument of a gamma atom are discarded: such instances cannot
/// satisfy the bounding discipline.
pub fn backchain(s: &TemplateSchema, target: usize, rules: &RuleSet) -> BTreeSet<TemplateSchema> {
    assert!(target < s.gamma.len(), "target must select a gamma atom");
    let repr = match &s.alpha {
        AlphaShape::Opaque => Term::var(MARKER_VAR),
        AlphaShape::App(f, args) => Term::app(f.clone(), args.clone()),
    };
    let theta = expand_marker(&s.gamma[target], &repr);
    let gamma_rest: Vec<&Atom> = s
        .gamma
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target)
        .map(|(_, a)| a)
        .collect();
    let mut out = BTreeSet::new();
    for clause in &rules.clauses {
        let c = rename_apart(clause);
        let Some(u) = unify(&c.conclusion, &theta) else {
            continue;
        };
        let alpha_inst = u.apply_term(&repr);
        // where the extension landed: a still-opaque variable, or a shape
        let refined = match alpha_inst.var_name() {
            Some(v) if v.starts_with('V') => continue, // a bounded variable cannot be it
            Some(_) => None,
            None => {
                let (f, fa) = alpha_inst.app_parts().expect("not a variable");
                Some((f.to_string(), fa.to_vec()))
            }
        };
        // inherited extension-free parts must stay that way
        let sigma_new: Vec<Atom> = s.sigma.iter().map(|a| u.apply_atom(a)).collect();
        if !sigma_new.iter().all(|a| atom_free_of(a, &alpha_inst)) {
            continue;
        }
        let phi_new = u.apply_atom(&s.phi);
        if !atom_free_of(&phi_new, &alpha_inst) {
            continue;
        }
        let mut gamma_new: Vec<Atom> = Vec::with_capacity(gamma_rest.len());
        let mut ok = true;
        for a in &gamma_rest {
            let ia = u.apply_atom(a);
            if !ia.args.iter().all(|t| is_marker(t) || !t.contains_term(&alpha_inst)) {
                ok = false;
                break;
            }
            gamma_new.push(ia);
        }
        if !ok {
            continue;
        }
        // clause antecedents: whole-argument occurrences contract to the
        // marker; deeper occurrences kill the branch
        let mut ants: Vec<Atom> = Vec::with_capacity(c.antecedents.len());
        for a in &c.antecedents {
            let ia = u.apply_atom(a);
            let mut args = Vec::with_capacity(ia.args.len());
            for t in &ia.args {
                if *t == alpha_inst {
                    args.push(extension_marker());
                } else if t.contains_term(&alpha_inst) {
                    ok = false;
                    break;
                } else {
                    args.push(t.clone());
                }
            }
            if !ok {
                break;
            }
            ants.push(Atom::new(ia.pred.clone(), args));
        }
        if !ok {
            continue;
        }
        // leftover clause variables: those pinned to the bounding set by
        // appearing in an extension-free position never branch; the rest
        // are each either the extension or a bounded term
        let mut pinned: BTreeSet<String> = BTreeSet::new();
        for a in sigma_new.iter().chain(gamma_new.iter()) {
            a.collect_vars(&mut pinned);
        }
        phi_new.collect_vars(&mut pinned);
        if let Some((_, fa)) = &refined {
            for t in fa {
                t.collect_vars(&mut pinned);
            }
        }
        let mut loose: BTreeSet<String> = BTreeSet::new();
        for a in &ants {
            for t in &a.args {
                match t.var_name() {
                    Some(v) => {
                        loose.insert(v.to_string());
                    }
                    None => t.collect_vars(&mut pinned),
                }
            }
        }
        let branchable: Vec<String> = loose.difference(&pinned).cloned().collect();
        assert!(
            branchable.len() <= 20,
            "clause has too many unbound variables to branch over"
        );
        for mask in 0usize..(1 << branchable.len()) {
            let sub = Substitution::from_pairs(
                branchable
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, v)| (v.clone(), extension_marker())),
            );
            let mut sigma_b: Vec<Atom> = sigma_new.clone();
            let mut gamma_b: Vec<Atom> = gamma_new.clone();
            for a in &ants {
                let ba = sub.apply_atom(a);
                if ba.args.iter().any(is_marker) {
                    gamma_b.push(ba);
                } else {
                    sigma_b.push(ba);
                }
            }
            let shape = match &refined {
                None => AlphaShape::Opaque,
                Some((f, fa)) => AlphaShape::App(f.clone(), fa.clone()),
            };
            let schema = canonicalize(sigma_b, gamma_b, phi_new.clone(), shape);
            debug_assert!(is_well_formed(&schema));
            out.insert(schema);
        }
    }
    out
}

/// One level of the backchaining operator: the input plus every one-step
/// backchain result over every schema and every gamma position.
pub fn b_step(t: &BTreeSet<TemplateSchema>, rules: &RuleSet) -> BTreeSet<TemplateSchema> {
    let work: Vec<(&TemplateSchema, usize)> = t
        .iter()
        .flat_map(|s| (0..s.gamma.len()).map(move |i| (s, i)))
        .collect();
    let batches = par::map_collect(&work, 8, |(s, i)| {
        backchain(s, *i, rules).into_iter().collect::<Vec<_>>()
    });
    let mut out = t.clone();
    for batch in batches {
        out.extend(batch);
    }
    out
}

// ---------------------------------------------------------------------------
// Freezing and feedback events
// ---------------------------------------------------------------------------

/// A ground witness extracted from a schema: its atoms over fresh
/// constants.
#[derive(Clone, Debug)]
pub struct Frozen {
    /// All sigma and gamma atoms, with the extension instantiated.
    pub facts: FactBase,
    /// The frozen conclusion.
    pub phi: Atom,
    /// The least bounding set: the subterm closure of every frozen
    /// extension-free term.
    pub y_min: BoundingSet,
    /// The frozen extension, a one-step extension of `y_min`.
    pub alpha: Term,
}

/// Replaces each schema variable by a fresh constant and the extension by a
/// concrete term.
///
/// The constants embed a non-lexable character, so they cannot collide with
/// any symbol of a parsed rule set; an opaque extension freezes to the
/// marker constant itself. Schemas in canonical form freeze
/// deterministically.
pub fn freeze(s: &TemplateSchema) -> Frozen {
    freeze_parts(s).0
}

fn freeze_parts(s: &TemplateSchema) -> (Frozen, Substitution) {
    let mut order = Substitution::new();
    let mut next = 0usize;
    for a in s.sigma.iter().chain(s.gamma.iter()).chain([&s.phi]) {
        for t in &a.args {
            assign_vars_preorder(t, &mut order, &mut next);
        }
    }
    if let AlphaShape::App(_, args) = &s.alpha {
        for t in args {
            assign_vars_preorder(t, &mut order, &mut next);
        }
    }
    // reuse the preorder walk, then swap each placeholder for a constant
    let sub = Substitution::from_pairs(order.iter().map(|(v, t)| {
        let idx = t
            .var_name()
            .and_then(|n| n.strip_prefix('V'))
            .expect("placeholder variable");
        (v.clone(), Term::app(format!("c\u{b7}{idx}"), Vec::new()))
    }));
    let alpha = match &s.alpha {
        AlphaShape::Opaque => extension_marker(),
        AlphaShape::App(f, args) => {
            Term::app(f.clone(), args.iter().map(|t| sub.apply_term(t)).collect())
        }
    };
    let mut y_terms: Vec<Term> = Vec::new();
    for a in s.sigma.iter().chain([&s.phi]) {
        for t in &a.args {
            y_terms.push(sub.apply_term(t));
        }
    }
    for a in &s.gamma {
        for t in &a.args {
            if !is_marker(t) {
                y_terms.push(sub.apply_term(t));
            }
        }
    }
    if let AlphaShape::App(_, args) = &s.alpha {
        for t in args {
            y_terms.push(sub.apply_term(t));
        }
    }
    let y_min = subterm_closure(y_terms.iter()).expect("frozen terms are ground");
    debug_assert!(!y_min.contains(&alpha));
    let atoms: Vec<Atom> = s
        .sigma
        .iter()
        .chain(s.gamma.iter())
        .map(|a| {
            Atom::new(
                a.pred.clone(),
                a.args
                    .iter()
                    .map(|t| if is_marker(t) { alpha.clone() } else { sub.apply_term(t) })
                    .collect(),
            )
        })
        .collect();
    let facts = FactBase::new(atoms).expect("frozen atoms are ground");
    let phi = sub.apply_atom(&s.phi);
    (Frozen { facts, phi, y_min, alpha }, sub)
}

/// Tests whether a critical schema freezes into a real feedback event.
///
/// Both defining conditions are established by the evaluation engine before
/// anything is returned: the frozen facts must fail to derive the frozen
/// conclusion under the least bounding set, and succeed once the set is
/// extended by the frozen extension. Schemas with gamma atoms left are
/// never events.
pub fn is_feedback_event(s: &TemplateSchema, rules: &RuleSet) -> Option<FeedbackEvent> {
    if !s.is_critical() {
        return None;
    }
    let fr = freeze(s);
    let (without, _) = saturate_bounded(rules, &fr.facts, &fr.y_min);
    if without.contains(&fr.phi) {
        return None;
    }
    let extended = fr.y_min.inserted(&fr.alpha).expect("extension is ground");
    let (with, _) = saturate_bounded(rules, &fr.facts, &extended);
    if !with.contains(&fr.phi) {
        return None;
    }
    Some(FeedbackEvent {
        sigma: fr.facts.sorted_atoms().into_iter().collect(),
        phi: fr.phi,
        y: fr.y_min,
        alpha: fr.alpha,
    })
}

// ---------------------------------------------------------------------------
// Justification
// ---------------------------------------------------------------------------

/// One-way match of a pattern term against a rigid target. Pattern
/// variables bind subject to `legal`; target variables are inert symbols.
fn match_term(
    pat: &Term,
    tgt: &Term,
    bind: &mut BTreeMap<String, Term>,
    legal: &dyn Fn(&Term) -> bool,
) -> bool {
    if let Some(v) = pat.var_name() {
        if let Some(prev) = bind.get(v) {
            return prev == tgt;
        }
        if !legal(tgt) {
            return false;
        }
        bind.insert(v.to_string(), tgt.clone());
        return true;
    }
    match (pat.app_parts(), tgt.app_parts()) {
        (Some((f, pa)), Some((g, ta))) if f == g && pa.len() == ta.len() => {
            pa.iter().zip(ta).all(|(p, t)| match_term(p, t, bind, legal))
        }
        _ => false,
    }
}

fn match_atom(
    pat: &Atom,
    tgt: &Atom,
    bind: &mut BTreeMap<String, Term>,
    legal: &dyn Fn(&Term) -> bool,
) -> bool {
    pat.pred == tgt.pred
        && pat.args.len() == tgt.args.len()
        && pat.args.iter().zip(&tgt.args).all(|(p, t)| match_term(p, t, bind, legal))
}

/// Collects every conclusion obtainable by matching schema `ti` into `sp`:
/// gamma atoms onto distinct gamma positions, sigma atoms onto any sigma
/// atoms, the extension onto the extension. Variables never bind to terms
/// carrying the marker, since schema variables stand for bounded terms.
fn matched_conclusions(
    ti: &TemplateSchema,
    sp: &TemplateSchema,
    budget: &mut u64,
) -> Result<Vec<Atom>, Exhausted> {
    let mut out: BTreeSet<Atom> = BTreeSet::new();
    if ti.gamma.len() > sp.gamma.len() {
        return Ok(Vec::new());
    }
    // the conclusion must be fully determined by the matched atoms
    let mut determined = BTreeSet::new();
    for a in ti.sigma.iter().chain(ti.gamma.iter()) {
        a.collect_vars(&mut determined);
    }
    if let AlphaShape::App(_, args) = &ti.alpha {
        for t in args {
            t.collect_vars(&mut determined);
        }
    }
    let mut phi_vars = BTreeSet::new();
    ti.phi.collect_vars(&mut phi_vars);
    if !phi_vars.is_subset(&determined) {
        return Ok(Vec::new());
    }
    let legal = |t: &Term| !t.contains_term(&extension_marker());
    let mut seed = BTreeMap::new();
    match (&ti.alpha, &sp.alpha) {
        (AlphaShape::Opaque, _) => {}
        (AlphaShape::App(f, pa), AlphaShape::App(g, ta)) => {
            if f != g || pa.len() != ta.len() {
                return Ok(Vec::new());
            }
            for (p, t) in pa.iter().zip(ta) {
                if !match_term(p, t, &mut seed, &legal) {
                    return Ok(Vec::new());
                }
            }
        }
        (AlphaShape::App(..), AlphaShape::Opaque) => return Ok(Vec::new()),
    }
    let sigma_pats: Vec<&Atom> = ti.sigma.iter().collect();
    let sigma_tgts: Vec<&Atom> = sp.sigma.iter().collect();

    #[allow(clippy::too_many_arguments)]
    fn rec_sigma(
        i: usize,
        pats: &[&Atom],
        tgts: &[&Atom],
        bind: &BTreeMap<String, Term>,
        phi: &Atom,
        legal: &dyn Fn(&Term) -> bool,
        out: &mut BTreeSet<Atom>,
        budget: &mut u64,
    ) -> Result<(), Exhausted> {
        if i == pats.len() {
            let sub = Substitution::from_pairs(bind.clone());
            out.insert(sub.apply_atom(phi));
            return Ok(());
        }
        for tgt in tgts {
            *budget = budget.checked_sub(1).ok_or(Exhausted)?;
            let mut b = bind.clone();
            if match_atom(pats[i], tgt, &mut b, legal) {
                rec_sigma(i + 1, pats, tgts, &b, phi, legal, out, budget)?;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn rec_gamma(
        i: usize,
        used: &mut Vec<bool>,
        ti: &TemplateSchema,
        sp: &TemplateSchema,
        sigma_pats: &[&Atom],
        sigma_tgts: &[&Atom],
        bind: &BTreeMap<String, Term>,
        legal: &dyn Fn(&Term) -> bool,
        out: &mut BTreeSet<Atom>,
        budget: &mut u64,
    ) -> Result<(), Exhausted> {
        if i == ti.gamma.len() {
            return rec_sigma(0, sigma_pats, sigma_tgts, bind, &ti.phi, legal, out, budget);
        }
        for j in 0..sp.gamma.len() {
            if used[j] {
                continue;
            }
            *budget = budget.checked_sub(1).ok_or(Exhausted)?;
            let mut b = bind.clone();
            if match_atom(&ti.gamma[i], &sp.gamma[j], &mut b, legal) {
                used[j] = true;
                rec_gamma(i + 1, used, ti, sp, sigma_pats, sigma_tgts, &b, legal, out, budget)?;
                used[j] = false;
            }
        }
        Ok(())
    }

    let mut used = vec![false; sp.gamma.len()];
    rec_gamma(
        0, &mut used, ti, sp, &sigma_pats, &sigma_tgts, &seed, &legal, &mut out, budget,
    )?;
    Ok(out.into_iter().collect())
}

/// Entailment of one backchain result by a schema set: the frozen sigma
/// facts plus every matched conclusion must derive the frozen phi under the
/// least bounding set, without the extension.
fn entailed(
    t: &BTreeSet<TemplateSchema>,
    sp: &TemplateSchema,
    rules: &RuleSet,
    budget: &mut u64,
) -> Result<bool, Exhausted> {
    let (fr, fsub) = freeze_parts(sp);
    let mut seed: BTreeSet<Atom> = sp.sigma.iter().map(|a| fsub.apply_atom(a)).collect();
    for ti in t {
        for psi in matched_conclusions(ti, sp, budget)? {
            let ground = fsub.apply_atom(&psi);
            debug_assert!(ground.is_ground());
            seed.insert(ground);
        }
    }
    let base = FactBase::new(seed).expect("frozen atoms are ground");
    let (db, _) = saturate_bounded(rules, &base, &fr.y_min);
    Ok(db.contains(&fr.phi))
}

fn try_justifies(
    t: &BTreeSet<TemplateSchema>,
    s: &TemplateSchema,
    rules: &RuleSet,
    budget: &mut u64,
) -> Result<bool, Exhausted> {
    'targets: for target in 0..s.gamma.len() {
        for sp in &backchain(s, target, rules) {
            if !entailed(t, sp, rules, budget)? {
                continue 'targets;
            }
        }
        return Ok(true);
    }
    Ok(false)
}

/// True when some gamma position of `s` has every one-step backchain result
/// entailed by the schemas of `t`. Runs under [`DEFAULT_BUDGET`]; overruns
/// count as not justified.
pub fn justifies(t: &BTreeSet<TemplateSchema>, s: &TemplateSchema, rules: &RuleSet) -> bool {
    let mut budget = DEFAULT_BUDGET;
    try_justifies(t, s, rules, &mut budget).unwrap_or(false)
}

fn try_self_justifying(
    t: &BTreeSet<TemplateSchema>,
    rules: &RuleSet,
    budget: &mut u64,
) -> Result<bool, Exhausted> {
    if t.iter().any(|s| is_feedback_event(s, rules).is_some()) {
        return Ok(false);
    }
    for s in t {
        if !s.is_critical() && !try_justifies(t, s, rules, budget)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True when `t` contains no feedback events and every schema is critical
/// or justified by `t`. The empty set is vacuously self-justifying.
pub fn self_justifying(t: &BTreeSet<TemplateSchema>, rules: &RuleSet) -> bool {
    let mut budget = DEFAULT_BUDGET;
    try_self_justifying(t, rules, &mut budget).unwrap_or(false)
}

// ---------------------------------------------------------------------------
// The checker
// ---------------------------------------------------------------------------

/// Runs the locality check with [`DEFAULT_BUDGET`].
pub fn check_locality(rules: &RuleSet, max_depth: usize) -> Verdict {
    check_locality_with_budget(rules, max_depth, DEFAULT_BUDGET).verdict
}

/// Level-by-level locality check.
///
/// Each level is scanned for feedback events first (any one refutes
/// locality immediately), then tested for self-justification (which
/// certifies it). A backchaining fixed point that is not self-justifying,
/// exhaustion of `max_depth` levels, or an exhausted match-search budget
/// ends the run inconclusively.
pub fn check_locality_with_budget(rules: &RuleSet, max_depth: usize, budget: u64) -> CheckOutcome {
    let mut remaining = budget;
    let mut t = generate_initial(rules);
    let mut schemas_per_level = Vec::new();
    // criticals already cleared of events, and schemas already justified:
    // both facts stay true as the set grows
    let mut cleared: BTreeSet<TemplateSchema> = BTreeSet::new();
    let mut justified: BTreeSet<TemplateSchema> = BTreeSet::new();
    for depth in 0..=max_depth {
        schemas_per_level.push(t.len());
        for s in &t {
            if !s.is_critical() || cleared.contains(s) {
                continue;
            }
            if let Some(event) = is_feedback_event(s, rules) {
                return CheckOutcome {
                    verdict: Verdict::NotLocal(event),
                    schemas_per_level,
                };
            }
            cleared.insert(s.clone());
        }
        let mut all = true;
        for s in &t {
            if s.is_critical() || justified.contains(s) {
                continue;
            }
            match try_justifies(&t, s, rules, &mut remaining) {
                Err(Exhausted) => {
                    return CheckOutcome {
                        verdict: Verdict::Inconclusive(InconclusiveReason::DepthExhausted),
                        schemas_per_level,
                    }
                }
                Ok(true) => {
                    justified.insert(s.clone());
                }
                Ok(false) => {
                    all = false;
                }
            }
        }
        if all {
            return CheckOutcome {
                verdict: Verdict::InductivelyLocal(depth),
                schemas_per_level,
            };
        }
        if depth == max_depth {
            break;
        }
        let next = b_step(&t, rules);
        if next == t {
            return CheckOutcome {
                verdict: Verdict::Inconclusive(InconclusiveReason::FixpointWithoutJustification),
                schemas_per_level,
            };
        }
        t = next;
    }
    CheckOutcome {
        verdict: Verdict::Inconclusive(InconclusiveReason::DepthExhausted),
        schemas_per_level,
    }
}

// ---------------------------------------------------------------------------
// Ground oracle
// ---------------------------------------------------------------------------

/// A fully ground feedback template over an explicit bounding set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundTemplate {
    /// Extension-free ground facts over `y`.
    pub sigma: BTreeSet<Atom>,
    /// Extension-carrying ground facts; a multiset kept sorted.
    pub gamma: Vec<Atom>,
    /// The ground conclusion.
    pub phi: Atom,
    /// The bounding set.
    pub y: BoundingSet,
    /// The one-step extension.
    pub alpha: Term,
}

fn tuples<'a>(items: &[&'a Term], k: usize) -> Vec<Vec<&'a Term>> {
    let mut acc: Vec<Vec<&Term>> = vec![Vec::new()];
    for _ in 0..k {
        acc = acc
            .into_iter()
            .flat_map(|base| {
                items.iter().map(move |t| {
                    let mut v = base.clone();
                    v.push(*t);
                    v
                })
            })
            .collect();
    }
    acc
}

/// All assignments of the given variables to the given values.
fn assignments(vars: &[String], values: &[&Term]) -> Vec<Substitution> {
    let mut acc: Vec<Vec<Term>> = vec![Vec::new()];
    for _ in vars {
        acc = acc
            .into_iter()
            .flat_map(|base| {
                values.iter().map(move |t| {
                    let mut v = base.clone();
                    v.push((*t).clone());
                    v
                })
            })
            .collect();
    }
    acc.into_iter()
        .map(|choice| {
            Substitution::from_pairs(vars.iter().cloned().zip(choice))
        })
        .collect()
}

fn ground_initial(
    rules: &RuleSet,
    y: &BoundingSet,
    alpha: &Term,
    y_ext: &BoundingSet,
) -> BTreeSet<GroundTemplate> {
    let values: Vec<&Term> = y_ext.iter().collect();
    let mut out = BTreeSet::new();
    for clause in &rules.clauses {
        let mut vars = BTreeSet::new();
        clause.collect_vars(&mut vars);
        let vars: Vec<String> = vars.into_iter().collect();
        for sub in assignments(&vars, &values) {
            let ants: Vec<Atom> = clause.antecedents.iter().map(|a| sub.apply_atom(a)).collect();
            if !ants.iter().all(|a| a.args.iter().all(|t| y_ext.contains(t))) {
                continue;
            }
            let concl = sub.apply_atom(&clause.conclusion);
            if !concl.args.iter().all(|t| y.contains(t)) {
                continue;
            }
            if !ants.iter().any(|a| a.args.iter().any(|t| t == alpha)) {
                continue;
            }
            let (gamma, sigma): (Vec<Atom>, Vec<Atom>) = ants
                .into_iter()
                .partition(|a| a.args.iter().any(|t| t == alpha));
            let mut gamma = gamma;
            gamma.sort();
            out.insert(GroundTemplate {
                sigma: sigma.into_iter().collect(),
                gamma,
                phi: concl,
                y: y.clone(),
                alpha: alpha.clone(),
            });
        }
    }
    out
}

/// One ground backchaining step on the gamma atom at `target`: every clause
/// instance concluding that atom, with the target replaced by the
/// instance's antecedents.
pub fn ground_backchain(
    rules: &RuleSet,
    gt: &GroundTemplate,
    target: usize,
) -> BTreeSet<GroundTemplate> {
    assert!(target < gt.gamma.len(), "target must select a gamma atom");
    let y_ext = gt.y.inserted(&gt.alpha).expect("extension is ground");
    let values: Vec<&Term> = y_ext.iter().collect();
    let theta = &gt.gamma[target];
    let mut out = BTreeSet::new();
    for clause in &rules.clauses {
        let mut bind = BTreeMap::new();
        if !match_atom(&clause.conclusion, theta, &mut bind, &|_| true) {
            continue;
        }
        let mut vars = BTreeSet::new();
        clause.collect_vars(&mut vars);
        let free: Vec<String> = vars.into_iter().filter(|v| !bind.contains_key(v)).collect();
        for ext in assignments(&free, &values) {
            let mut sub = Substitution::from_pairs(bind.clone());
            for (v, t) in ext.iter() {
                sub.insert(v.clone(), t.clone());
            }
            let ants: Vec<Atom> = clause.antecedents.iter().map(|a| sub.apply_atom(a)).collect();
            if !ants.iter().all(|a| a.args.iter().all(|t| y_ext.contains(t))) {
                continue;
            }
            let (mut gamma_add, sigma_add): (Vec<Atom>, Vec<Atom>) = ants
                .into_iter()
                .partition(|a| a.args.contains(&gt.alpha));
            let mut sigma = gt.sigma.clone();
            sigma.extend(sigma_add);
            let mut gamma: Vec<Atom> = gt
                .gamma
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != target)
                .map(|(_, a)| a.clone())
                .collect();
            gamma.append(&mut gamma_add);
            gamma.sort();
            out.insert(GroundTemplate {
                sigma,
                gamma,
                phi: gt.phi.clone(),
                y: gt.y.clone(),
                alpha: gt.alpha.clone(),
            });
        }
    }
    out
}

fn ground_b_step(
    rules: &RuleSet,
    templates: &BTreeSet<GroundTemplate>,
) -> BTreeSet<GroundTemplate> {
    let mut out = templates.clone();
    for gt in templates {
        for pos in 0..gt.gamma.len() {
            out.extend(ground_backchain(rules, gt, pos));
        }
    }
    out
}

/// Exhaustive ground enumeration of feedback templates and events.
///
/// Runs the generation and backchaining procedures over every
/// subterm-closed subset of `universe` paired with every one-step extension
/// constructible from universe terms and signature symbols, with `depth`
/// rounds of backchaining. Critical templates are tested for both event
/// conditions through the engine. Refuses universes above 8 terms.
pub fn ground_templates(
    rules: &RuleSet,
    universe: &BoundingSet,
    depth: usize,
) -> Result<(BTreeSet<GroundTemplate>, Vec<FeedbackEvent>), LocalityError> {
    if universe.len() > MAX_ORACLE_UNIVERSE {
        return Err(LocalityError::UniverseTooLarge);
    }
    let all_terms: Vec<&Term> = universe.iter().collect();
    let mut symbols: BTreeSet<(String, usize)> = rules
        .signature
        .functions
        .iter()
        .map(|(f, a)| (f.clone(), *a))
        .collect();
    for t in &all_terms {
        t.for_each_subterm(&mut |s| {
            if let Some((f, args)) = s.app_parts() {
                symbols.insert((f.to_string(), args.len()));
            }
        });
    }
    let mut templates: BTreeSet<GroundTemplate> = BTreeSet::new();
    for mask in 0usize..(1 << all_terms.len()) {
        let chosen: BTreeSet<&Term> = all_terms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| *t)
            .collect();
        // only subterm-closed subsets; the rest duplicate a closed one
        let closed = chosen.iter().all(|t| match t.app_parts() {
            Some((_, args)) => args.iter().all(|a| chosen.contains(a)),
            None => true,
        });
        if !closed {
            continue;
        }
        let y = BoundingSet::from_terms(chosen.iter().copied()).expect("universe is ground");
        let chosen: Vec<&Term> = chosen.into_iter().collect();
        let mut alphas: BTreeSet<Term> = BTreeSet::new();
        for (f, k) in &symbols {
            for tuple in tuples(&chosen, *k) {
                let a = Term::app(f.clone(), tuple.into_iter().cloned().collect());
                if !y.contains(&a) {
                    alphas.insert(a);
                }
            }
        }
        for alpha in alphas {
            let y_ext = y.inserted(&alpha).expect("extension is ground");
            let mut level = ground_initial(rules, &y, &alpha, &y_ext);
            for _ in 0..depth {
                level = ground_b_step(rules, &level);
            }
            templates.extend(level);
        }
    }
    let mut events: BTreeSet<FeedbackEvent> = BTreeSet::new();
    for gt in &templates {
        if !gt.gamma.is_empty() {
            continue;
        }
        let base = FactBase::new(gt.sigma.iter().cloned()).expect("templates are ground");
        let (without, _) = saturate_bounded(rules, &base, &gt.y);
        if without.contains(&gt.phi) {
            continue;
        }
        let extended = gt.y.inserted(&gt.alpha).expect("extension is ground");
        let (with, _) = saturate_bounded(rules, &base, &extended);
        if with.contains(&gt.phi) {
            events.insert(FeedbackEvent {
                sigma: gt.sigma.clone(),
                phi: gt.phi.clone(),
                y: gt.y.clone(),
                alpha: gt.alpha.clone(),
            });
        }
    }
    Ok((templates, events.into_iter().collect()))
}

/// Whether the ground template is an instance of the schema: some
/// assignment of schema variables to bounded terms maps sigma onto sigma,
/// gamma onto gamma (respecting multiplicity), phi onto phi, and the
/// extension onto the extension.
pub fn ground_instance_of(s: &TemplateSchema, gt: &GroundTemplate) -> bool {
    if s.gamma.len() != gt.gamma.len() {
        return false;
    }
    // the marker denotes the concrete extension during matching
    let concretize = |a: &Atom| {
        Atom::new(
            a.pred.clone(),
            a.args
                .iter()
                .map(|t| if is_marker(t) { gt.alpha.clone() } else { t.clone() })
                .collect(),
        )
    };
    let legal = |t: &Term| gt.y.contains(t);
    let mut bind = BTreeMap::new();
    match &s.alpha {
        AlphaShape::Opaque => {}
        AlphaShape::App(f, args) => {
            let pattern = Term::app(f.clone(), args.clone());
            if !match_term(&pattern, &gt.alpha, &mut bind, &legal) {
                return false;
            }
        }
    }
    if !match_atom(&s.phi, &gt.phi, &mut bind, &legal) {
        return false;
    }
    let gamma_pats: Vec<Atom> = s.gamma.iter().map(concretize).collect();
    let sigma_pats: Vec<&Atom> = s.sigma.iter().collect();
    let sigma_tgts: Vec<&Atom> = gt.sigma.iter().collect();

    fn rec_sigma(
        i: usize,
        pats: &[&Atom],
        tgts: &[&Atom],
        bind: &BTreeMap<String, Term>,
        covered: &BTreeSet<usize>,
        legal: &dyn Fn(&Term) -> bool,
    ) -> bool {
        if i == pats.len() {
            // the image must be exactly the ground sigma
            return covered.len() == tgts.len();
        }
        for (j, tgt) in tgts.iter().enumerate() {
            let mut b = bind.clone();
            if match_atom(pats[i], tgt, &mut b, legal) {
                let mut c = covered.clone();
                c.insert(j);
                if rec_sigma(i + 1, pats, tgts, &b, &c, legal) {
                    return true;
                }
            }
        }
        false
    }

    #[allow(clippy::too_many_arguments)]
    fn rec_gamma(
        i: usize,
        used: &mut Vec<bool>,
        gamma_pats: &[Atom],
        gamma_tgts: &[Atom],
        sigma_pats: &[&Atom],
        sigma_tgts: &[&Atom],
        bind: &BTreeMap<String, Term>,
        legal: &dyn Fn(&Term) -> bool,
    ) -> bool {
        if i == gamma_pats.len() {
            return rec_sigma(0, sigma_pats, sigma_tgts, bind, &BTreeSet::new(), legal);
        }
        for j in 0..gamma_tgts.len() {
            if used[j] {
                continue;
            }
            let mut b = bind.clone();
            if match_atom(&gamma_pats[i], &gamma_tgts[j], &mut b, legal) {
                used[j] = true;
                if rec_gamma(i + 1, used, gamma_pats, gamma_tgts, sigma_pats, sigma_tgts, &b, legal)
                {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }

    let mut used = vec![false; gt.gamma.len()];
    rec_gamma(
        0, &mut used, &gamma_pats, &gt.gamma, &sigma_pats, &sigma_tgts, &bind, &legal,
    )
}

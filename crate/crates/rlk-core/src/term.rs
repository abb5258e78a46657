//! First-order terms, atoms, Horn clauses, substitutions, and bounding sets.
//!
//! Terms are immutable handles over shared nodes with cached hashes, so sets
//! of deeply shared terms (DAG-shaped inputs) hash and compare in time
//! proportional to the DAG, not the unfolded tree. All operations here are
//! pure; values are safe to share across threads.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

/// Errors raised by term-level operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("non-ground term: {0}")]
    NonGroundTerm(String),
    #[error("non-ground atom: {0}")]
    NonGroundAtom(String),
}

#[derive(Debug)]
enum Kind {
    Var(Box<str>),
    App(Box<str>, Vec<Term>),
}

#[derive(Debug)]
struct Node {
    hash: u64,
    ground: bool,
    kind: Kind,
}

/// A first-order term: a variable or an application of a function symbol to
/// argument terms. Constants are 0-ary applications.
#[derive(Clone)]
pub struct Term(Arc<Node>);

fn mix(parts: &[u64]) -> u64 {
    // FNV-1a over the component hashes; stable across runs.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    }
    h
}

fn str_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

impl Term {
    /// A variable term.
    pub fn var(name: impl Into<String>) -> Term {
        let name: Box<str> = name.into().into_boxed_str();
        let hash = mix(&[1, str_hash(&name)]);
        Term(Arc::new(Node {
            hash,
            ground: false,
            kind: Kind::Var(name),
        }))
    }

    /// An application of `sym` to `args`.
    pub fn app(sym: impl Into<String>, args: Vec<Term>) -> Term {
        let sym: Box<str> = sym.into().into_boxed_str();
        let mut parts = Vec::with_capacity(args.len() + 2);
        parts.push(2);
        parts.push(str_hash(&sym));
        let mut ground = true;
        for a in &args {
            parts.push(a.0.hash);
            ground &= a.0.ground;
        }
        Term(Arc::new(Node {
            hash: mix(&parts),
            ground,
            kind: Kind::App(sym, args),
        }))
    }

    /// A constant (0-ary application).
    pub fn constant(sym: impl Into<String>) -> Term {
        Term::app(sym, Vec::new())
    }

    /// True for variables.
    pub fn is_var(&self) -> bool {
        matches!(self.0.kind, Kind::Var(_))
    }

    /// The variable name, if this is a variable.
    pub fn var_name(&self) -> Option<&str> {
        match &self.0.kind {
            Kind::Var(n) => Some(n),
            Kind::App(..) => None,
        }
    }

    /// Function symbol and arguments, if this is an application.
    pub fn app_parts(&self) -> Option<(&str, &[Term])> {
        match &self.0.kind {
            Kind::Var(_) => None,
            Kind::App(s, a) => Some((s, a)),
        }
    }

    /// True when the term contains no variables.
    pub fn is_ground(&self) -> bool {
        self.0.ground
    }

    /// Structural identity shortcut: pointer equality implies equality.
    fn same_node(&self, other: &Term) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Collects the names of variables occurring in the term.
    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match &self.0.kind {
            Kind::Var(n) => {
                out.insert(n.to_string());
            }
            Kind::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    /// True when `needle` occurs in `self` (as the whole term or any subterm).
    pub fn contains_term(&self, needle: &Term) -> bool {
        if self == needle {
            return true;
        }
        match &self.0.kind {
            Kind::Var(_) => false,
            Kind::App(_, args) => args.iter().any(|a| a.contains_term(needle)),
        }
    }

    /// True when `needle` occurs strictly below the root of `self`.
    pub fn properly_contains(&self, needle: &Term) -> bool {
        match &self.0.kind {
            Kind::Var(_) => false,
            Kind::App(_, args) => args.iter().any(|a| a.contains_term(needle)),
        }
    }

    /// Visits every distinct subterm once, in leftmost-outermost first-visit
    /// order. Shared subtrees are visited at their first occurrence only.
    pub fn for_each_subterm(&self, f: &mut impl FnMut(&Term)) {
        let mut seen: std::collections::HashSet<Term> = std::collections::HashSet::new();
        fn walk(
            t: &Term,
            seen: &mut std::collections::HashSet<Term>,
            f: &mut impl FnMut(&Term),
        ) {
            if !seen.insert(t.clone()) {
                return;
            }
            f(t);
            if let Kind::App(_, args) = &t.0.kind {
                for a in args {
                    walk(a, seen, f);
                }
            }
        }
        walk(self, &mut seen, f);
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        if self.same_node(other) {
            return true;
        }
        if self.0.hash != other.0.hash {
            return false;
        }
        match (&self.0.kind, &other.0.kind) {
            (Kind::Var(a), Kind::Var(b)) => a == b,
            (Kind::App(s, xs), Kind::App(t, ys)) => {
                s == t && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| x == y)
            }
            _ => false,
        }
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    /// Variables order before applications; applications compare by symbol,
    /// then arity, then arguments lexicographically.
    fn cmp(&self, other: &Self) -> Ordering {
        if self.same_node(other) {
            return Ordering::Equal;
        }
        match (&self.0.kind, &other.0.kind) {
            (Kind::Var(a), Kind::Var(b)) => a.cmp(b),
            (Kind::Var(_), Kind::App(..)) => Ordering::Less,
            (Kind::App(..), Kind::Var(_)) => Ordering::Greater,
            (Kind::App(s, xs), Kind::App(t, ys)) => s
                .cmp(t)
                .then_with(|| xs.len().cmp(&ys.len()))
                .then_with(|| xs.cmp(ys)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            Kind::Var(n) => write!(f, "{n}"),
            Kind::App(s, args) => {
                write!(f, "{s}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// An atomic formula: a predicate applied to terms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    /// True when every argument is ground.
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        for a in &self.args {
            a.collect_vars(out);
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A Horn clause: zero or more antecedent atoms and one conclusion atom.
/// A clause with no antecedents is a fact clause.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    pub antecedents: Vec<Atom>,
    pub conclusion: Atom,
}

impl Clause {
    pub fn new(antecedents: Vec<Atom>, conclusion: Atom) -> Clause {
        Clause {
            antecedents,
            conclusion,
        }
    }

    pub fn fact(conclusion: Atom) -> Clause {
        Clause::new(Vec::new(), conclusion)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        for a in &self.antecedents {
            a.collect_vars(out);
        }
        self.conclusion.collect_vars(out);
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.antecedents.is_empty() {
            return write!(f, "{}.", self.conclusion);
        }
        for (i, a) in self.antecedents.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, " -> {}.", self.conclusion)
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Declared function and predicate symbols with their arities.
///
/// Declarations are usually inferred from clause text and then frozen; the
/// two namespaces are independent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub functions: BTreeMap<String, usize>,
    pub predicates: BTreeMap<String, usize>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    /// Declares a function symbol, rejecting conflicting arities.
    pub fn declare_function(&mut self, name: &str, arity: usize) -> Result<(), String> {
        match self.functions.get(name) {
            Some(&a) if a != arity => Err(format!(
                "function symbol {name} used with arities {a} and {arity}"
            )),
            _ => {
                self.functions.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    /// Declares a predicate symbol, rejecting conflicting arities.
    pub fn declare_predicate(&mut self, name: &str, arity: usize) -> Result<(), String> {
        match self.predicates.get(name) {
            Some(&a) if a != arity => Err(format!(
                "predicate symbol {name} used with arities {a} and {arity}"
            )),
            _ => {
                self.predicates.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    fn absorb_term(&mut self, t: &Term) -> Result<(), String> {
        if let Some((sym, args)) = t.app_parts() {
            self.declare_function(sym, args.len())?;
            for a in args {
                self.absorb_term(a)?;
            }
        }
        Ok(())
    }

    /// Records every symbol occurring in the atom.
    pub fn absorb_atom(&mut self, a: &Atom) -> Result<(), String> {
        self.declare_predicate(&a.pred, a.args.len())?;
        for t in &a.args {
            self.absorb_term(t)?;
        }
        Ok(())
    }

    /// Records every symbol occurring in the clause.
    pub fn absorb_clause(&mut self, c: &Clause) -> Result<(), String> {
        for a in &c.antecedents {
            self.absorb_atom(a)?;
        }
        self.absorb_atom(&c.conclusion)
    }

    /// The constants (0-ary functions), in name order.
    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.functions
            .iter()
            .filter(|(_, &n)| n == 0)
            .map(|(s, _)| s.as_str())
    }
}

/// A named finite collection of Horn clauses over a declared signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    pub name: String,
    pub signature: Signature,
    pub clauses: Vec<Clause>,
}

impl RuleSet {
    /// Builds a rule set, inferring the signature from the clauses.
    pub fn new(name: impl Into<String>, clauses: Vec<Clause>) -> Result<RuleSet, String> {
        let mut signature = Signature::new();
        for c in &clauses {
            signature.absorb_clause(c)?;
        }
        Ok(RuleSet {
            name: name.into(),
            signature,
            clauses,
        })
    }

    /// Clause-set equality up to variable renaming and clause order.
    pub fn canonically_equal(&self, other: &RuleSet) -> bool {
        let a: BTreeSet<Clause> = self.clauses.iter().map(canonical_rename).collect();
        let b: BTreeSet<Clause> = other.clauses.iter().map(canonical_rename).collect();
        a == b
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A finite mapping from variable names to terms; idempotent once resolved.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Term)>) -> Substitution {
        Substitution {
            map: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.map.get(var)
    }

    pub fn insert(&mut self, var: impl Into<String>, t: Term) {
        self.map.insert(var.into(), t);
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.map.iter()
    }

    /// Applies the substitution to a term.
    pub fn apply_term(&self, t: &Term) -> Term {
        if t.is_ground() || self.map.is_empty() {
            return t.clone();
        }
        match (t.var_name(), t.app_parts()) {
            (Some(v), _) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            (_, Some((sym, args))) => Term::app(
                sym.to_string(),
                args.iter().map(|a| self.apply_term(a)).collect(),
            ),
            _ => unreachable!(),
        }
    }

    /// Applies the substitution to an atom.
    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom::new(
            a.pred.clone(),
            a.args.iter().map(|t| self.apply_term(t)).collect(),
        )
    }

    /// Applies the substitution to a clause.
    pub fn apply_clause(&self, c: &Clause) -> Clause {
        Clause::new(
            c.antecedents.iter().map(|a| self.apply_atom(a)).collect(),
            self.apply_atom(&c.conclusion),
        )
    }

    /// Sequential composition: applying the result equals applying `self`
    /// first and then `after`.
    pub fn compose(&self, after: &Substitution) -> Substitution {
        let mut map: BTreeMap<String, Term> = self
            .map
            .iter()
            .map(|(v, t)| (v.clone(), after.apply_term(t)))
            .collect();
        for (v, t) in &after.map {
            map.entry(v.clone()).or_insert_with(|| t.clone());
        }
        Substitution { map }
    }
}

/// A subterm-closed finite set of ground terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct BoundingSet {
    terms: BTreeSet<Term>,
}

impl BoundingSet {
    /// The subterm closure of the given ground terms.
    pub fn from_terms<'a>(
        terms: impl IntoIterator<Item = &'a Term>,
    ) -> Result<BoundingSet, TermError> {
        let mut set = BTreeSet::new();
        for t in terms {
            if !t.is_ground() {
                return Err(TermError::NonGroundTerm(t.to_string()));
            }
            t.for_each_subterm(&mut |s| {
                set.insert(s.clone());
            });
        }
        Ok(BoundingSet { terms: set })
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.terms.contains(t)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter()
    }

    /// The union of two bounding sets (still subterm-closed).
    pub fn union(&self, other: &BoundingSet) -> BoundingSet {
        BoundingSet {
            terms: self.terms.union(&other.terms).cloned().collect(),
        }
    }

    /// Extends the set with the subterm closure of one more ground term.
    pub fn inserted(&self, t: &Term) -> Result<BoundingSet, TermError> {
        if !t.is_ground() {
            return Err(TermError::NonGroundTerm(t.to_string()));
        }
        let mut terms = self.terms.clone();
        t.for_each_subterm(&mut |s| {
            terms.insert(s.clone());
        });
        Ok(BoundingSet { terms })
    }
}

/// The least subterm-closed superset of the given ground terms.
pub fn subterm_closure<'a>(
    terms: impl IntoIterator<Item = &'a Term>,
) -> Result<BoundingSet, TermError> {
    BoundingSet::from_terms(terms)
}

/// The number of distinct subterms of a ground term.
pub fn dag_size(t: &Term) -> Result<usize, TermError> {
    Ok(subterm_closure([t])?.len())
}

/// True iff every argument of the ground atom is a member of `y`.
///
/// Because bounding sets are subterm-closed, membership of the arguments
/// makes membership of deeper subterms automatic.
pub fn is_label_formula(a: &Atom, y: &BoundingSet) -> Result<bool, TermError> {
    if !a.is_ground() {
        return Err(TermError::NonGroundAtom(a.to_string()));
    }
    Ok(a.args.iter().all(|t| y.contains(t)))
}

/// Robinson unification of two atoms with occurs check. Returns the most
/// general unifier, fully resolved (idempotent), or `None` on clash.
pub fn unify(a: &Atom, b: &Atom) -> Option<Substitution> {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return None;
    }
    let mut bind: BTreeMap<String, Term> = BTreeMap::new();
    for (x, y) in a.args.iter().zip(&b.args) {
        if !unify_terms(x, y, &mut bind) {
            return None;
        }
    }
    // Resolve bindings to an idempotent substitution.
    let keys: Vec<String> = bind.keys().cloned().collect();
    let mut resolved = Substitution::new();
    for k in keys {
        let t = resolve_deep(bind.get(&k).expect("bound").clone(), &bind);
        resolved.insert(k, t);
    }
    Some(resolved)
}

fn walk(t: &Term, bind: &BTreeMap<String, Term>) -> Term {
    let mut cur = t.clone();
    while let Some(v) = cur.var_name() {
        match bind.get(v) {
            Some(next) => cur = next.clone(),
            None => break,
        }
    }
    cur
}

fn occurs(v: &str, t: &Term, bind: &BTreeMap<String, Term>) -> bool {
    let t = walk(t, bind);
    match (t.var_name(), t.app_parts()) {
        (Some(n), _) => n == v,
        (_, Some((_, args))) => args.iter().any(|a| occurs(v, a, bind)),
        _ => unreachable!(),
    }
}

fn unify_terms(a: &Term, b: &Term, bind: &mut BTreeMap<String, Term>) -> bool {
    let a = walk(a, bind);
    let b = walk(b, bind);
    if a == b {
        return true;
    }
    if let Some(v) = a.var_name() {
        if occurs(v, &b, bind) {
            return false;
        }
        bind.insert(v.to_string(), b);
        return true;
    }
    if let Some(v) = b.var_name() {
        if occurs(v, &a, bind) {
            return false;
        }
        bind.insert(v.to_string(), a);
        return true;
    }
    let (sa, xs) = a.app_parts().expect("application");
    let (sb, ys) = b.app_parts().expect("application");
    if sa != sb || xs.len() != ys.len() {
        return false;
    }
    xs.iter().zip(ys).all(|(x, y)| unify_terms(x, y, bind))
}

fn resolve_deep(t: Term, bind: &BTreeMap<String, Term>) -> Term {
    let t = walk(&t, bind);
    match t.app_parts() {
        Some((sym, args)) => Term::app(
            sym.to_string(),
            args.iter().map(|a| resolve_deep(a.clone(), bind)).collect(),
        ),
        None => t,
    }
}

/// Renames the variables of a clause to `V0, V1, ...` in first-occurrence
/// order over antecedents, then conclusion, arguments left to right, preorder
/// within each term. Clauses equal up to renaming get identical results.
pub fn canonical_rename(c: &Clause) -> Clause {
    let mut order: Vec<String> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let scan_term = |t: &Term, order: &mut Vec<String>, seen: &mut BTreeSet<String>| {
        fn walk(t: &Term, order: &mut Vec<String>, seen: &mut BTreeSet<String>) {
            match (t.var_name(), t.app_parts()) {
                (Some(v), _) => {
                    if seen.insert(v.to_string()) {
                        order.push(v.to_string());
                    }
                }
                (_, Some((_, args))) => {
                    for a in args {
                        walk(a, order, seen);
                    }
                }
                _ => unreachable!(),
            }
        }
        walk(t, order, seen);
    };
    for a in &c.antecedents {
        for t in &a.args {
            scan_term(t, &mut order, &mut seen);
        }
    }
    for t in &c.conclusion.args {
        scan_term(t, &mut order, &mut seen);
    }
    let sub = Substitution::from_pairs(
        order
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, Term::var(format!("V{i}")))),
    );
    sub.apply_clause(c)
}

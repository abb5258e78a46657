//! Bottom-up evaluation of Horn-clause rule sets.
//!
//! Two inference modes share one semi-naive core. Bounded evaluation
//! ([`saturate_bounded`]) admits only derivation steps whose every formula is
//! a label formula of a finite bounding set, so it always terminates. Free
//! evaluation ([`saturate_free`]) applies clause instances without
//! restriction, in breadth-first rounds up to a round limit, and reports
//! whether a fixed point was reached.
//!
//! Every derived fact records which clause instance produced it, so any atom
//! in a result can be expanded into a [`Derivation`] and replayed through
//! [`validate_derivation`].
//!
//! Evaluation is deterministic: clauses fire in clause order, facts are
//! visited in canonical term order within each round, and a fact's recorded
//! provenance is the first instance that produced it. The per-round match
//! phase is read-only and runs on the rayon pool when the `parallel` feature
//! is enabled; results merge in a fixed order, so statistics and provenance
//! are identical across thread schedules and across the sequential build.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use indexmap::IndexSet;
use smallvec::{smallvec, SmallVec};
use thiserror::Error;

use crate::par;
use crate::term::{
    is_label_formula, subterm_closure, Atom, BoundingSet, Clause, RuleSet, Signature,
    Substitution, Term,
};

const UNBOUND: u32 = u32::MAX;
const NO_PIVOT: u32 = u32::MAX;
/// Below this many work items a round is matched sequentially even in the
/// parallel build; tiny rounds are cheaper than fork-join overhead.
const MIN_PARALLEL_ITEMS: usize = 64;

/// Failure modes of evaluation setup. Evaluation itself never fails.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    /// A fact contained a variable.
    #[error("fact {0} is not ground")]
    NonGroundFact(String),
    /// Free-mode evaluation cannot instantiate a variable that occurs only
    /// in a clause conclusion; bounded evaluation enumerates the universe
    /// instead, and [`saturate_free_with_universe`] does the same.
    #[error("clause {clause} binds {var} only in its conclusion; supply a universe to enumerate it")]
    UnboundConclusionVar { clause: usize, var: String },
}

/// Counters from one saturation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalStats {
    /// Rounds executed, including the final round that found nothing new
    /// when a fixed point was reached.
    pub rounds: usize,
    /// Clause instances applied, counting re-derivations of existing facts.
    pub firings: u64,
    /// Total facts in the result, seed facts included. Always at most
    /// `firings` plus the seed size.
    pub facts: usize,
}

/// How a derived fact was produced: a clause instance over earlier facts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// Index of the instantiated clause in the rule set.
    pub clause: usize,
    /// The instantiating substitution, covering every clause variable.
    pub subst: Substitution,
    /// Fact-base indices of the instantiated antecedents, in clause order.
    pub sources: Vec<usize>,
}

/// A duplicate-free collection of ground atoms in insertion order, indexed
/// by predicate, with optional provenance per atom.
///
/// Saturation results list the seed facts first (in their input order)
/// followed by derived facts in derivation order; seed facts carry no
/// provenance.
#[derive(Debug, Clone, Default)]
pub struct FactBase {
    atoms: Vec<Atom>,
    index: HashMap<Atom, usize>,
    provenance: Vec<Option<Provenance>>,
    by_pred: BTreeMap<String, Vec<usize>>,
    seed_len: usize,
}

impl FactBase {
    /// Builds a seed fact base. Duplicates collapse to their first
    /// occurrence; non-ground atoms are rejected.
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<FactBase, EngineError> {
        let mut fb = FactBase::default();
        for a in atoms {
            if !a.is_ground() {
                return Err(EngineError::NonGroundFact(a.to_string()));
            }
            fb.push(a, None);
        }
        fb.seed_len = fb.atoms.len();
        Ok(fb)
    }

    pub fn empty() -> FactBase {
        FactBase::default()
    }

    fn push(&mut self, a: Atom, prov: Option<Provenance>) {
        if self.index.contains_key(&a) {
            return;
        }
        let i = self.atoms.len();
        self.index.insert(a.clone(), i);
        self.by_pred.entry(a.pred.clone()).or_default().push(i);
        self.atoms.push(a);
        self.provenance.push(prov);
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// All atoms in insertion order: seeds first, then derivation order.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn get(&self, i: usize) -> Option<&Atom> {
        self.atoms.get(i)
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.index.contains_key(a)
    }

    pub fn position(&self, a: &Atom) -> Option<usize> {
        self.index.get(a).copied()
    }

    /// Provenance of the atom at `i`; `None` for seed facts.
    pub fn provenance(&self, i: usize) -> Option<&Provenance> {
        self.provenance.get(i).and_then(|p| p.as_ref())
    }

    /// How many leading atoms form the seed.
    pub fn seed_len(&self) -> usize {
        self.seed_len
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    /// Predicates present, in name order.
    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.by_pred.keys().map(String::as_str)
    }

    /// Atoms of one predicate, in insertion order.
    pub fn with_pred(&self, pred: &str) -> impl Iterator<Item = &Atom> {
        self.by_pred
            .get(pred)
            .into_iter()
            .flatten()
            .map(|&i| &self.atoms[i])
    }

    /// All atoms in canonical order (predicate name, then argument order).
    pub fn sorted_atoms(&self) -> Vec<Atom> {
        let mut v = self.atoms.clone();
        v.sort();
        v
    }

    /// Expands the recorded provenance of `goal` into a full derivation:
    /// a topologically ordered step list ending at `goal`. Returns `None`
    /// if `goal` is absent; a seed goal yields an empty step list.
    pub fn derivation_of(&self, goal: &Atom) -> Option<Derivation> {
        let gi = self.position(goal)?;
        let mut steps: Vec<DerivationStep> = Vec::new();
        let mut resolved: HashMap<usize, Source> = HashMap::new();
        let mut stack: Vec<(usize, usize)> = vec![(gi, 0)];
        while let Some(top) = stack.last_mut() {
            let fid = top.0;
            if resolved.contains_key(&fid) {
                stack.pop();
                continue;
            }
            let Some(p) = self.provenance(fid) else {
                debug_assert!(fid < self.seed_len);
                resolved.insert(fid, Source::Seed(fid));
                stack.pop();
                continue;
            };
            if top.1 < p.sources.len() {
                let child = p.sources[top.1];
                top.1 += 1;
                if !resolved.contains_key(&child) {
                    stack.push((child, 0));
                }
                continue;
            }
            let sources = p.sources.iter().map(|s| resolved[s]).collect();
            steps.push(DerivationStep {
                atom: self.atoms[fid].clone(),
                clause: p.clause,
                subst: p.subst.clone(),
                sources,
            });
            resolved.insert(fid, Source::Step(steps.len() - 1));
            stack.pop();
        }
        Some(Derivation {
            goal: goal.clone(),
            steps,
        })
    }
}

/// Where a derivation step found one of its antecedents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Index into the seed fact base; seed facts are not derivation steps.
    Seed(usize),
    /// Index of an earlier step in the same derivation.
    Step(usize),
}

/// One derivation step: a ground clause instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationStep {
    pub atom: Atom,
    pub clause: usize,
    pub subst: Substitution,
    /// One source per clause antecedent, in clause order.
    pub sources: Vec<Source>,
}

/// An ordered list of ground clause instances ending at `goal`. Seed facts
/// are cited by index, not listed as steps; a goal that is itself a seed
/// fact has no steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub goal: Atom,
    pub steps: Vec<DerivationStep>,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Seed(i) => write!(f, "fact {i}"),
            Source::Step(i) => write!(f, "step {i}"),
        }
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            return writeln!(f, "{}  [given]", self.goal);
        }
        for (i, s) in self.steps.iter().enumerate() {
            write!(f, "step {i}: {}  [clause {}", s.atom, s.clause)?;
            for (j, src) in s.sources.iter().enumerate() {
                write!(f, "{} {src}", if j == 0 { " from" } else { "," })?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// A clause whose conclusion mentions a term absent from every antecedent,
/// reported with the outermost such term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperficialityViolation {
    pub clause: usize,
    pub term: Term,
}

impl fmt::Display for SuperficialityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "clause {}: conclusion term {} does not occur in any antecedent",
            self.clause, self.term
        )
    }
}

/// Checks that every term of every conclusion occurs, at some depth, in an
/// antecedent of the same clause. Rule sets with this property never build
/// new terms, so free evaluation reaches a fixed point.
pub fn check_superficial(rules: &RuleSet) -> Result<(), SuperficialityViolation> {
    for (i, c) in rules.clauses.iter().enumerate() {
        let mut seen: HashSet<Term> = HashSet::new();
        for ant in &c.antecedents {
            for arg in &ant.args {
                arg.for_each_subterm(&mut |t| {
                    seen.insert(t.clone());
                });
            }
        }
        // `seen` is subterm-closed, so an argument either lies inside it
        // entirely or its outermost missing term is the argument subterm
        // found first in preorder.
        for arg in &c.conclusion.args {
            let mut missing: Option<Term> = None;
            arg.for_each_subterm(&mut |t| {
                if missing.is_none() && !seen.contains(t) {
                    missing = Some(t.clone());
                }
            });
            if let Some(term) = missing {
                return Err(SuperficialityViolation { clause: i, term });
            }
        }
    }
    Ok(())
}

/// The maximum number of distinct label formulas over a universe of
/// `universe_len` terms: the sum over predicates of `universe_len ^ arity`.
/// Bounded saturation can never exceed this many derived facts.
pub fn lemma2_bound(sig: &Signature, universe_len: usize) -> u128 {
    let n = universe_len as u128;
    sig.predicates
        .values()
        .map(|&a| u32::try_from(a).ok().and_then(|a| n.checked_pow(a)))
        .fold(0u128, |acc, x| acc.saturating_add(x.unwrap_or(u128::MAX)))
}

/// Saturates `seed` under `rules`, admitting only derivation steps whose
/// every formula is a label formula of `universe` (each argument a member).
/// Seed facts that are not label formulas are retained in the output but can
/// never satisfy an antecedent occurrence, so they are inert. Always
/// terminates: the output size is at most the seed size plus
/// [`lemma2_bound`].
pub fn saturate_bounded(
    rules: &RuleSet,
    seed: &FactBase,
    universe: &BoundingSet,
) -> (FactBase, EvalStats) {
    let mut ev = Eval::setup(rules, seed, Some(universe), true);
    ev.run(None);
    debug_assert!(
        (ev.active_derived as u128) <= lemma2_bound(&rules.signature, universe.len()),
        "bounded saturation exceeded its fact-count bound"
    );
    let (fb, stats) = ev.finish();
    (fb, stats)
}

/// Saturates `seed` under `rules` with no label restriction, running
/// breadth-first rounds until a fixed point or `max_rounds`. The returned
/// flag is true iff a fixed point was reached within the limit. Clauses
/// binding a variable only in their conclusion are rejected, since free
/// evaluation has no finite pool to draw instantiations from.
pub fn saturate_free(
    rules: &RuleSet,
    seed: &FactBase,
    max_rounds: usize,
) -> Result<(FactBase, EvalStats, bool), EngineError> {
    for (i, c) in rules.clauses.iter().enumerate() {
        let mut ant_vars = std::collections::BTreeSet::new();
        for a in &c.antecedents {
            a.collect_vars(&mut ant_vars);
        }
        let mut concl_vars = std::collections::BTreeSet::new();
        c.conclusion.collect_vars(&mut concl_vars);
        if let Some(v) = concl_vars.difference(&ant_vars).next() {
            return Err(EngineError::UnboundConclusionVar {
                clause: i,
                var: v.clone(),
            });
        }
    }
    let mut ev = Eval::setup(rules, seed, None, false);
    let exhausted = ev.run(Some(max_rounds));
    let (fb, stats) = ev.finish();
    Ok((fb, stats, exhausted))
}

/// Free evaluation as in [`saturate_free`], except that variables occurring
/// only in a conclusion are instantiated by enumerating `universe` members.
/// Derived facts are not label-checked; the universe is only the
/// instantiation pool.
pub fn saturate_free_with_universe(
    rules: &RuleSet,
    seed: &FactBase,
    universe: &BoundingSet,
    max_rounds: usize,
) -> (FactBase, EvalStats, bool) {
    let mut ev = Eval::setup(rules, seed, Some(universe), false);
    let exhausted = ev.run(Some(max_rounds));
    let (fb, stats) = ev.finish();
    (fb, stats, exhausted)
}

/// Decides whether `goal` follows from `seed` when every derivation step is
/// confined to the subterms of the seed and the goal: the universe is the
/// subterm closure of their argument terms and evaluation is bounded by it.
/// On success returns the derivation reconstructed from provenance.
///
/// The goal must be ground.
pub fn proves_local(rules: &RuleSet, seed: &FactBase, goal: &Atom) -> Option<Derivation> {
    assert!(goal.is_ground(), "query goal {goal} must be ground");
    let terms: Vec<&Term> = seed
        .iter()
        .flat_map(|a| a.args.iter())
        .chain(goal.args.iter())
        .collect();
    let universe = subterm_closure(terms).expect("seed and goal are ground");
    let (out, _) = saturate_bounded(rules, seed, &universe);
    out.derivation_of(goal)
}

/// Replays a derivation step by step: each step must be a ground instance
/// of a clause in `rules` whose antecedents all cite seed facts or earlier
/// steps, and the final step must be the goal (a stepless derivation is
/// valid only for a seed goal). With a universe, every step atom and every
/// cited seed fact must additionally be a label formula of it.
pub fn validate_derivation(
    rules: &RuleSet,
    seed: &FactBase,
    d: &Derivation,
    universe: Option<&BoundingSet>,
) -> bool {
    match d.steps.last() {
        None => {
            if !seed.contains(&d.goal) {
                return false;
            }
        }
        Some(last) => {
            if last.atom != d.goal {
                return false;
            }
        }
    }
    for (i, step) in d.steps.iter().enumerate() {
        let Some(c) = rules.clauses.get(step.clause) else {
            return false;
        };
        if !step.atom.is_ground() || step.subst.apply_atom(&c.conclusion) != step.atom {
            return false;
        }
        if step.sources.len() != c.antecedents.len() {
            return false;
        }
        for (j, src) in step.sources.iter().enumerate() {
            let cited = match *src {
                Source::Seed(k) => match seed.get(k) {
                    Some(a) => a,
                    None => return false,
                },
                Source::Step(k) => {
                    if k >= i {
                        return false;
                    }
                    &d.steps[k].atom
                }
            };
            if step.subst.apply_atom(&c.antecedents[j]) != *cited {
                return false;
            }
        }
    }
    if let Some(y) = universe {
        let label = |a: &Atom| is_label_formula(a, y).unwrap_or(false);
        if d.steps.is_empty() && !label(&d.goal) {
            return false;
        }
        for step in &d.steps {
            if !label(&step.atom) {
                return false;
            }
            for src in &step.sources {
                if let Source::Seed(k) = *src {
                    if !seed.get(k).is_some_and(label) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Interned evaluation core.

/// Interned ground term: a function symbol applied to interned arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TermDef {
    sym: u32,
    args: SmallVec<[u32; 4]>,
}

/// Interned ground atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct FAtom {
    pred: u32,
    args: SmallVec<[u32; 4]>,
}

#[derive(Default)]
struct Store {
    syms: IndexSet<String>,
    preds: IndexSet<String>,
    defs: IndexSet<TermDef>,
    /// tid to a maximally shared `Term` handle.
    handles: Vec<Term>,
    memo: HashMap<Term, u32>,
}

impl Store {
    fn sym_id(&mut self, s: &str) -> u32 {
        match self.syms.get_index_of(s) {
            Some(i) => i as u32,
            None => self.syms.insert_full(s.to_string()).0 as u32,
        }
    }

    fn pred_id(&mut self, s: &str) -> u32 {
        match self.preds.get_index_of(s) {
            Some(i) => i as u32,
            None => self.preds.insert_full(s.to_string()).0 as u32,
        }
    }

    fn intern_app(&mut self, sym: u32, args: SmallVec<[u32; 4]>) -> u32 {
        let (i, new) = self.defs.insert_full(TermDef { sym, args });
        if new {
            let def = self.defs.get_index(i).expect("just inserted");
            let handle = Term::app(
                self.syms[def.sym as usize].clone(),
                def.args.iter().map(|&a| self.handles[a as usize].clone()).collect(),
            );
            self.memo.insert(handle.clone(), i as u32);
            self.handles.push(handle);
        }
        i as u32
    }

    fn intern(&mut self, t: &Term) -> u32 {
        if let Some(&tid) = self.memo.get(t) {
            return tid;
        }
        let (sym, args) = t.app_parts().expect("interned terms are ground");
        let sym = self.sym_id(sym);
        let args: SmallVec<[u32; 4]> = args.iter().map(|a| self.intern(a)).collect();
        let tid = self.intern_app(sym, args);
        self.memo.insert(t.clone(), tid);
        tid
    }

    fn find_app(&self, sym: u32, args: &SmallVec<[u32; 4]>) -> Option<u32> {
        self.defs
            .get_index_of(&TermDef { sym, args: args.clone() })
            .map(|i| i as u32)
    }
}

/// Compiled clause term: a variable slot, a pre-interned ground term, or an
/// application to be resolved against the store.
#[derive(Debug, Clone)]
enum CTerm {
    Var(u32),
    Ground(u32),
    App(u32, Box<[CTerm]>),
}

#[derive(Debug, Clone)]
struct CAtom {
    pred: u32,
    args: Box<[CTerm]>,
}

#[derive(Debug, Clone)]
struct CClause {
    nvars: usize,
    var_names: Vec<String>,
    ants: Vec<CAtom>,
    concl: CAtom,
    /// Variables of the conclusion bound by no antecedent, instantiated by
    /// enumerating the universe pool.
    concl_only: Vec<u32>,
}

struct ClauseCompiler<'s> {
    store: &'s mut Store,
    var_names: Vec<String>,
}

impl ClauseCompiler<'_> {
    fn vid(&mut self, name: &str) -> u32 {
        match self.var_names.iter().position(|n| n == name) {
            Some(i) => i as u32,
            None => {
                self.var_names.push(name.to_string());
                (self.var_names.len() - 1) as u32
            }
        }
    }

    fn cterm(&mut self, t: &Term) -> CTerm {
        if t.is_ground() {
            return CTerm::Ground(self.store.intern(t));
        }
        if let Some(name) = t.var_name() {
            return CTerm::Var(self.vid(name));
        }
        let (sym, args) = t.app_parts().expect("non-var");
        let sym = self.store.sym_id(sym);
        CTerm::App(sym, args.iter().map(|a| self.cterm(a)).collect())
    }

    fn catom(&mut self, a: &Atom) -> CAtom {
        CAtom {
            pred: self.store.pred_id(&a.pred),
            args: a.args.iter().map(|t| self.cterm(t)).collect(),
        }
    }
}

fn compile_clause(c: &Clause, store: &mut Store) -> CClause {
    let mut cc = ClauseCompiler {
        store,
        var_names: Vec::new(),
    };
    let ants: Vec<CAtom> = c.antecedents.iter().map(|a| cc.catom(a)).collect();
    let n_ant_vars = cc.var_names.len();
    let concl = cc.catom(&c.conclusion);
    // Variable ids are assigned in first-occurrence order, antecedents
    // first, so conclusion-only variables are exactly the trailing ids.
    let concl_only: Vec<u32> = (n_ant_vars as u32..cc.var_names.len() as u32).collect();
    CClause {
        nvars: cc.var_names.len(),
        var_names: cc.var_names,
        ants,
        concl,
        concl_only,
    }
}

struct PredIdx {
    /// Active fact ids, segmented by round; each segment in canonical order.
    fids: Vec<u32>,
    /// `seg_ends[r]` is the end of round `r`'s segment in `fids`.
    seg_ends: Vec<usize>,
}

struct FInfo {
    prov: Option<CProv>,
}

struct CProv {
    clause: u32,
    bindings: SmallVec<[u32; 8]>,
    sources: SmallVec<[u32; 4]>,
}

#[derive(Debug, Clone, Copy)]
struct Item {
    cid: u32,
    pivot: u32,
    fid: u32,
}

struct Pending {
    cid: u32,
    bindings: SmallVec<[u32; 8]>,
    sources: SmallVec<[u32; 4]>,
}

struct Eval {
    store: Store,
    clauses: Vec<CClause>,
    /// In bounded mode, tids below this bound form the universe.
    label_bound: Option<usize>,
    /// Universe tids in canonical term order; instantiation pool for
    /// conclusion-only variables.
    pool: Vec<u32>,
    facts: Vec<FAtom>,
    info: Vec<FInfo>,
    index: HashMap<FAtom, u32>,
    by_pred: Vec<PredIdx>,
    seed_len: usize,
    active_derived: usize,
    stats: EvalStats,
}

impl Eval {
    fn setup(rules: &RuleSet, seed: &FactBase, universe: Option<&BoundingSet>, bounded: bool) -> Eval {
        let mut store = Store::default();
        if let Some(y) = universe {
            for t in y.iter() {
                store.intern(t);
            }
        }
        let ulen = store.defs.len();
        let label_bound = bounded.then_some(ulen);
        let mut pool: Vec<u32> = (0..ulen as u32).collect();
        pool.sort_by(|&a, &b| store.handles[a as usize].cmp(&store.handles[b as usize]));

        let clauses: Vec<CClause> = rules
            .clauses
            .iter()
            .map(|c| compile_clause(c, &mut store))
            .collect();

        let mut facts: Vec<FAtom> = Vec::new();
        let mut info: Vec<FInfo> = Vec::new();
        let mut index: HashMap<FAtom, u32> = HashMap::new();
        let mut actives: Vec<u32> = Vec::new();
        for a in seed.iter() {
            let pred = store.pred_id(&a.pred);
            let args: SmallVec<[u32; 4]> = a.args.iter().map(|t| store.intern(t)).collect();
            let fa = FAtom { pred, args };
            debug_assert!(!index.contains_key(&fa), "seed fact bases are duplicate-free");
            let fid = facts.len() as u32;
            let active = label_bound.is_none_or(|n| fa.args.iter().all(|&t| (t as usize) < n));
            index.insert(fa.clone(), fid);
            facts.push(fa);
            info.push(FInfo { prov: None });
            if active {
                actives.push(fid);
            }
        }

        let mut by_pred: Vec<PredIdx> = (0..store.preds.len())
            .map(|_| PredIdx {
                fids: Vec::new(),
                seg_ends: Vec::new(),
            })
            .collect();
        for fid in actives {
            by_pred[facts[fid as usize].pred as usize].fids.push(fid);
        }
        for idx in &mut by_pred {
            sort_canonical(&mut idx.fids, &facts, &store);
            idx.seg_ends.push(idx.fids.len());
        }

        Eval {
            store,
            clauses,
            label_bound,
            pool,
            seed_len: seed.len(),
            facts,
            info,
            index,
            by_pred,
            active_derived: 0,
            stats: EvalStats::default(),
        }
    }

    /// Runs rounds until a fixed point or `max_rounds`; true iff fixed point.
    fn run(&mut self, max_rounds: Option<usize>) -> bool {
        let mut round = 0usize;
        loop {
            if max_rounds.is_some_and(|m| round >= m) {
                return false;
            }
            round += 1;
            self.stats.rounds = round;
            let items = self.build_items(round);
            let ctx = MatchCtx {
                store: &self.store,
                clauses: &self.clauses,
                facts: &self.facts,
                by_pred: &self.by_pred,
                label_bound: self.label_bound,
                pool: &self.pool,
                round,
            };
            let groups = par::map_collect(&items, MIN_PARALLEL_ITEMS, |it| ctx.run_item(it));
            if self.merge(round, groups) == 0 {
                return true;
            }
        }
    }

    fn build_items(&self, round: usize) -> Vec<Item> {
        let mut items = Vec::new();
        for (cid, c) in self.clauses.iter().enumerate() {
            if c.ants.is_empty() {
                if round == 1 {
                    items.push(Item {
                        cid: cid as u32,
                        pivot: NO_PIVOT,
                        fid: 0,
                    });
                }
                continue;
            }
            for (p, ca) in c.ants.iter().enumerate() {
                let idx = &self.by_pred[ca.pred as usize];
                let lo = if round >= 2 { idx.seg_ends[round - 2] } else { 0 };
                let hi = idx.seg_ends[round - 1];
                for &fid in &idx.fids[lo..hi] {
                    items.push(Item {
                        cid: cid as u32,
                        pivot: p as u32,
                        fid,
                    });
                }
            }
        }
        items
    }

    /// Applies pendings in order; returns how many new facts were added.
    fn merge(&mut self, round: usize, groups: Vec<Vec<Pending>>) -> usize {
        let mut added_per_pred: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut added = 0usize;
        for pend in groups.into_iter().flatten() {
            self.stats.firings += 1;
            let c = &self.clauses[pend.cid as usize];
            let pred = c.concl.pred;
            let args: SmallVec<[u32; 4]> = c
                .concl
                .args
                .iter()
                .map(|ct| resolve_intern(ct, &pend.bindings, &mut self.store))
                .collect();
            let fa = FAtom { pred, args };
            if self.index.contains_key(&fa) {
                continue;
            }
            let fid = self.facts.len() as u32;
            debug_assert!(
                self.label_bound
                    .is_none_or(|n| fa.args.iter().all(|&t| (t as usize) < n)),
                "bounded matching emitted a non-label conclusion"
            );
            self.index.insert(fa.clone(), fid);
            self.facts.push(fa);
            self.info.push(FInfo {
                prov: Some(CProv {
                    clause: pend.cid,
                    bindings: pend.bindings,
                    sources: pend.sources,
                }),
            });
            added_per_pred.entry(pred).or_default().push(fid);
            added += 1;
        }
        self.active_derived += added;
        for (pred, mut fids) in added_per_pred {
            sort_canonical(&mut fids, &self.facts, &self.store);
            self.by_pred[pred as usize].fids.extend_from_slice(&fids);
        }
        for idx in &mut self.by_pred {
            idx.seg_ends.push(idx.fids.len());
        }
        debug_assert_eq!(self.by_pred.first().map_or(round + 1, |i| i.seg_ends.len()), round + 1);
        added
    }

    fn finish(self) -> (FactBase, EvalStats) {
        let mut stats = self.stats;
        stats.facts = self.facts.len();
        debug_assert!(
            stats.facts as u64 <= stats.firings + self.seed_len as u64,
            "every non-seed fact needs a firing"
        );
        let mut fb = FactBase::default();
        for (fid, fa) in self.facts.iter().enumerate() {
            let atom = Atom::new(
                self.store.preds[fa.pred as usize].clone(),
                fa.args
                    .iter()
                    .map(|&t| self.store.handles[t as usize].clone())
                    .collect(),
            );
            let prov = self.info[fid].prov.as_ref().map(|p| {
                let c = &self.clauses[p.clause as usize];
                Provenance {
                    clause: p.clause as usize,
                    subst: Substitution::from_pairs(p.bindings.iter().enumerate().map(
                        |(v, &t)| {
                            debug_assert_ne!(t, UNBOUND, "emitted instances bind every variable");
                            (
                                c.var_names[v].clone(),
                                self.store.handles[t as usize].clone(),
                            )
                        },
                    )),
                    sources: p.sources.iter().map(|&s| s as usize).collect(),
                }
            });
            fb.push(atom, prov);
        }
        fb.seed_len = self.seed_len;
        debug_assert_eq!(fb.len(), self.facts.len(), "evaluation never stores duplicates");
        (fb, stats)
    }
}

fn sort_canonical(fids: &mut [u32], facts: &[FAtom], store: &Store) {
    fids.sort_by(|&x, &y| {
        let (fx, fy) = (&facts[x as usize], &facts[y as usize]);
        fx.args
            .iter()
            .zip(fy.args.iter())
            .map(|(&a, &b)| store.handles[a as usize].cmp(&store.handles[b as usize]))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

fn resolve_intern(ct: &CTerm, bindings: &[u32], store: &mut Store) -> u32 {
    match ct {
        CTerm::Var(v) => bindings[*v as usize],
        CTerm::Ground(t) => *t,
        CTerm::App(sym, args) => {
            let args: SmallVec<[u32; 4]> = args
                .iter()
                .map(|a| resolve_intern(a, bindings, store))
                .collect();
            store.intern_app(*sym, args)
        }
    }
}

struct MatchCtx<'a> {
    store: &'a Store,
    clauses: &'a [CClause],
    facts: &'a [FAtom],
    by_pred: &'a [PredIdx],
    label_bound: Option<usize>,
    pool: &'a [u32],
    round: usize,
}

impl MatchCtx<'_> {
    fn run_item(&self, it: &Item) -> Vec<Pending> {
        let c = &self.clauses[it.cid as usize];
        let mut run = ItemRun {
            ctx: self,
            c,
            cid: it.cid,
            bindings: vec![UNBOUND; c.nvars],
            trail: Vec::new(),
            sources: smallvec![0; c.ants.len()],
            out: Vec::new(),
        };
        if it.pivot == NO_PIVOT {
            run.emit();
        } else {
            let p = it.pivot as usize;
            if run.match_catom(&c.ants[p], &self.facts[it.fid as usize]) {
                run.sources[p] = it.fid;
                run.join(0, p);
            }
        }
        run.out
    }
}

struct ItemRun<'a> {
    ctx: &'a MatchCtx<'a>,
    c: &'a CClause,
    cid: u32,
    bindings: Vec<u32>,
    trail: Vec<u32>,
    sources: SmallVec<[u32; 4]>,
    out: Vec<Pending>,
}

impl ItemRun<'_> {
    fn match_catom(&mut self, ca: &CAtom, fa: &FAtom) -> bool {
        debug_assert_eq!(ca.pred, fa.pred);
        if ca.args.len() != fa.args.len() {
            return false;
        }
        ca.args
            .iter()
            .zip(fa.args.iter())
            .all(|(ct, &t)| self.match_cterm(ct, t))
    }

    fn match_cterm(&mut self, ct: &CTerm, tid: u32) -> bool {
        match ct {
            CTerm::Ground(g) => *g == tid,
            CTerm::Var(v) => {
                let slot = &mut self.bindings[*v as usize];
                if *slot == UNBOUND {
                    *slot = tid;
                    self.trail.push(*v);
                    true
                } else {
                    *slot == tid
                }
            }
            CTerm::App(sym, args) => {
                let store = self.ctx.store;
                let def = &store.defs[tid as usize];
                def.sym == *sym
                    && def.args.len() == args.len()
                    && args
                        .iter()
                        .zip(def.args.iter())
                        .all(|(ct, &t)| self.match_cterm(ct, t))
            }
        }
    }

    fn unwind(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("nonempty");
            self.bindings[v as usize] = UNBOUND;
        }
    }

    /// Joins antecedents in clause order, skipping the pivot. An instance
    /// belongs to this round only if the pivot is its first newest source,
    /// so earlier positions scan strictly older facts than the pivot's round
    /// and later positions scan up to it.
    fn join(&mut self, ai: usize, pivot: usize) {
        if ai == self.c.ants.len() {
            self.emit();
            return;
        }
        if ai == pivot {
            self.join(ai + 1, pivot);
            return;
        }
        let rounds_through = if ai < pivot {
            match self.ctx.round.checked_sub(2) {
                Some(r) => r,
                None => return,
            }
        } else {
            self.ctx.round - 1
        };
        let ca = &self.c.ants[ai];
        let idx = &self.ctx.by_pred[ca.pred as usize];
        let hi = idx.seg_ends[rounds_through];
        for i in 0..hi {
            let fid = idx.fids[i];
            let mark = self.trail.len();
            if self.match_catom(ca, &self.ctx.facts[fid as usize]) {
                self.sources[ai] = fid;
                self.join(ai + 1, pivot);
            }
            self.unwind(mark);
        }
    }

    fn emit(&mut self) {
        self.enum_pool_vars(0);
    }

    fn enum_pool_vars(&mut self, vi: usize) {
        if vi == self.c.concl_only.len() {
            self.finalize();
            return;
        }
        let v = self.c.concl_only[vi] as usize;
        for i in 0..self.ctx.pool.len() {
            self.bindings[v] = self.ctx.pool[i];
            self.enum_pool_vars(vi + 1);
        }
        self.bindings[v] = UNBOUND;
    }

    fn finalize(&mut self) {
        if let Some(n) = self.ctx.label_bound {
            for ct in self.c.concl.args.iter() {
                match resolve_read(ct, &self.bindings, self.ctx.store) {
                    Some(t) if (t as usize) < n => {}
                    _ => return,
                }
            }
        }
        self.out.push(Pending {
            cid: self.cid,
            bindings: SmallVec::from_slice(&self.bindings),
            sources: self.sources.clone(),
        });
    }
}

fn resolve_read(ct: &CTerm, bindings: &[u32], store: &Store) -> Option<u32> {
    match ct {
        CTerm::Var(v) => {
            let t = bindings[*v as usize];
            debug_assert_ne!(t, UNBOUND);
            Some(t)
        }
        CTerm::Ground(t) => Some(*t),
        CTerm::App(sym, args) => {
            let args: Option<SmallVec<[u32; 4]>> = args
                .iter()
                .map(|a| resolve_read(a, bindings, store))
                .collect();
            store.find_app(*sym, &args?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_atom, parse_facts, parse_rules, parse_term};

    fn rules(src: &str) -> RuleSet {
        parse_rules("test", src).unwrap()
    }

    fn facts(src: &str) -> FactBase {
        FactBase::new(parse_facts(src).unwrap()).unwrap()
    }

    fn universe(srcs: &[&str]) -> BoundingSet {
        let terms: Vec<Term> = srcs.iter().map(|s| parse_term(s).unwrap()).collect();
        subterm_closure(terms.iter().collect::<Vec<_>>()).unwrap()
    }

    const TRANS: &str = "le(X, Y), le(Y, Z) -> le(X, Z).\n";
    const TRANS_MONO: &str = "le(X, Y), le(Y, Z) -> le(X, Z).\nle(X, Y) -> le(f(X), f(Y)).\n";

    #[test]
    fn bounded_transitive_step() {
        let (out, stats) = saturate_bounded(
            &rules(TRANS),
            &facts("le(a,b). le(b,c)."),
            &universe(&["a", "b", "c"]),
        );
        assert!(out.contains(&parse_atom("le(a,c)").unwrap()));
        assert_eq!(
            (stats.rounds, stats.firings, stats.facts),
            (2, 1, 3),
            "frozen counts keep parallel and sequential builds honest"
        );
        let p = out.provenance(2).unwrap();
        assert_eq!(p.clause, 0);
        assert_eq!(p.sources, vec![0, 1]);
        assert_eq!(p.subst.get("X"), Some(&Term::constant("a")));
        assert_eq!(p.subst.get("Z"), Some(&Term::constant("c")));
    }

    #[test]
    fn bounded_excludes_out_of_universe_conclusions() {
        let (out, stats) =
            saturate_bounded(&rules(TRANS_MONO), &facts("le(a,b)."), &universe(&["a", "b"]));
        assert_eq!(out.len(), 1);
        assert_eq!(stats.firings, 0);
    }

    #[test]
    fn bounded_enumerates_conclusion_only_variables() {
        let (out, _) = saturate_bounded(
            &rules("le(meet(X, Y), X).\n"),
            &FactBase::empty(),
            &universe(&["meet(a, b)"]),
        );
        assert_eq!(out.sorted_atoms(), vec![parse_atom("le(meet(a,b), a)").unwrap()]);
    }

    #[test]
    fn bounded_keeps_non_label_seed_facts_inert() {
        let (out, stats) = saturate_bounded(
            &rules(TRANS),
            &facts("le(a, f(b)). le(f(b), c)."),
            &universe(&["a", "b", "c"]),
        );
        // Both seeds mention f(b), outside the universe: retained, unusable.
        assert_eq!(out.len(), 2);
        assert_eq!(stats.firings, 0);
        assert!(!out.contains(&parse_atom("le(a,c)").unwrap()));
    }

    #[test]
    fn bounded_saturation_is_deterministic() {
        let r = rules(TRANS_MONO);
        let s = facts("le(a,b). le(b,a).");
        let y = universe(&["f(a)", "f(b)"]);
        let (out1, stats1) = saturate_bounded(&r, &s, &y);
        let (out2, stats2) = saturate_bounded(&r, &s, &y);
        assert_eq!(out1.atoms(), out2.atoms());
        assert_eq!(stats1, stats2);
        assert_eq!((stats1.rounds, stats1.firings, stats1.facts), (3, 20, 8));
        for i in 0..out1.len() {
            assert_eq!(out1.provenance(i), out2.provenance(i));
        }
    }

    #[test]
    fn free_round_limit_and_growth() {
        let (out, stats, exhausted) =
            saturate_free(&rules("p(X) -> p(f(X)).\n"), &facts("p(a)."), 3).unwrap();
        assert_eq!(stats.facts, 4);
        assert_eq!(stats.rounds, 3);
        assert_eq!(stats.firings, 3);
        assert!(!exhausted);
        assert!(out.contains(&parse_atom("p(f(f(f(a))))").unwrap()));
    }

    #[test]
    fn free_fixed_point_detection() {
        let r = rules("q(X) -> p(f(X)).\n");
        let s = facts("q(c).");
        let (out, _, exhausted) = saturate_free(&r, &s, 1).unwrap();
        assert!(out.contains(&parse_atom("p(f(c))").unwrap()));
        assert!(!exhausted, "the fixed point is not yet confirmed after one round");
        let (_, stats, exhausted) = saturate_free(&r, &s, 5).unwrap();
        assert!(exhausted);
        assert_eq!(stats.rounds, 2);
        assert_eq!(stats.firings, 1);
    }

    #[test]
    fn free_rejects_conclusion_only_variables() {
        let err = saturate_free(&rules("le(meet(X, Y), X).\n"), &FactBase::empty(), 5)
            .unwrap_err();
        assert_eq!(
            err,
            EngineError::UnboundConclusionVar {
                clause: 0,
                var: "X".to_string(),
            }
        );
    }

    #[test]
    fn free_with_universe_enumerates_without_label_checks() {
        let (out, _, exhausted) = saturate_free_with_universe(
            &rules("le(meet(X, Y), X).\n"),
            &FactBase::empty(),
            &universe(&["meet(a, b)"]),
            10,
        );
        // Three pool terms in each slot; new meet(..) terms are allowed.
        assert!(exhausted);
        assert_eq!(out.len(), 9);
        assert!(out.contains(&parse_atom("le(meet(a,b), a)").unwrap()));
        assert!(out.contains(&parse_atom("le(meet(b,b), b)").unwrap()));
        assert!(out.contains(&parse_atom("le(meet(meet(a,b), a), meet(a,b))").unwrap()));
    }

    #[test]
    fn proves_local_finds_and_rejects() {
        let d = proves_local(
            &rules(TRANS),
            &facts("le(a,b). le(b,c)."),
            &parse_atom("le(a,c)").unwrap(),
        )
        .unwrap();
        assert_eq!(d.steps.len(), 1);
        assert_eq!(d.steps[0].sources, vec![Source::Seed(0), Source::Seed(1)]);

        // The middle fact would need f(c), outside the query's subterms.
        let none = proves_local(
            &rules("q(X) -> p(f(X)).\np(f(X)) -> r(X).\n"),
            &facts("q(c)."),
            &parse_atom("r(c)").unwrap(),
        );
        assert!(none.is_none());

        // Here f(a) and f(b) appear in the goal itself.
        let d = proves_local(
            &rules(TRANS_MONO),
            &facts("le(a,b)."),
            &parse_atom("le(f(a), f(b))").unwrap(),
        )
        .unwrap();
        assert_eq!(d.steps.len(), 1);
        assert_eq!(d.steps[0].clause, 1);
    }

    #[test]
    fn derivations_are_topologically_ordered() {
        let d = proves_local(
            &rules(TRANS),
            &facts("le(a,b). le(b,c). le(c,d)."),
            &parse_atom("le(a,d)").unwrap(),
        )
        .unwrap();
        let atoms: Vec<String> = d.steps.iter().map(|s| s.atom.to_string()).collect();
        assert_eq!(atoms, vec!["le(a, c)", "le(a, d)"]);
        assert_eq!(d.steps[1].sources, vec![Source::Step(0), Source::Seed(2)]);
        assert!(d.to_string().contains("step 1: le(a, d)"));
    }

    #[test]
    fn seed_goals_have_stepless_derivations() {
        let s = facts("le(a,b).");
        let d = proves_local(&rules(TRANS), &s, &parse_atom("le(a,b)").unwrap()).unwrap();
        assert!(d.steps.is_empty());
        assert!(validate_derivation(&rules(TRANS), &s, &d, None));
    }

    #[test]
    fn validate_accepts_round_trips_and_rejects_tampering() {
        let r = rules(TRANS);
        let s = facts("le(a,b). le(b,c).");
        let goal = parse_atom("le(a,c)").unwrap();
        let d = proves_local(&r, &s, &goal).unwrap();
        assert!(validate_derivation(&r, &s, &d, None));
        assert!(validate_derivation(&r, &s, &d, Some(&universe(&["a", "b", "c"]))));

        let mut cites_later = d.clone();
        cites_later.steps[0].sources[0] = Source::Step(0);
        assert!(!validate_derivation(&r, &s, &cites_later, None));

        let mut wrong_seed = d.clone();
        wrong_seed.steps[0].sources[0] = Source::Seed(1);
        assert!(!validate_derivation(&r, &s, &wrong_seed, None));

        let mut wrong_clause = d.clone();
        wrong_clause.steps[0].clause = 7;
        assert!(!validate_derivation(&r, &s, &wrong_clause, None));

        let mut wrong_goal = d;
        wrong_goal.goal = parse_atom("le(c,a)").unwrap();
        assert!(!validate_derivation(&r, &s, &wrong_goal, None));
    }

    #[test]
    fn validate_applies_label_checks() {
        let r = rules(TRANS_MONO);
        let s = facts("le(a,b).");
        let goal = parse_atom("le(f(a), f(b))").unwrap();
        let d = proves_local(&r, &s, &goal).unwrap();
        assert!(validate_derivation(&r, &s, &d, None));
        assert!(!validate_derivation(&r, &s, &d, Some(&universe(&["a", "b"]))));
    }

    #[test]
    fn superficiality_check_reports_outermost_offender() {
        let ok = rules(
            "m(f(X)) -> m(X).\nle(X, Y) -> m(X).\nle(X, Y) -> m(Y).\nm(X) -> le(X, X).\n\
             m(X), m(Y), m(Z), le(X, Y), le(Y, Z) -> le(X, Z).\n\
             m(f(X)), m(f(Y)), le(X, Y) -> le(f(X), f(Y)).\n",
        );
        assert!(check_superficial(&ok).is_ok());

        let v = check_superficial(&rules("q(X) -> p(f(X)).\n")).unwrap_err();
        assert_eq!(v.clause, 0);
        assert_eq!(v.term, parse_term("f(X)").unwrap());

        let v = check_superficial(&rules("le(X, Y) -> le(X, Z).\np(a).\n")).unwrap_err();
        assert_eq!((v.clause, v.term.to_string().as_str()), (0, "Z"));

        let v = check_superficial(&rules("p(a).\n")).unwrap_err();
        assert_eq!((v.clause, v.term.to_string().as_str()), (0, "a"));
    }

    #[test]
    fn fact_count_bound_matches_signature() {
        let r = rules(TRANS_MONO);
        assert_eq!(lemma2_bound(&r.signature, 3), 9);
        let (out, _) = saturate_bounded(&r, &facts("le(a,b). le(b,c)."), &universe(&["a", "b", "c"]));
        assert!(out.len() as u128 <= 2 + lemma2_bound(&r.signature, 3));
    }

    #[test]
    fn fact_base_rejects_non_ground_and_collapses_duplicates() {
        let e = FactBase::new(vec![parse_atom("p(X)").unwrap()]).unwrap_err();
        assert!(matches!(e, EngineError::NonGroundFact(_)));
        let fb = FactBase::new(parse_facts("p(a). q(b). p(a).").unwrap()).unwrap();
        assert_eq!(fb.len(), 2);
        assert_eq!(fb.seed_len(), 2);
        assert_eq!(fb.with_pred("p").count(), 1);
    }
}

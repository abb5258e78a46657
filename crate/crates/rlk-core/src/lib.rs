//! Horn-clause rule sets with locality analysis.
//!
//! The crate provides first-order terms and Horn clauses ([`term`]), parsers
//! for the shared textual syntax ([`parse`]), a bottom-up inference engine
//! with free and universe-bounded modes ([`engine`]), source-to-source rule
//! transformations ([`transform`]), a generated rule set computing structural
//! relations over a term's subterm graph ([`scaffold`]), a locality checker
//! for rule sets ([`locality`]), a context-free grammar compiler
//! ([`grammar`]), and a corpus of named example rule sets ([`corpus`]).

pub mod corpus;
pub mod engine;
pub mod grammar;
pub mod locality;
mod par;
pub mod parse;
pub mod scaffold;
pub mod term;
pub mod transform;

pub use corpus::{corpus, entries, CorpusEntry};
pub use engine::{
    check_superficial, lemma2_bound, proves_local, saturate_bounded, saturate_free,
    saturate_free_with_universe, validate_derivation, Derivation, DerivationStep, EngineError,
    EvalStats, FactBase, Provenance, Source, SuperficialityViolation,
};
pub use grammar::{compile, cyk_oracle, encode, parse_grammar, recognize, Grammar, Production};
pub use locality::{
    b_step, backchain, check_locality, check_locality_with_budget, extension_marker, freeze,
    generate_initial, ground_backchain, ground_instance_of, ground_templates, is_feedback_event,
    is_well_formed,
    justifies, self_justifying, AlphaShape, CheckOutcome, FeedbackEvent, Frozen, GroundTemplate,
    InconclusiveReason, LocalityError, TemplateSchema, Verdict, DEFAULT_BUDGET, DEFAULT_MAX_DEPTH,
};
pub use parse::{parse_atom, parse_facts, parse_rules, parse_signature, parse_term, ParseError};
pub use scaffold::{scaffold_rules, successor_facts, traversal_oracle};
pub use term::{
    canonical_rename, dag_size, is_label_formula, subterm_closure, unify, Atom, BoundingSet,
    Clause, RuleSet, Signature, Substitution, Term, TermError,
};
pub use transform::{
    bounded_query_via_mention, mentionize, prime_transform, TransformError, DEFAULT_MENTION,
    PRIME_SUFFIX,
};

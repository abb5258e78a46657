//! The `rlk` command line: derivability queries, locality checks,
//! source-to-source transforms, scaffold generation, grammar recognition,
//! and a built-in corpus of example rule sets.
//!
//! Exit codes are part of the interface: 0 for a positive answer
//! (derivable, inductively local, accepted, success), 1 for a negative
//! answer (not derivable, not local, rejected), 2 when the tool cannot
//! decide, 64 for usage errors, and 65 for parse errors, which are reported
//! with line and column.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rlk_core::{
    canonical_rename, check_locality_with_budget, corpus, entries, mentionize, parse_atom,
    parse_facts, parse_grammar, parse_rules, parse_signature, parse_term, prime_transform,
    recognize, saturate_bounded, saturate_free, scaffold_rules, subterm_closure, Atom, Derivation,
    EvalStats, FactBase, RuleSet, Verdict, DEFAULT_MENTION,
};

const EXIT_NO: u8 = 1;
const EXIT_UNDECIDED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_PARSE: u8 = 65;

#[derive(Parser)]
#[command(
    name = "rlk",
    version,
    about = "Horn-clause rule sets: saturation, locality analysis, and transforms"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Saturate a fact base under a rule set and answer a query
    Derive(DeriveArgs),
    /// Decide whether a rule set is inductively local
    Check(CheckArgs),
    /// Rewrite a rule set source-to-source
    #[command(subcommand)]
    Transform(TransformCmd),
    /// Derive the subterm-ordering relations of a ground term
    Scaffold(ScaffoldArgs),
    /// Recognize a sentence with a compiled context-free grammar
    Grammar(GrammarArgs),
    /// List or show the built-in example rule sets
    #[command(subcommand)]
    Corpus(CorpusCmd),
}

#[derive(Args)]
struct DeriveArgs {
    /// Rules file, or corpus:<key>
    #[arg(long)]
    rules: String,
    /// Facts file: ground atoms, one statement per `.`
    #[arg(long)]
    facts: String,
    /// Ground atom to decide; without it the whole saturation is printed
    #[arg(long)]
    query: Option<String>,
    /// bounded: derivations stay within subterms of facts and query
    #[arg(long, default_value = "bounded", value_parser = ["bounded", "free"])]
    mode: String,
    /// Round limit for free mode
    #[arg(long, default_value_t = 1000)]
    max_rounds: usize,
    /// Print evaluation counters
    #[arg(long)]
    stats: bool,
    /// Machine-readable output
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// Rules file, or corpus:<key>
    #[arg(long)]
    rules: String,
    /// Backchaining levels to explore before giving up
    #[arg(long, default_value_t = 10)]
    max_depth: usize,
    /// Node budget for justification searches
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// Machine-readable output
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum TransformCmd {
    /// Guard every clause variable with a mention antecedent
    Mention {
        /// Rules file, or corpus:<key>
        #[arg(long)]
        rules: String,
        /// Output file; stdout when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Turn per-tuple acceptance into derivability of a goal predicate
    Prime {
        /// Rules file, or corpus:<key>
        #[arg(long)]
        rules: String,
        /// Arity of the input predicate
        #[arg(long)]
        arity: usize,
        /// Input predicate name
        #[arg(long)]
        input: String,
        /// Accepting predicate name (arity 0)
        #[arg(long)]
        accept: String,
        /// Fresh goal predicate name
        #[arg(long)]
        goal: String,
        /// Output file; stdout when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScaffoldArgs {
    /// Signature file: one `name/arity` per line
    #[arg(long)]
    signature: String,
    /// Ground input term
    #[arg(long)]
    term: String,
    /// Print one relation instead of all four
    #[arg(long, value_parser = ["s", "su", "ne", "ni"])]
    relation: Option<String>,
}

#[derive(Args)]
struct GrammarArgs {
    /// Grammar file: `A -> B C` or `A -> word`, one per line
    #[arg(long)]
    grammar: String,
    /// Whitespace-separated words
    #[arg(long)]
    sentence: String,
    /// Print evaluation counters
    #[arg(long)]
    stats: bool,
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// All corpus keys with their descriptions
    List,
    /// The rule text of one corpus entry
    Show { key: String },
}

enum CliError {
    Usage(String),
    Parse(String),
}

impl CliError {
    fn report(self) -> ExitCode {
        match self {
            CliError::Usage(msg) => {
                eprintln!("rlk: {msg}");
                ExitCode::from(EXIT_USAGE)
            }
            CliError::Parse(msg) => {
                eprintln!("rlk: {msg}");
                ExitCode::from(EXIT_PARSE)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(EXIT_USAGE)
                }
            };
        }
    };
    let run = match cli.cmd {
        Cmd::Derive(a) => run_derive(a),
        Cmd::Check(a) => run_check(a),
        Cmd::Transform(a) => run_transform(a),
        Cmd::Scaffold(a) => run_scaffold(a),
        Cmd::Grammar(a) => run_grammar(a),
        Cmd::Corpus(a) => run_corpus(a),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => e.report(),
    }
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

fn read_file(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))
}

fn load_rules(spec: &str) -> Result<RuleSet, CliError> {
    if let Some(key) = spec.strip_prefix("corpus:") {
        return corpus(key)
            .map(|e| e.rules())
            .ok_or_else(|| CliError::Usage(format!("unknown corpus key '{key}'")));
    }
    let src = read_file(spec)?;
    let name = Path::new(spec)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("rules")
        .to_string();
    parse_rules(&name, &src).map_err(|e| CliError::Parse(format!("{spec}: {e}")))
}

fn load_facts(path: &str) -> Result<FactBase, CliError> {
    let src = read_file(path)?;
    let atoms = parse_facts(&src).map_err(|e| CliError::Parse(format!("{path}: {e}")))?;
    FactBase::new(atoms).map_err(|e| CliError::Parse(format!("{path}: {e}")))
}

// ---------------------------------------------------------------------------
// derive
// ---------------------------------------------------------------------------

fn stats_value(stats: &EvalStats) -> Value {
    json!({
        "rounds": stats.rounds,
        "firings": stats.firings,
        "facts": stats.facts,
    })
}

fn print_stats(stats: &EvalStats) {
    println!(
        "rounds={} firings={} facts={}",
        stats.rounds, stats.firings, stats.facts
    );
}

fn steps_value(d: &Derivation) -> Value {
    Value::Array(
        d.steps
            .iter()
            .map(|s| {
                json!({
                    "atom": s.atom.to_string(),
                    "clause": s.clause,
                    "sources": s.sources.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

fn answer_query(
    out: &FactBase,
    stats: &EvalStats,
    goal: &Atom,
    decided: bool,
    a: &DeriveArgs,
) -> u8 {
    let derivation = out.derivation_of(goal);
    let (verdict, code) = match (&derivation, decided) {
        (Some(_), _) => ("derivable", 0),
        (None, true) => ("not-derivable", EXIT_NO),
        (None, false) => ("inconclusive", EXIT_UNDECIDED),
    };
    if a.json {
        let mut v = json!({ "verdict": verdict, "stats": stats_value(stats) });
        if let Some(d) = &derivation {
            v["steps"] = steps_value(d);
        }
        println!("{v}");
    } else {
        println!("{verdict}");
        if let Some(d) = &derivation {
            print!("{d}");
        }
        if a.stats {
            print_stats(stats);
        }
    }
    code
}

fn print_saturation(out: &FactBase, stats: &EvalStats, fixpoint: bool, a: &DeriveArgs) -> u8 {
    let mut atoms = out.sorted_atoms();
    atoms.dedup();
    if a.json {
        let v = json!({
            "facts": atoms.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "fixpoint": fixpoint,
            "stats": stats_value(stats),
        });
        println!("{v}");
    } else {
        for atom in &atoms {
            println!("{atom}");
        }
        if !fixpoint {
            println!("inconclusive: no fixed point within the round limit");
        }
        if a.stats {
            print_stats(stats);
        }
    }
    if fixpoint {
        0
    } else {
        EXIT_UNDECIDED
    }
}

fn run_derive(a: DeriveArgs) -> Result<u8, CliError> {
    let rules = load_rules(&a.rules)?;
    let facts = load_facts(&a.facts)?;
    let query = a
        .query
        .as_deref()
        .map(|q| parse_atom(q).map_err(|e| CliError::Parse(format!("query: {e}"))))
        .transpose()?;
    if let Some(q) = &query {
        if !q.is_ground() {
            return Err(CliError::Usage(format!("query {q} must be ground")));
        }
    }
    match a.mode.as_str() {
        "bounded" => {
            let universe = subterm_closure(
                facts
                    .iter()
                    .flat_map(|f| f.args.iter())
                    .chain(query.iter().flat_map(|q| q.args.iter())),
            )
            .expect("facts and query are ground");
            let (out, stats) = saturate_bounded(&rules, &facts, &universe);
            Ok(match &query {
                Some(q) => answer_query(&out, &stats, q, true, &a),
                None => print_saturation(&out, &stats, true, &a),
            })
        }
        "free" => {
            let (out, stats, fixpoint) = saturate_free(&rules, &facts, a.max_rounds)
                .map_err(|e| CliError::Usage(format!("free mode: {e}")))?;
            Ok(match &query {
                Some(q) if out.contains(q) => answer_query(&out, &stats, q, true, &a),
                Some(q) => answer_query(&out, &stats, q, fixpoint, &a),
                None => print_saturation(&out, &stats, fixpoint, &a),
            })
        }
        _ => unreachable!("clap validates the mode"),
    }
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn run_check(a: CheckArgs) -> Result<u8, CliError> {
    let rules = load_rules(&a.rules)?;
    let outcome = check_locality_with_budget(&rules, a.max_depth, a.budget);
    let code = match &outcome.verdict {
        Verdict::InductivelyLocal(_) => 0,
        Verdict::NotLocal(_) => EXIT_NO,
        Verdict::Inconclusive(_) => EXIT_UNDECIDED,
    };
    if a.json {
        let stats = json!({ "schemas_per_level": outcome.schemas_per_level });
        let v = match &outcome.verdict {
            Verdict::InductivelyLocal(n) => {
                json!({ "verdict": "inductively-local", "depth": n, "stats": stats })
            }
            Verdict::NotLocal(e) => json!({
                "verdict": "not-local",
                "event": {
                    "sigma": e.sigma.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                    "phi": e.phi.to_string(),
                    "y": e.y.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                    "alpha": e.alpha.to_string(),
                },
                "stats": stats,
            }),
            Verdict::Inconclusive(r) => {
                json!({ "verdict": "inconclusive", "reason": r.to_string(), "stats": stats })
            }
        };
        println!("{v}");
    } else {
        println!("{}", outcome.verdict);
    }
    Ok(code)
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

/// Clauses in canonical variable names, sorted, one per line: stable under
/// any reformulation of an equal rule set.
fn canonical_text(rules: &RuleSet) -> String {
    let mut lines: Vec<String> = rules
        .clauses
        .iter()
        .map(|c| canonical_rename(c).to_string())
        .collect();
    lines.sort();
    lines.join("\n") + "\n"
}

fn write_output(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_transform(cmd: TransformCmd) -> Result<u8, CliError> {
    match cmd {
        TransformCmd::Mention { rules, output } => {
            let rules = load_rules(&rules)?;
            let guarded = mentionize(&rules, DEFAULT_MENTION)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            write_output(&canonical_text(&guarded), output.as_deref())?;
            Ok(0)
        }
        TransformCmd::Prime {
            rules,
            arity,
            input,
            accept,
            goal,
            output,
        } => {
            let rules = load_rules(&rules)?;
            let primed = prime_transform(&rules, arity, &input, &accept, &goal)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            write_output(&canonical_text(&primed), output.as_deref())?;
            Ok(0)
        }
    }
}

// ---------------------------------------------------------------------------
// scaffold
// ---------------------------------------------------------------------------

fn run_scaffold(a: ScaffoldArgs) -> Result<u8, CliError> {
    let sig = parse_signature(&read_file(&a.signature)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", a.signature)))?;
    let term = parse_term(&a.term).map_err(|e| CliError::Parse(format!("term: {e}")))?;
    if !term.is_ground() {
        return Err(CliError::Usage(format!("term {term} must be ground")));
    }
    let mut bad = None;
    term.for_each_subterm(&mut |s| {
        if let Some((f, args)) = s.app_parts() {
            if sig.functions.get(f) != Some(&args.len()) && bad.is_none() {
                bad = Some(format!("{f}/{}", args.len()));
            }
        }
    });
    if let Some(symbol) = bad {
        return Err(CliError::Usage(format!(
            "term uses {symbol}, which the signature does not declare"
        )));
    }

    let rules = scaffold_rules(&sig);
    let seed = FactBase::new(vec![Atom::new("input", vec![term.clone()])])
        .expect("the input fact is ground");
    let universe = subterm_closure([&term]).expect("ground term");
    let (out, _) = saturate_bounded(&rules, &seed, &universe);
    let mut facts = out.sorted_atoms();
    facts.retain(|f| match &a.relation {
        Some(rel) => f.pred == *rel,
        None => matches!(f.pred.as_str(), "s" | "su" | "ne" | "ni"),
    });
    for f in facts {
        println!("{f}");
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// grammar
// ---------------------------------------------------------------------------

fn run_grammar(a: GrammarArgs) -> Result<u8, CliError> {
    let g = parse_grammar(&read_file(&a.grammar)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", a.grammar)))?;
    let words: Vec<&str> = a.sentence.split_whitespace().collect();
    let (ok, stats) = recognize(&g, &words);
    println!("{}", if ok { "accepted" } else { "rejected" });
    if a.stats {
        print_stats(&stats);
    }
    Ok(if ok { 0 } else { EXIT_NO })
}

// ---------------------------------------------------------------------------
// corpus
// ---------------------------------------------------------------------------

fn run_corpus(cmd: CorpusCmd) -> Result<u8, CliError> {
    match cmd {
        CorpusCmd::List => {
            for e in entries() {
                println!("{:<24} {}", e.key, e.notes);
            }
            Ok(0)
        }
        CorpusCmd::Show { key } => match corpus(&key) {
            Some(e) => {
                let text = e.text();
                print!("{text}");
                if !text.ends_with('\n') {
                    println!();
                }
                Ok(0)
            }
            None => Err(CliError::Usage(format!("unknown corpus key '{key}'"))),
        },
    }
}

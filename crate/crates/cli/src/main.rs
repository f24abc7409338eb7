//! `cotype`: check data-systems, run equational programs and test type
//! membership from session files.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::rc::Rc;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use cotype_core::arith_repr::{dump, funcrepr_to_prefix, term_to_funcrepr, ConstructorCodeTable};
use cotype_core::datasystem::{classify_rank, TypeId, ValidatedSystem};
use cotype_core::evaluator::{as_source, EvalConfig, Valuation};
use cotype_core::program::Program;
use cotype_core::session::{parse_session, Session};
use cotype_core::source::{
    prefix, ConstructorQuery, FinitePrefix, HyperTermSource, SourceRef, UnknownReason,
};
use cotype_core::term::Address;
use cotype_core::typecheck::{
    check_program_type, check_type, eq_program, typed_eq, CheckParams, MembershipVerdict,
    TypeCheckError,
};
use cotype_core::vocab::Vocabulary;

const DEFAULT_FUEL: usize = 10_000;
const DEFAULT_DEPTH: usize = 32;

#[derive(Parser)]
#[command(
    name = "cotype",
    version,
    about = "Inductive and coinductive data-systems over hyper-terms"
)]
struct Cli {
    /// Print a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Budget {
    /// Rewrite steps per observation, and work units per membership check.
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    fuel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a session file.
    Check { file: PathBuf },
    /// Rank of a data-system and of each of its types.
    Rank {
        file: PathBuf,
        #[arg(long)]
        system: String,
    },
    /// Evaluate a term and print its prefix.
    Eval {
        file: PathBuf,
        #[arg(long)]
        program: String,
        #[arg(long)]
        term: String,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[command(flatten)]
        budget: Budget,
    },
    /// Check membership of a term in a type.
    Type {
        file: PathBuf,
        #[arg(long)]
        system: String,
        #[arg(long = "type")]
        ty: String,
        #[arg(long)]
        term: String,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        height: usize,
        #[command(flatten)]
        budget: Budget,
    },
    /// Typed equality of two terms.
    Eq {
        file: PathBuf,
        #[arg(long)]
        system: String,
        #[arg(long = "type")]
        ty: String,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[command(flatten)]
        budget: Budget,
    },
    /// Check a typing claim `from(x) -> to(f(x))` on sample inputs.
    Claim {
        file: PathBuf,
        #[arg(long)]
        program: String,
        #[arg(long = "fn")]
        function: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// File with one closed term per line.
        #[arg(long)]
        samples: PathBuf,
        /// System holding both types; needed only when several do.
        #[arg(long)]
        system: Option<String>,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        height: usize,
        #[command(flatten)]
        budget: Budget,
    },
    /// Numeric-function representation of a term.
    Repr {
        file: PathBuf,
        #[arg(long)]
        term: String,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        /// Write `addr-code<TAB>ctor-code` lines here.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Outcome {
    Positive,
    Refuted,
    Unknown,
    InputError,
}

impl Outcome {
    fn exit_code(self) -> u8 {
        match self {
            Outcome::Positive => 0,
            Outcome::Refuted => 1,
            Outcome::Unknown => 2,
            Outcome::InputError => 3,
        }
    }

    fn of(v: &MembershipVerdict) -> Outcome {
        match v {
            MembershipVerdict::VerifiedToHeight(_) | MembershipVerdict::Derived(_) => {
                Outcome::Positive
            }
            MembershipVerdict::Refuted { .. } => Outcome::Refuted,
            MembershipVerdict::Unknown(_) => Outcome::Unknown,
        }
    }
}

#[derive(Serialize)]
struct Report {
    command: &'static str,
    file: String,
    arguments: BTreeMap<&'static str, String>,
    budgets: BTreeMap<&'static str, usize>,
    outcome: Outcome,
    exit_code: u8,
    result: Value,
    lines: Vec<String>,
}

impl Report {
    fn new(command: &'static str, file: &std::path::Path) -> Self {
        Report {
            command,
            file: file.display().to_string(),
            arguments: BTreeMap::new(),
            budgets: BTreeMap::new(),
            outcome: Outcome::Positive,
            exit_code: 0,
            result: Value::Null,
            lines: Vec::new(),
        }
    }

    fn arg(mut self, key: &'static str, value: impl ToString) -> Self {
        self.arguments.insert(key, value.to_string());
        self
    }

    fn budget(mut self, key: &'static str, value: usize) -> Self {
        self.budgets.insert(key, value);
        self
    }

    fn finish(mut self, outcome: Outcome) -> Self {
        self.outcome = outcome;
        self.exit_code = outcome.exit_code();
        self
    }
}

/// An input problem, reported with exit code 3.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type Run = Result<Report, InputError>;

fn load(file: &std::path::Path) -> Result<Session, InputError> {
    let text =
        fs::read_to_string(file).map_err(|e| InputError(format!("{}: {e}", file.display())))?;
    parse_session(&text).map_err(|e| InputError(format!("{}:{e}", file.display())))
}

fn system<'s>(session: &'s Session, name: &str) -> Result<&'s ValidatedSystem, InputError> {
    session
        .system(name)
        .ok_or_else(|| InputError(format!("no system named `{name}`")))
}

fn type_id(sys: &ValidatedSystem, name: &str) -> Result<TypeId, InputError> {
    sys.lookup_type(name)
        .ok_or_else(|| InputError(format!("system `{}` has no type `{name}`", sys.name())))
}

fn program<'s>(session: &'s Session, name: &str) -> Result<&'s Arc<Program>, InputError> {
    session
        .program(name)
        .ok_or_else(|| InputError(format!("no program named `{name}`")))
}

fn eval_config(fuel: usize) -> EvalConfig {
    EvalConfig {
        fuel: fuel.max(1),
        ..EvalConfig::default()
    }
}

fn term_source(
    session: &Session,
    program: &Arc<Program>,
    text: &str,
    fuel: usize,
) -> Result<SourceRef, InputError> {
    let t = session.parse_term(text, program)?;
    Ok(as_source(
        program.clone(),
        Valuation::new(),
        t,
        eval_config(fuel),
    ))
}

/// Remembers the first `Unknown` answer seen through it.
struct Watch {
    inner: SourceRef,
    unknown: Cell<Option<UnknownReason>>,
}

impl HyperTermSource for Watch {
    fn query(&self, addr: &Address) -> ConstructorQuery {
        let q = self.inner.query(addr);
        if let ConstructorQuery::Unknown(r) = q {
            if self.unknown.get().is_none() {
                self.unknown.set(Some(r));
            }
        }
        q
    }
}

fn watched_prefix(
    src: SourceRef,
    vocab: &Vocabulary,
    depth: usize,
) -> (FinitePrefix, Option<UnknownReason>) {
    let w = Watch {
        inner: src,
        unknown: Cell::new(None),
    };
    let p = prefix(&w, vocab, depth);
    (p, w.unknown.get())
}

fn verdict_json(v: &MembershipVerdict, vocab: &Vocabulary) -> Value {
    match v {
        MembershipVerdict::VerifiedToHeight(h) => {
            json!({ "kind": "VerifiedToHeight", "height": h })
        }
        MembershipVerdict::Derived(d) => json!({ "kind": "Derived", "steps": d.size() }),
        MembershipVerdict::Refuted {
            height,
            explanation,
        } => json!({
            "kind": "Refuted",
            "height": height,
            "witness_address": explanation.address().map(|a| a.steps().to_vec()),
            "explanation": explanation.display(vocab).to_string(),
        }),
        MembershipVerdict::Unknown(r) => json!({ "kind": "Unknown", "reason": r.to_string() }),
    }
}

fn check_params(fuel: usize, height: usize) -> CheckParams {
    CheckParams {
        fuel: fuel.max(1),
        height,
        eval: eval_config(fuel),
        ..CheckParams::default()
    }
}

fn run(command: Command) -> Run {
    match command {
        Command::Check { file } => {
            let session = load(&file)?;
            let mut r = Report::new("check", &file);
            let mut systems = Vec::new();
            for sys in session.systems() {
                r.lines
                    .push(format!("system {}: {}", sys.name(), sys.rank()));
                for w in sys.warnings() {
                    r.lines.push(format!("  warning: {w}"));
                }
                systems.push(json!({
                    "name": sys.name(),
                    "rank": sys.rank().to_string(),
                    "warnings": sys.warnings(),
                }));
            }
            let mut programs = Vec::new();
            for (name, p) in session.programs() {
                r.lines.push(format!(
                    "program {name}: {} equations",
                    p.user_equations().len()
                ));
                programs.push(json!({ "name": name, "equations": p.user_equations().len() }));
            }
            r.lines
                .insert(0, format!("ok: constructors {}", session.vocab()));
            r.result = json!({ "constructors": session.vocab().to_string(), "systems": systems, "programs": programs });
            Ok(r.finish(Outcome::Positive))
        }
        Command::Rank { file, system: name } => {
            let session = load(&file)?;
            let sys = system(&session, &name)?;
            let (rank, per_type) = classify_rank(sys);
            let mut r = Report::new("rank", &file).arg("system", &name);
            r.lines.push(rank.to_string());
            let mut types = BTreeMap::new();
            for (t, tr) in per_type {
                r.lines.push(format!("  {}: {tr}", sys.type_name(t)));
                types.insert(sys.type_name(t).to_string(), tr.to_string());
            }
            r.result = json!({ "rank": rank.to_string(), "types": types });
            Ok(r.finish(Outcome::Positive))
        }
        Command::Eval {
            file,
            program: pname,
            term,
            depth,
            budget,
        } => {
            let session = load(&file)?;
            let prog = program(&session, &pname)?;
            let src = term_source(&session, prog, &term, budget.fuel)?;
            let (p, unknown) = watched_prefix(src, session.vocab(), depth);
            let shown = p.display(session.vocab()).to_string();
            let mut r = Report::new("eval", &file)
                .arg("program", &pname)
                .arg("term", &term)
                .budget("depth", depth)
                .budget("fuel", budget.fuel);
            r.lines.push(shown.clone());
            if let Some(reason) = unknown {
                r.lines
                    .push(format!("unknown below some address ({reason})"));
            }
            r.result = json!({ "prefix": shown, "unknown": unknown.map(|u| u.to_string()) });
            Ok(r.finish(if unknown.is_some() {
                Outcome::Unknown
            } else {
                Outcome::Positive
            }))
        }
        Command::Type {
            file,
            system: sname,
            ty,
            term,
            height,
            budget,
        } => {
            let session = load(&file)?;
            let sys = system(&session, &sname)?;
            let t = type_id(sys, &ty)?;
            let src = term_source(&session, session.union(), &term, budget.fuel)?;
            let v = check_type(sys, t, &src, &check_params(budget.fuel, height));
            let mut r = Report::new("type", &file)
                .arg("system", &sname)
                .arg("type", &ty)
                .arg("term", &term)
                .budget("height", height)
                .budget("fuel", budget.fuel);
            r.lines.push(v.display(session.vocab()).to_string());
            r.result = verdict_json(&v, session.vocab());
            Ok(r.finish(Outcome::of(&v)))
        }
        Command::Eq {
            file,
            system: sname,
            ty,
            left,
            right,
            depth,
            budget,
        } => {
            let session = load(&file)?;
            let sys = system(&session, &sname)?;
            let t = type_id(sys, &ty)?;
            let a = term_source(&session, session.union(), &left, budget.fuel)?;
            let b = term_source(&session, session.union(), &right, budget.fuel)?;
            let v = typed_eq(sys, t, &a, &b, &check_params(budget.fuel, depth));
            let vocab = eq_program(session.vocab()).vocab().clone();
            let mut r = Report::new("eq", &file)
                .arg("system", &sname)
                .arg("type", &ty)
                .arg("left", &left)
                .arg("right", &right)
                .budget("depth", depth)
                .budget("fuel", budget.fuel);
            r.lines.push(v.display(&vocab).to_string());
            r.result = verdict_json(&v, &vocab);
            Ok(r.finish(Outcome::of(&v)))
        }
        Command::Claim {
            file,
            program: pname,
            function,
            from,
            to,
            samples,
            system: sname,
            height,
            budget,
        } => {
            let session = load(&file)?;
            let prog = program(&session, &pname)?;
            let f = prog
                .function(&function)
                .ok_or_else(|| {
                    InputError(format!("program `{pname}` has no function `{function}`"))
                })?
                .clone();
            let sys = match &sname {
                Some(n) => system(&session, n)?,
                None => {
                    let fits: Vec<&ValidatedSystem> = session
                        .systems()
                        .iter()
                        .filter(|s| s.lookup_type(&from).is_some() && s.lookup_type(&to).is_some())
                        .collect();
                    match fits.as_slice() {
                        [one] => *one,
                        [] => {
                            return Err(InputError(format!(
                                "no system has both `{from}` and `{to}`"
                            )))
                        }
                        _ => return Err(InputError("several systems fit; pass --system".into())),
                    }
                }
            };
            let d = type_id(sys, &from)?;
            let e = type_id(sys, &to)?;
            let text = fs::read_to_string(&samples)
                .map_err(|err| InputError(format!("{}: {err}", samples.display())))?;
            let terms = session
                .parse_terms(&text, session.union())
                .map_err(|err| InputError(format!("{}:{err}", samples.display())))?;
            let sources: Vec<SourceRef> = terms
                .iter()
                .map(|t| {
                    as_source(
                        session.union().clone(),
                        Valuation::new(),
                        t.clone(),
                        eval_config(budget.fuel),
                    )
                })
                .collect();
            let params = check_params(budget.fuel, height);
            let reports = match check_program_type(sys, prog, &f, d, e, &sources, &params) {
                Ok(reports) => reports,
                Err(TypeCheckError::SampleNotOfClaimedInputType { index, verdict }) => {
                    return Err(InputError(format!(
                        "sample {} ({}) is not of type {from}: {}",
                        index + 1,
                        terms[index].display(session.vocab()),
                        verdict.display(session.vocab())
                    )))
                }
                Err(other) => return Err(other.into()),
            };
            let mut r = Report::new("claim", &file)
                .arg("program", &pname)
                .arg("fn", &function)
                .arg("from", &from)
                .arg("to", &to)
                .arg("system", sys.name())
                .arg("samples", samples.display())
                .budget("height", height)
                .budget("fuel", budget.fuel);
            let mut rows = Vec::new();
            for (t, rep) in terms.iter().zip(&reports) {
                let shown = t.display(session.vocab()).to_string();
                r.lines
                    .push(format!("{shown}: {}", rep.output.display(session.vocab())));
                rows.push(json!({
                    "sample": shown,
                    "input": verdict_json(&rep.input, session.vocab()),
                    "output": verdict_json(&rep.output, session.vocab()),
                }));
            }
            let outcomes: Vec<Outcome> =
                reports.iter().map(|rep| Outcome::of(&rep.output)).collect();
            let overall = if outcomes.contains(&Outcome::Refuted) {
                Outcome::Refuted
            } else if outcomes.contains(&Outcome::Unknown) {
                Outcome::Unknown
            } else {
                Outcome::Positive
            };
            let positive = outcomes.iter().filter(|o| **o == Outcome::Positive).count();
            r.lines
                .push(format!("{positive}/{} samples positive", outcomes.len()));
            r.result = json!({ "samples": rows });
            Ok(r.finish(overall))
        }
        Command::Repr {
            file,
            term,
            depth,
            dump: dump_path,
            budget,
        } => {
            let session = load(&file)?;
            let src = term_source(&session, session.union(), &term, budget.fuel)?;
            let table = ConstructorCodeTable::new(session.vocab());
            let watch = Rc::new(Watch {
                inner: src,
                unknown: Cell::new(None),
            });
            let g = term_to_funcrepr(watch.clone(), &table);
            let p = funcrepr_to_prefix(&g, &table, depth)?;
            let lines = dump(&g, &table, depth)?;
            if let Some(path) = &dump_path {
                fs::write(path, &lines)
                    .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
            }
            let shown = p.display(session.vocab()).to_string();
            let points = lines.lines().count();
            let codes: BTreeMap<String, u64> = session
                .vocab()
                .iter()
                .map(|(c, k)| (k.name.clone(), table.code(c)))
                .collect();
            let unknown = watch.unknown.get();
            let mut r = Report::new("repr", &file)
                .arg("term", &term)
                .budget("depth", depth)
                .budget("fuel", budget.fuel);
            if let Some(path) = &dump_path {
                r = r.arg("dump", path.display());
            }
            r.lines.push(shown.clone());
            r.lines.push(format!("{points} defined points"));
            r.result = json!({ "prefix": shown, "points": points, "codes": codes, "unknown": unknown.map(|u| u.to_string()) });
            Ok(r.finish(if unknown.is_some() {
                Outcome::Unknown
            } else {
                Outcome::Positive
            }))
        }
    }
}

fn command_name(c: &Command) -> (&'static str, PathBuf) {
    match c {
        Command::Check { file } => ("check", file.clone()),
        Command::Rank { file, .. } => ("rank", file.clone()),
        Command::Eval { file, .. } => ("eval", file.clone()),
        Command::Type { file, .. } => ("type", file.clone()),
        Command::Eq { file, .. } => ("eq", file.clone()),
        Command::Claim { file, .. } => ("claim", file.clone()),
        Command::Repr { file, .. } => ("repr", file.clone()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, file) = command_name(&cli.command);
    let report = match run(cli.command) {
        Ok(r) => r,
        Err(InputError(msg)) => {
            let mut r = Report::new(name, &file).finish(Outcome::InputError);
            r.lines.push(format!("error: {msg}"));
            r.result = json!({ "error": msg });
            if !cli.json {
                eprintln!("error: {msg}");
                return ExitCode::from(r.exit_code);
            }
            r
        }
    };
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        for line in &report.lines {
            println!("{line}");
        }
    }
    ExitCode::from(report.exit_code)
}

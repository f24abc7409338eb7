//! Session files: a constructor vocabulary, data-systems and programs.
//!
//! ```text
//! constructors { e/0, 0/1, 1/1 }
//!
//! system Words {
//!   inductive bundle {
//!     type Z, E;
//!     Z(e);
//!     Z(0(y)) <- Z(y);
//!     E(1(y)) <- Z(y);
//!     Z(0(y)) <- E(y);
//!   }
//! }
//!
//! system Omega {
//!   coinductive bundle {
//!     type W;
//!     W(x) -> 0(y) with W(y) | 1(y) with W(y);
//!   }
//! }
//!
//! program Alt {
//!   alt = 0(1(alt));
//! }
//! ```
//!
//! Comments run from `#` or `//` to the end of the line. Identifiers are
//! runs of letters, digits, `_` and `'`, so `0` and `1` are ordinary names.
//! In patterns a bare identifier is a constructor when declared and a
//! variable otherwise; on a right-hand side it is a bound variable, then a
//! constructor, then a function.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::datasystem::{
    validate, BundleDef, DataSystem, Polarity, RuleDef, StatementDef, SystemError, ValidatedSystem,
};
use crate::program::{Program, ProgramEquation, ProgramError};
use crate::term::{FunctionId, Term};
use crate::vocab::{VocabError, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{0}")]
    Name(String),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct SessionError {
    pub pos: Pos,
    pub kind: SessionErrorKind,
}

fn at(pos: Pos, kind: impl Into<SessionErrorKind>) -> SessionError {
    SessionError {
        pos,
        kind: kind.into(),
    }
}

fn syntax(pos: Pos, msg: impl Into<String>) -> SessionError {
    at(pos, SessionErrorKind::Syntax(msg.into()))
}

fn name_error(pos: Pos, msg: impl Into<String>) -> SessionError {
    at(pos, SessionErrorKind::Name(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, SessionError> {
    let mut out = Vec::new();
    for (l, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let pos = Pos {
                line: l + 1,
                col: i + 1,
            };
            let c = chars[i];
            let next = chars.get(i + 1).copied();
            if c.is_whitespace() {
                i += 1;
            } else if c == '#' || (c == '/' && next == Some('/')) {
                break;
            } else if is_ident_char(c) {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            } else {
                let two: &'static str = match (c, next) {
                    ('<', Some('-')) => "<-",
                    ('-', Some('>')) => "->",
                    _ => "",
                };
                if !two.is_empty() {
                    out.push((Tok::Sym(two), pos));
                    i += 2;
                    continue;
                }
                let one = match c {
                    '{' => "{",
                    '}' => "}",
                    '(' => "(",
                    ')' => ")",
                    ',' => ",",
                    ';' => ";",
                    '/' => "/",
                    '=' => "=",
                    '|' => "|",
                    '&' => "&",
                    _ => return Err(syntax(pos, format!("unexpected character `{c}`"))),
                };
                out.push((Tok::Sym(one), pos));
                i += 1;
            }
        }
    }
    let end = Pos {
        line: text.lines().count().max(1),
        col: text.lines().last().map_or(1, |l| l.chars().count() + 1),
    };
    out.push((Tok::Eof, end));
    Ok(out)
}

/// A declared constructor: name, arity, and where it was declared.
type CtorDecl = (String, usize, Pos);

/// `name` or `name(arg, …)`, before names are resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
struct RawTerm {
    name: String,
    args: Vec<RawTerm>,
    pos: Pos,
}

#[derive(Debug, Clone)]
struct Premise {
    ty: String,
    var: String,
    pos: Pos,
}

#[derive(Debug, Clone)]
enum RawRule {
    Construction {
        target: String,
        pattern: RawTerm,
        premises: Vec<Premise>,
        pos: Pos,
    },
    Deconstruction {
        source: String,
        var: String,
        disjuncts: Vec<(RawTerm, Vec<Premise>)>,
        pos: Pos,
    },
}

#[derive(Debug, Clone)]
struct RawBundle {
    polarity: Polarity,
    types: Vec<(String, Pos)>,
    rules: Vec<RawRule>,
}

#[derive(Debug, Clone)]
struct RawSystem {
    name: String,
    pos: Pos,
    bundles: Vec<RawBundle>,
}

#[derive(Debug, Clone)]
struct RawEquation {
    function: String,
    patterns: Vec<RawTerm>,
    rhs: RawTerm,
    pos: Pos,
}

#[derive(Debug, Clone)]
struct RawProgram {
    name: String,
    pos: Pos,
    equations: Vec<RawEquation>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn is(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat(&mut self, sym: &str) -> bool {
        if self.is(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<Pos, SessionError> {
        if self.is(sym) {
            Ok(self.bump().1)
        } else {
            Err(syntax(
                self.pos(),
                format!("expected `{sym}`, found {}", self.peek()),
            ))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<Pos, SessionError> {
        if self.is_word(w) {
            Ok(self.bump().1)
        } else {
            Err(syntax(
                self.pos(),
                format!("expected `{w}`, found {}", self.peek()),
            ))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), SessionError> {
        match self.bump() {
            (Tok::Ident(s), p) => Ok((s, p)),
            (t, p) => Err(syntax(p, format!("expected a name, found {t}"))),
        }
    }

    fn term(&mut self) -> Result<RawTerm, SessionError> {
        let (name, pos) = self.ident()?;
        let mut args = Vec::new();
        if self.eat("(") {
            loop {
                args.push(self.term()?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(")")?;
        }
        Ok(RawTerm { name, args, pos })
    }

    fn premises(&mut self) -> Result<Vec<Premise>, SessionError> {
        let mut out = Vec::new();
        loop {
            let (ty, pos) = self.ident()?;
            self.expect("(")?;
            let (var, _) = self.ident()?;
            self.expect(")")?;
            out.push(Premise { ty, var, pos });
            if !self.eat("&") {
                return Ok(out);
            }
        }
    }

    fn constructors(&mut self) -> Result<Vec<(String, usize, Pos)>, SessionError> {
        self.expect("{")?;
        let mut decls = Vec::new();
        while !self.is("}") {
            let (name, pos) = self.ident()?;
            self.expect("/")?;
            let (arity, apos) = self.ident()?;
            let arity = arity
                .parse::<usize>()
                .map_err(|_| syntax(apos, format!("arity must be a number, found `{arity}`")))?;
            decls.push((name, arity, pos));
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(decls)
    }

    fn system(&mut self) -> Result<RawSystem, SessionError> {
        let (name, pos) = self.ident()?;
        self.expect("{")?;
        let mut bundles = Vec::new();
        while !self.is("}") {
            let polarity = if self.is_word("inductive") {
                Polarity::Inductive
            } else if self.is_word("coinductive") {
                Polarity::Coinductive
            } else {
                return Err(syntax(
                    self.pos(),
                    format!(
                        "expected `inductive` or `coinductive`, found {}",
                        self.peek()
                    ),
                ));
            };
            self.bump();
            self.expect_word("bundle")?;
            self.expect("{")?;
            let mut types = Vec::new();
            while self.is_word("type") {
                self.bump();
                loop {
                    types.push(self.ident()?);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(";")?;
            }
            if types.is_empty() {
                return Err(syntax(
                    self.pos(),
                    "a bundle starts with `type` declarations",
                ));
            }
            let mut rules = Vec::new();
            while !self.is("}") {
                rules.push(self.rule(polarity)?);
            }
            self.expect("}")?;
            bundles.push(RawBundle {
                polarity,
                types,
                rules,
            });
        }
        self.expect("}")?;
        Ok(RawSystem { name, pos, bundles })
    }

    fn rule(&mut self, polarity: Polarity) -> Result<RawRule, SessionError> {
        let (ty, pos) = self.ident()?;
        self.expect("(")?;
        match polarity {
            Polarity::Inductive => {
                let pattern = self.term()?;
                self.expect(")")?;
                let premises = if self.eat("<-") {
                    self.premises()?
                } else {
                    Vec::new()
                };
                self.expect(";")?;
                Ok(RawRule::Construction {
                    target: ty,
                    pattern,
                    premises,
                    pos,
                })
            }
            Polarity::Coinductive => {
                let (var, _) = self.ident()?;
                self.expect(")")?;
                self.expect("->")?;
                let mut disjuncts = Vec::new();
                if !self.is(";") {
                    loop {
                        let t = self.term()?;
                        let premises = if self.is_word("with") {
                            self.bump();
                            self.premises()?
                        } else {
                            Vec::new()
                        };
                        disjuncts.push((t, premises));
                        if !self.eat("|") {
                            break;
                        }
                    }
                }
                self.expect(";")?;
                Ok(RawRule::Deconstruction {
                    source: ty,
                    var,
                    disjuncts,
                    pos,
                })
            }
        }
    }

    fn program(&mut self) -> Result<RawProgram, SessionError> {
        let (name, pos) = self.ident()?;
        self.expect("{")?;
        let mut equations = Vec::new();
        while !self.is("}") {
            let (function, epos) = self.ident()?;
            let mut patterns = Vec::new();
            if self.eat("(") {
                loop {
                    patterns.push(self.term()?);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(")")?;
            }
            self.expect("=")?;
            let rhs = self.term()?;
            self.expect(";")?;
            equations.push(RawEquation {
                function,
                patterns,
                rhs,
                pos: epos,
            });
        }
        self.expect("}")?;
        Ok(RawProgram {
            name,
            pos,
            equations,
        })
    }
}

/// A parsed and validated session file.
#[derive(Debug, Clone)]
pub struct Session {
    vocab: Arc<Vocabulary>,
    systems: Vec<ValidatedSystem>,
    programs: Vec<(String, Arc<Program>)>,
    union: Arc<Program>,
}

pub fn parse_session(text: &str) -> Result<Session, SessionError> {
    let mut p = Parser {
        toks: lex(text)?,
        i: 0,
    };
    let mut ctors: Option<(Vec<CtorDecl>, Pos)> = None;
    let mut systems = Vec::new();
    let mut programs = Vec::new();
    while *p.peek() != Tok::Eof {
        let (kw, pos) = p.ident()?;
        match kw.as_str() {
            "constructors" => {
                if ctors.is_some() {
                    return Err(syntax(pos, "only one `constructors` block is allowed"));
                }
                ctors = Some((p.constructors()?, pos));
            }
            "system" => systems.push(p.system()?),
            "program" => programs.push(p.program()?),
            other => {
                return Err(syntax(
                    pos,
                    format!("expected `constructors`, `system` or `program`, found `{other}`"),
                ))
            }
        }
    }
    let (decls, cpos) =
        ctors.ok_or_else(|| syntax(Pos { line: 1, col: 1 }, "missing `constructors` block"))?;
    let vocab = Vocabulary::new(decls.iter().map(|(n, a, _)| (n.as_str(), *a))).map_err(|e| {
        let pos = match &e {
            VocabError::Duplicate(n) => decls
                .iter()
                .filter(|(m, _, _)| m == n)
                .nth(1)
                .map_or(cpos, |d| d.2),
            _ => cpos,
        };
        at(pos, e)
    })?;
    let vocab = Arc::new(vocab);

    let mut seen_systems = HashSet::new();
    let mut validated = Vec::new();
    for sys in &systems {
        if !seen_systems.insert(sys.name.clone()) {
            return Err(name_error(
                sys.pos,
                format!("system `{}` is defined twice", sys.name),
            ));
        }
        validated.push(resolve_system(sys, &vocab)?);
    }

    let built = resolve_programs(&programs, &vocab)?;
    let all: Vec<ProgramEquation> = built
        .iter()
        .flat_map(|(_, p)| p.user_equations().to_vec())
        .collect();
    let union =
        Program::new(vocab.clone(), all, None).map_err(|e| at(Pos { line: 1, col: 1 }, e))?;

    Ok(Session {
        vocab,
        systems: validated,
        programs: built,
        union: Arc::new(union),
    })
}

fn resolve_system(sys: &RawSystem, vocab: &Vocabulary) -> Result<ValidatedSystem, SessionError> {
    let mut bundles = Vec::new();
    for b in &sys.bundles {
        let mut rules = Vec::new();
        for r in &b.rules {
            rules.push(resolve_rule(r, vocab)?);
        }
        bundles.push(BundleDef {
            polarity: b.polarity,
            types: b.types.iter().map(|(n, _)| n.clone()).collect(),
            rules,
        });
    }
    let ds = DataSystem {
        name: sys.name.clone(),
        vocabulary: Arc::new(vocab.clone()),
        bundles,
    };
    validate(&ds).map_err(|e| at(system_error_pos(sys, &e), e))
}

/// Points at the rule or declaration an error is about, when it names one.
fn system_error_pos(sys: &RawSystem, e: &SystemError) -> Pos {
    let name = match e {
        SystemError::DuplicateTypeName(n) => {
            return sys
                .bundles
                .iter()
                .flat_map(|b| &b.types)
                .filter(|(m, _)| m == n)
                .nth(1)
                .map_or(sys.pos, |t| t.1)
        }
        SystemError::CoinductiveRuleMissing(n) => {
            return sys
                .bundles
                .iter()
                .flat_map(|b| &b.types)
                .find(|(m, _)| m == n)
                .map_or(sys.pos, |t| t.1)
        }
        SystemError::UnknownType(n)
        | SystemError::UnknownConstructor(n)
        | SystemError::StratificationViolation { referenced: n, .. }
        | SystemError::TypeRefNotEarlier { referenced: n, .. }
        | SystemError::ForeignRule { target: n, .. }
        | SystemError::DuplicateDeconstruction(n)
        | SystemError::ArityMismatch { ctor: n, .. } => n,
        _ => return sys.pos,
    };
    let mentions = |r: &RawRule| -> Option<Pos> {
        match r {
            RawRule::Construction {
                target,
                pattern,
                premises,
                pos,
            } => {
                (target == name || pattern.name == *name || premises.iter().any(|p| p.ty == *name))
                    .then_some(*pos)
            }
            RawRule::Deconstruction {
                source,
                disjuncts,
                pos,
                ..
            } => (source == name
                || disjuncts
                    .iter()
                    .any(|(t, ps)| t.name == *name || ps.iter().any(|p| p.ty == *name)))
            .then_some(*pos),
        }
    };
    let rules: Vec<&RawRule> = sys.bundles.iter().flat_map(|b| &b.rules).collect();
    if let SystemError::DuplicateDeconstruction(_) = e {
        return rules
            .iter()
            .filter_map(|r| mentions(r))
            .nth(1)
            .unwrap_or(sys.pos);
    }
    rules.iter().find_map(|r| mentions(r)).unwrap_or(sys.pos)
}

/// Component types of `c(v1..vr)` from premises naming each variable once.
fn components(
    args: &[RawTerm],
    premises: &[Premise],
    vocab: &Vocabulary,
) -> Result<Vec<String>, SessionError> {
    let mut by_var: HashMap<&str, &Premise> = HashMap::new();
    for p in premises {
        if by_var.insert(&p.var, p).is_some() {
            return Err(name_error(
                p.pos,
                format!("variable `{}` is typed twice", p.var),
            ));
        }
    }
    let mut used = HashSet::new();
    let mut out = Vec::new();
    for a in args {
        if !a.args.is_empty() || vocab.lookup(&a.name).is_some() {
            return Err(name_error(
                a.pos,
                "components of a constructor-statement must be distinct variables",
            ));
        }
        if !used.insert(a.name.as_str()) {
            return Err(name_error(a.pos, format!("variable `{}` repeats", a.name)));
        }
        let p = by_var
            .get(a.name.as_str())
            .ok_or_else(|| name_error(a.pos, format!("variable `{}` has no type", a.name)))?;
        out.push(p.ty.clone());
    }
    if let Some(p) = premises.iter().find(|p| !used.contains(p.var.as_str())) {
        return Err(name_error(
            p.pos,
            format!("variable `{}` does not occur in the statement", p.var),
        ));
    }
    Ok(out)
}

fn statement(
    t: &RawTerm,
    premises: &[Premise],
    vocab: &Vocabulary,
) -> Result<StatementDef, SessionError> {
    Ok(StatementDef::Constructor {
        ctor: t.name.clone(),
        components: components(&t.args, premises, vocab)?,
    })
}

fn resolve_rule(r: &RawRule, vocab: &Vocabulary) -> Result<RuleDef, SessionError> {
    match r {
        RawRule::Construction {
            target,
            pattern,
            premises,
            ..
        } => {
            let is_var = pattern.args.is_empty() && vocab.lookup(&pattern.name).is_none();
            let body = if is_var {
                match premises.as_slice() {
                    [p] if p.var == pattern.name => StatementDef::TypeRef(p.ty.clone()),
                    _ => {
                        return Err(name_error(
                            pattern.pos,
                            format!(
                            "`{}` is not a constructor; a type reference needs one premise on it",
                            pattern.name
                        ),
                        ))
                    }
                }
            } else {
                statement(pattern, premises, vocab)?
            };
            Ok(RuleDef::Construction {
                target: target.clone(),
                body,
            })
        }
        RawRule::Deconstruction {
            source,
            var,
            disjuncts,
            ..
        } => {
            let mut out = Vec::new();
            for (t, premises) in disjuncts {
                let type_ref = premises.is_empty()
                    && vocab.lookup(&t.name).is_none()
                    && matches!(t.args.as_slice(), [a] if a.args.is_empty() && a.name == *var);
                if type_ref {
                    out.push(StatementDef::TypeRef(t.name.clone()));
                } else {
                    out.push(statement(t, premises, vocab)?);
                }
            }
            Ok(RuleDef::Deconstruction {
                source: source.clone(),
                disjuncts: out,
            })
        }
    }
}

fn pattern(t: &RawTerm, vocab: &Vocabulary) -> Result<Term, SessionError> {
    match vocab.lookup(&t.name) {
        Some(c) => Ok(Term::ctor(
            c,
            t.args
                .iter()
                .map(|a| pattern(a, vocab))
                .collect::<Result<_, _>>()?,
        )),
        None if t.args.is_empty() => Ok(Term::var(&t.name)),
        None => Err(name_error(
            t.pos,
            format!(
                "`{}` is not a constructor; patterns are built from constructors",
                t.name
            ),
        )),
    }
}

fn rhs(t: &RawTerm, vocab: &Vocabulary, bound: &BTreeSet<String>) -> Result<Term, SessionError> {
    if t.args.is_empty() && bound.contains(&t.name) {
        return Ok(Term::var(&t.name));
    }
    let args = t
        .args
        .iter()
        .map(|a| rhs(a, vocab, bound))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match vocab.lookup(&t.name) {
        Some(c) => Term::ctor(c, args),
        None => Term::app(&FunctionId::new(&t.name, args.len()), args),
    })
}

fn pattern_vars(t: &Term, out: &mut BTreeSet<String>) {
    for v in t.variable_occurrences() {
        out.insert(v.to_string());
    }
}

fn resolve_programs(
    programs: &[RawProgram],
    vocab: &Arc<Vocabulary>,
) -> Result<Vec<(String, Arc<Program>)>, SessionError> {
    // Every block's equations, with a source position for each.
    let mut blocks: Vec<Vec<(ProgramEquation, Pos)>> = Vec::new();
    let mut owner: HashMap<String, usize> = HashMap::new();
    let mut names = HashSet::new();
    for (b, prog) in programs.iter().enumerate() {
        if !names.insert(prog.name.clone()) {
            return Err(name_error(
                prog.pos,
                format!("program `{}` is defined twice", prog.name),
            ));
        }
        if prog.equations.is_empty() {
            return Err(name_error(
                prog.pos,
                format!("program `{}` has no equations", prog.name),
            ));
        }
        let mut eqs = Vec::new();
        for e in &prog.equations {
            if let Some(&other) = owner.get(&e.function) {
                if other != b {
                    return Err(name_error(
                        e.pos,
                        format!(
                            "function `{}` is already defined in program `{}`",
                            e.function, programs[other].name
                        ),
                    ));
                }
            }
            owner.insert(e.function.clone(), b);
            let pats = e
                .patterns
                .iter()
                .map(|p| pattern(p, vocab))
                .collect::<Result<Vec<_>, _>>()?;
            let mut bound = BTreeSet::new();
            for p in &pats {
                pattern_vars(p, &mut bound);
            }
            let body = rhs(&e.rhs, vocab, &bound)?;
            let eq = ProgramEquation::new(FunctionId::new(&e.function, pats.len()), pats, body);
            if !eqs.iter().any(|(q, _): &(ProgramEquation, Pos)| *q == eq) {
                eqs.push((eq, e.pos));
            }
        }
        blocks.push(eqs);
    }

    let mut built = Vec::new();
    for (b, prog) in programs.iter().enumerate() {
        // Blocks reachable through function calls, this one first.
        let mut order = vec![b];
        let mut queue = VecDeque::from([b]);
        while let Some(cur) = queue.pop_front() {
            for (eq, _) in &blocks[cur] {
                for f in eq.rhs.functions() {
                    if let Some(&dep) = owner.get(&*f.name) {
                        if !order.contains(&dep) {
                            order.push(dep);
                            queue.push_back(dep);
                        }
                    }
                }
            }
        }
        let located: Vec<(ProgramEquation, Pos)> = order
            .iter()
            .flat_map(|&k| blocks[k].iter().cloned())
            .collect();
        let eqs: Vec<ProgramEquation> = located.iter().map(|(e, _)| e.clone()).collect();
        let principal = eqs[0].function.name.to_string();
        let program = Program::new(vocab.clone(), eqs, Some(&principal))
            .map_err(|e| at(program_error_pos(&located, prog.pos, &e), e))?;
        built.push((prog.name.clone(), Arc::new(program)));
    }
    Ok(built)
}

fn program_error_pos(located: &[(ProgramEquation, Pos)], fallback: Pos, e: &ProgramError) -> Pos {
    let by_index = |i: usize| located.get(i).map_or(fallback, |l| l.1);
    let by_name = |name: &str| {
        located
            .iter()
            .find(|(eq, _)| &*eq.function.name == name)
            .or_else(|| {
                located
                    .iter()
                    .find(|(eq, _)| eq.rhs.functions().iter().any(|f| &*f.name == name))
            })
            .map_or(fallback, |l| l.1)
    };
    match e {
        ProgramError::NonLinearPattern { equation, .. }
        | ProgramError::UnboundRhsVariable { equation, .. }
        | ProgramError::PatternNotBase { equation, .. }
        | ProgramError::ArityMismatch { equation, .. } => by_index(*equation),
        ProgramError::IncompatiblePair { second, .. } => by_index(*second),
        ProgramError::FunctionArityConflict { function, .. } => {
            // The first use whose arity differs from the first occurrence.
            let mut first = None;
            for (eq, pos) in located {
                let mut fs = vec![eq.function.clone()];
                fs.extend(eq.rhs.functions());
                for f in fs.iter().filter(|f| &*f.name == function.as_str()) {
                    match first {
                        None => first = Some(f.arity),
                        Some(a) if a != f.arity => return *pos,
                        _ => {}
                    }
                }
            }
            fallback
        }
        ProgramError::UndefinedFunction(n)
        | ProgramError::FunctionNamedLikeConstructor(n)
        | ProgramError::ReservedName(n)
        | ProgramError::PrincipalMissing(n) => by_name(n),
        ProgramError::VocabularyMismatch => fallback,
    }
}

impl Session {
    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn systems(&self) -> &[ValidatedSystem] {
        &self.systems
    }

    pub fn system(&self, name: &str) -> Option<&ValidatedSystem> {
        self.systems.iter().find(|s| s.name() == name)
    }

    pub fn programs(&self) -> impl Iterator<Item = (&str, &Arc<Program>)> {
        self.programs.iter().map(|(n, p)| (n.as_str(), p))
    }

    pub fn program(&self, name: &str) -> Option<&Arc<Program>> {
        self.programs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
    }

    /// All programs of the session as one program.
    pub fn union(&self) -> &Arc<Program> {
        &self.union
    }

    /// A closed term over the vocabulary and the functions of `program`.
    pub fn parse_term(&self, text: &str, program: &Program) -> Result<Term, SessionError> {
        let mut p = Parser {
            toks: lex(text)?,
            i: 0,
        };
        let raw = p.term()?;
        if *p.peek() != Tok::Eof {
            return Err(syntax(
                p.pos(),
                format!("unexpected {} after the term", p.peek()),
            ));
        }
        closed_term(&raw, &self.vocab, program)
    }

    /// One closed term per non-empty line; `#` and `//` start comments.
    pub fn parse_terms(&self, text: &str, program: &Program) -> Result<Vec<Term>, SessionError> {
        let toks = lex(text)?;
        let mut out = Vec::new();
        let mut line_start = 0;
        while line_start < toks.len() && toks[line_start].0 != Tok::Eof {
            let line = toks[line_start].1.line;
            let mut end = line_start;
            while toks[end].0 != Tok::Eof && toks[end].1.line == line {
                end += 1;
            }
            let mut slice: Vec<(Tok, Pos)> = toks[line_start..end].to_vec();
            slice.push((Tok::Eof, toks[end - 1].1));
            let mut p = Parser { toks: slice, i: 0 };
            let raw = p.term()?;
            if *p.peek() != Tok::Eof {
                return Err(syntax(
                    p.pos(),
                    format!("unexpected {} after the term", p.peek()),
                ));
            }
            out.push(closed_term(&raw, &self.vocab, program)?);
            line_start = end;
        }
        Ok(out)
    }
}

fn closed_term(t: &RawTerm, vocab: &Vocabulary, program: &Program) -> Result<Term, SessionError> {
    let args = t
        .args
        .iter()
        .map(|a| closed_term(a, vocab, program))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(c) = vocab.lookup(&t.name) {
        if vocab.arity(c) != args.len() {
            return Err(name_error(
                t.pos,
                format!(
                    "constructor `{}` takes {} arguments",
                    t.name,
                    vocab.arity(c)
                ),
            ));
        }
        return Ok(Term::ctor(c, args));
    }
    match program.function(&t.name) {
        Some(f) if f.arity == args.len() => Ok(Term::app(f, args)),
        Some(f) => Err(name_error(
            t.pos,
            format!("function `{}` takes {} arguments", t.name, f.arity),
        )),
        None => Err(name_error(
            t.pos,
            format!("`{}` is neither a constructor nor a function", t.name),
        )),
    }
}

/// `constructors { … }` for a vocabulary.
pub fn vocabulary_to_dsl(vocab: &Vocabulary) -> String {
    let decls: Vec<String> = vocab
        .iter()
        .map(|(_, c)| format!("{}/{}", c.name, c.arity))
        .collect();
    format!("constructors {{ {} }}\n", decls.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORDS: &str = "
        constructors { e/0, 0/1, 1/1 }   # words
        system ZE {
          inductive bundle {
            type Z, E;
            Z(e);
            Z(0(y)) <- Z(y);
            E(1(y)) <- Z(y);
            Z(0(y)) <- E(y);
          }
        }
        // ω-words
        system Omega {
          coinductive bundle {
            type W;
            W(x) -> 0(y) with W(y) | 1(y) with W(y);
          }
        }
        program Alt { alt = 0(1(alt)); }
        program Tl { tl(0(y)) = y; tl(1(y)) = y; }
        program Uses { back = tl(alt); }
    ";

    #[test]
    fn parses_systems_and_programs() {
        let s = parse_session(WORDS).unwrap();
        assert_eq!(s.vocab().len(), 3);
        let ze = s.system("ZE").unwrap();
        assert_eq!(ze.disjuncts(ze.lookup_type("Z").unwrap()).len(), 3);
        let omega = s.system("Omega").unwrap();
        assert_eq!(omega.rank().to_string(), "Pi 1");
        let uses = s.program("Uses").unwrap();
        assert!(uses.function("tl").is_some() && uses.function("alt").is_some());
        assert_eq!(uses.principal().name.as_ref(), "back");
        let t = s.parse_term("0(tl(alt))", s.union()).unwrap();
        assert!(!t.is_data_term());
        assert!(s.parse_term("tl(alt", s.union()).is_err());
        assert!(s.parse_term("nope", s.union()).is_err());
        let ts = s
            .parse_terms("alt\n# comment\n1(alt) // trailing\n\n", s.union())
            .unwrap();
        assert_eq!(ts.len(), 2);
    }

    #[test]
    fn syntax_errors_have_positions() {
        let err = parse_session("constructors { e/0 }\nprogram P {\n  f(x) = ;\n}").unwrap_err();
        assert_eq!(err.pos, Pos { line: 3, col: 10 });
        assert!(matches!(err.kind, SessionErrorKind::Syntax(_)));
        let err = parse_session("constructors { e/x }").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 18 });
        let err = parse_session("constructors { e/0 } $").unwrap_err();
        assert_eq!(err.pos.col, 22);
    }

    #[test]
    fn program_errors_point_at_equations() {
        let err =
            parse_session("constructors { e/0, s/1 }\nprogram P {\n  f(e) = e;\n  g(x, x) = x;\n}")
                .unwrap_err();
        assert_eq!(err.pos, Pos { line: 4, col: 3 });
        assert!(matches!(
            err.kind,
            SessionErrorKind::Program(ProgramError::NonLinearPattern { .. })
        ));
        let err =
            parse_session("constructors { e/0, s/1 }\nprogram P {\n  f(e) = e;\n  f(x) = x;\n}")
                .unwrap_err();
        assert_eq!(err.pos.line, 4);
        let err = parse_session("constructors { e/0 }\nprogram P { f = g; }").unwrap_err();
        assert!(matches!(
            err.kind,
            SessionErrorKind::Program(ProgramError::UndefinedFunction(_))
        ));
        let err = parse_session("constructors { e/0 }\nprogram P { f = e; }\nprogram Q { f = e; }")
            .unwrap_err();
        assert_eq!(err.pos.line, 3);
    }

    #[test]
    fn system_errors_point_at_rules() {
        let text = "constructors { e/0, s/1 }\nsystem S {\n  inductive bundle {\n    type N;\n    N(e);\n    N(s(y)) <- M(y);\n  }\n}";
        let err = parse_session(text).unwrap_err();
        assert_eq!(err.pos, Pos { line: 6, col: 5 });
        assert_eq!(
            err.kind,
            SessionErrorKind::System(SystemError::UnknownType("M".into()))
        );
        let untyped = "constructors { e/0, s/1 }\nsystem S {\n  inductive bundle {\n    type N;\n    N(s(y));\n  }\n}";
        assert!(matches!(
            parse_session(untyped).unwrap_err().kind,
            SessionErrorKind::Name(_)
        ));
    }

    #[test]
    fn type_references() {
        let text = "
            constructors { 0/0, 1/0, s/1, p/2, d/3 }
            system DT {
              inductive bundle { type N; N(0); N(s(y)) <- N(y); }
              coinductive bundle {
                type T;
                T(x) -> N(x) | p(a, b) with T(a) & T(b) | d(a, b, c) with T(a) & T(b) & T(c);
              }
              coinductive bundle { type D; D(x) -> d(u, a, b) with T(u) & D(a) & D(b); }
            }
            system G {
              inductive bundle { type N; N(0); N(s(y)) <- N(y); }
              inductive bundle { type T; T(x) <- N(x); T(p(a, b)) <- T(a) & T(b); }
            }";
        let s = parse_session(text).unwrap();
        let dt = s.system("DT").unwrap();
        assert_eq!(dt.rank().to_string(), "Pi 2");
        assert_eq!(dt.disjuncts(dt.lookup_type("T").unwrap()).len(), 4);
        let g = s.system("G").unwrap();
        assert_eq!(g.disjuncts(g.lookup_type("T").unwrap()).len(), 3);
    }

    #[test]
    fn serialized_systems_revalidate_identically() {
        let s = parse_session(WORDS).unwrap();
        for sys in s.systems() {
            let text = format!("{}{}", vocabulary_to_dsl(s.vocab()), sys.to_dsl());
            let again = parse_session(&text).unwrap();
            assert_eq!(again.systems()[0], *sys, "{text}");
        }
    }
}

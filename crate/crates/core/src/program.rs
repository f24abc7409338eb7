//! Equational programs.
//!
//! A [`Program`] is a set of left-linear, pairwise-compatible equations
//! `f(t1, …, tk) = q` together with a principal function. Every program also
//! carries the standard equations for the destructors `π_{i,m}` and the
//! discriminator `δ` of its vocabulary, so that observations of hyper-terms
//! are themselves derivable by rewriting.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::term::{Address, DataTerm, FunctionId, Term};
use crate::unify::{rename, unify_all, Substitution};
use crate::vocab::{CtorId, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProgramEquation {
    pub function: FunctionId,
    pub patterns: Vec<Term>,
    pub rhs: Term,
}

impl ProgramEquation {
    pub fn new(function: FunctionId, patterns: Vec<Term>, rhs: Term) -> Self {
        ProgramEquation {
            function,
            patterns,
            rhs,
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        crate::term::Rendered(move |f: &mut fmt::Formatter<'_>| {
            write!(f, "{}", self.function.name)?;
            if !self.patterns.is_empty() {
                write!(f, "(")?;
                for (i, p) in self.patterns.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", p.display(vocab))?;
                }
                write!(f, ")")?;
            }
            write!(f, " = {}", self.rhs.display(vocab))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("equation {equation}: variable `{variable}` repeats in the patterns of `{function}`")]
    NonLinearPattern {
        equation: usize,
        function: String,
        variable: String,
    },
    #[error(
        "equation {equation}: right-hand side variable `{variable}` does not occur on the left"
    )]
    UnboundRhsVariable { equation: usize, variable: String },
    #[error("equations {first} and {second} for `{function}` have unifiable left-hand sides (unifier {unifier})")]
    IncompatiblePair {
        first: usize,
        second: usize,
        function: String,
        unifier: String,
    },
    #[error("equation {equation}: pattern {position} is not a base term")]
    PatternNotBase { equation: usize, position: usize },
    #[error("equation {equation}: wrong number of arguments somewhere in `{function}`")]
    ArityMismatch { equation: usize, function: String },
    #[error("function `{function}` is used with arities {first} and {second}")]
    FunctionArityConflict {
        function: String,
        first: usize,
        second: usize,
    },
    #[error("function `{0}` has no defining equation")]
    UndefinedFunction(String),
    #[error("`{0}` is a constructor name and cannot name a function")]
    FunctionNamedLikeConstructor(String),
    #[error("`{0}` is reserved for the standard destructor/discriminator equations")]
    ReservedName(String),
    #[error("principal function `{0}` is not defined")]
    PrincipalMissing(String),
    #[error("cannot merge programs over different vocabularies")]
    VocabularyMismatch,
}

/// Name of the destructor `π_{i,m}` (1-based `i`).
pub fn destructor_name(i: usize, m: usize) -> String {
    format!("pi_{i}_{m}")
}

pub fn destructor_function(i: usize, m: usize) -> FunctionId {
    FunctionId::new(&destructor_name(i, m), 1)
}

pub const DISCRIMINATOR: &str = "delta";

pub fn discriminator_function(vocab: &Vocabulary) -> FunctionId {
    FunctionId::new(DISCRIMINATOR, 1 + vocab.len())
}

fn is_reserved(name: &str) -> bool {
    if name == DISCRIMINATOR {
        return true;
    }
    let Some(rest) = name.strip_prefix("pi_") else {
        return false;
    };
    let mut parts = rest.split('_');
    matches!(
        (parts.next(), parts.next(), parts.next()),
        (Some(a), Some(b), None) if a.parse::<usize>().is_ok() && b.parse::<usize>().is_ok()
    )
}

fn xs(prefix: &str, n: usize) -> Vec<Term> {
    (1..=n)
        .map(|j| Term::var(&format!("{prefix}{j}")))
        .collect()
}

/// Destructor and discriminator equations for every constructor, with
/// `m = max(1, max arity)` and `k` the number of constructors:
///
/// ```text
/// π_{i,m}(c(x1..xr)) = xi          (i <= r)
/// π_{i,m}(c(x1..xr)) = c(x1..xr)   (r < i <= m)
/// δ(c_i(x1..xr), b1..bk) = bi
/// ```
pub fn standard_equations(vocab: &Vocabulary) -> Vec<ProgramEquation> {
    let m = vocab.destructor_width();
    let k = vocab.len();
    let delta = discriminator_function(vocab);
    let mut out = Vec::with_capacity(k * (m + 1));
    for (id, c) in vocab.iter() {
        let args = xs("x", c.arity);
        let pattern = Term::Ctor(id, args.clone());
        for i in 1..=m {
            let rhs = if i <= c.arity {
                args[i - 1].clone()
            } else {
                pattern.clone()
            };
            out.push(ProgramEquation::new(
                destructor_function(i, m),
                vec![pattern.clone()],
                rhs,
            ));
        }
    }
    for (id, c) in vocab.iter() {
        let mut patterns = vec![Term::Ctor(id, xs("x", c.arity))];
        let branches = xs("b", k);
        let rhs = branches[id.index()].clone();
        patterns.extend(branches);
        out.push(ProgramEquation::new(delta.clone(), patterns, rhs));
    }
    out
}

/// Per-equation and pairwise checks. Errors name equations by their index in
/// `equations`.
pub fn check_wellformed(
    vocab: &Vocabulary,
    equations: &[ProgramEquation],
) -> Result<(), ProgramError> {
    for (idx, eq) in equations.iter().enumerate() {
        let fname = eq.function.name.to_string();
        if eq.patterns.len() != eq.function.arity
            || !eq.patterns.iter().all(|p| p.is_arity_correct(vocab))
            || !eq.rhs.is_arity_correct(vocab)
        {
            return Err(ProgramError::ArityMismatch {
                equation: idx,
                function: fname,
            });
        }
        if let Some(pos) = eq.patterns.iter().position(|p| !p.is_base_term()) {
            return Err(ProgramError::PatternNotBase {
                equation: idx,
                position: pos,
            });
        }
        let mut seen = HashSet::new();
        for p in &eq.patterns {
            for v in p.variable_occurrences() {
                if !seen.insert(v.clone()) {
                    return Err(ProgramError::NonLinearPattern {
                        equation: idx,
                        function: fname,
                        variable: v.to_string(),
                    });
                }
            }
        }
        for v in eq.rhs.variable_occurrences() {
            if !seen.contains(&v) {
                return Err(ProgramError::UnboundRhsVariable {
                    equation: idx,
                    variable: v.to_string(),
                });
            }
        }
    }
    for i in 0..equations.len() {
        for j in i + 1..equations.len() {
            let (a, b) = (&equations[i], &equations[j]);
            if a.function != b.function {
                continue;
            }
            if let Some(u) = lhs_unifier(a, b) {
                return Err(ProgramError::IncompatiblePair {
                    first: i,
                    second: j,
                    function: a.function.name.to_string(),
                    unifier: render_unifier(&u, vocab),
                });
            }
        }
    }
    Ok(())
}

/// Unifier of two left-hand sides after renaming the second apart.
pub fn lhs_unifier(a: &ProgramEquation, b: &ProgramEquation) -> Option<Substitution> {
    let pairs: Vec<(Term, Term)> = a
        .patterns
        .iter()
        .zip(&b.patterns)
        .map(|(p, q)| (p.clone(), rename(q, "'")))
        .collect();
    unify_all(&pairs)
}

fn render_unifier(u: &Substitution, vocab: &Vocabulary) -> String {
    let parts: Vec<String> = u
        .iter()
        .map(|(k, t)| format!("{k} ↦ {}", t.display(vocab)))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

/// A certified program.
#[derive(Debug, Clone)]
pub struct Program {
    vocab: Arc<Vocabulary>,
    principal: FunctionId,
    functions: BTreeMap<Arc<str>, FunctionId>,
    equations: BTreeMap<Arc<str>, Vec<ProgramEquation>>,
    user: Vec<ProgramEquation>,
}

impl Program {
    /// Certifies `user` equations (duplicates collapsed) and adds the
    /// standard equations. The principal defaults to the function of the
    /// first equation.
    pub fn new(
        vocab: Arc<Vocabulary>,
        user: Vec<ProgramEquation>,
        principal: Option<&str>,
    ) -> Result<Program, ProgramError> {
        let mut seen = HashSet::new();
        let user: Vec<ProgramEquation> = user
            .into_iter()
            .filter(|e| seen.insert(e.clone()))
            .collect();

        let mut functions: BTreeMap<Arc<str>, FunctionId> = BTreeMap::new();
        let mut note = |f: &FunctionId| -> Result<(), ProgramError> {
            match functions.get(&f.name) {
                Some(g) if g.arity != f.arity => Err(ProgramError::FunctionArityConflict {
                    function: f.name.to_string(),
                    first: g.arity,
                    second: f.arity,
                }),
                Some(_) => Ok(()),
                None => {
                    functions.insert(f.name.clone(), f.clone());
                    Ok(())
                }
            }
        };
        let mut defined = BTreeSet::new();
        for eq in &user {
            if is_reserved(&eq.function.name) {
                return Err(ProgramError::ReservedName(eq.function.name.to_string()));
            }
            if vocab.lookup(&eq.function.name).is_some() {
                return Err(ProgramError::FunctionNamedLikeConstructor(
                    eq.function.name.to_string(),
                ));
            }
            note(&eq.function)?;
            defined.insert(eq.function.name.clone());
        }
        let standard = standard_equations(&vocab);
        for eq in &standard {
            note(&eq.function)?;
            defined.insert(eq.function.name.clone());
        }
        for eq in &user {
            for f in eq.rhs.functions() {
                note(&f)?;
                if !defined.contains(&f.name) {
                    return Err(ProgramError::UndefinedFunction(f.name.to_string()));
                }
            }
        }

        check_wellformed(&vocab, &user)?;

        let principal = match principal {
            Some(name) => functions
                .get(name)
                .filter(|_| user.iter().any(|e| &*e.function.name == name))
                .cloned()
                .ok_or_else(|| ProgramError::PrincipalMissing(name.to_string()))?,
            None => user
                .first()
                .map(|e| e.function.clone())
                .unwrap_or_else(|| discriminator_function(&vocab)),
        };

        let mut equations: BTreeMap<Arc<str>, Vec<ProgramEquation>> = BTreeMap::new();
        for eq in user.iter().chain(&standard) {
            equations
                .entry(eq.function.name.clone())
                .or_default()
                .push(eq.clone());
        }
        Ok(Program {
            vocab,
            principal,
            functions,
            equations,
            user,
        })
    }

    /// The program whose body is the union of the given programs' bodies.
    pub fn union<'a>(
        vocab: Arc<Vocabulary>,
        programs: impl IntoIterator<Item = &'a Program>,
    ) -> Result<Program, ProgramError> {
        let mut user = Vec::new();
        for p in programs {
            if *p.vocab != *vocab {
                return Err(ProgramError::VocabularyMismatch);
            }
            user.extend(p.user.iter().cloned());
        }
        Program::new(vocab, user, None)
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn principal(&self) -> &FunctionId {
        &self.principal
    }

    pub fn function(&self, name: &str) -> Option<&FunctionId> {
        self.functions.get(name)
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionId> {
        self.functions.values()
    }

    pub fn equations_for(&self, name: &str) -> &[ProgramEquation] {
        self.equations.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The user-written equations, in input order with duplicates removed.
    pub fn user_equations(&self) -> &[ProgramEquation] {
        &self.user
    }

    pub fn all_equations(&self) -> impl Iterator<Item = &ProgramEquation> {
        self.equations.values().flatten()
    }
}

/// A pattern variable bound to the argument subterm at `address` of argument
/// `arg`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub var: Arc<str>,
    pub arg: usize,
    pub address: Address,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchOutcome<'p> {
    Matched {
        equation: &'p ProgramEquation,
        bindings: Vec<Binding>,
    },
    /// No equation applies, whatever is observed further.
    NoMatch,
    /// The constructor at `address` of argument `arg` must be observed
    /// before an equation can be selected.
    NeedMore { arg: usize, address: Address },
}

enum Candidate {
    Dead,
    Pending(usize, Address),
    Matched(Vec<Binding>),
}

fn try_equation(
    eq: &ProgramEquation,
    observe: &mut dyn FnMut(usize, &Address) -> Option<CtorId>,
) -> Candidate {
    let mut bindings = Vec::new();
    let mut need: Option<(usize, Address)> = None;
    let mut stack: Vec<(usize, Address, &Term)> = eq
        .patterns
        .iter()
        .enumerate()
        .rev()
        .map(|(i, p)| (i, Address::root(), p))
        .collect();
    while let Some((arg, addr, pat)) = stack.pop() {
        match pat {
            Term::Var(v) => bindings.push(Binding {
                var: v.clone(),
                arg,
                address: addr,
            }),
            Term::Ctor(c, kids) => match observe(arg, &addr) {
                Some(d) if d == *c => {
                    for (i, k) in kids.iter().enumerate().rev() {
                        stack.push((arg, addr.child(i), k));
                    }
                }
                Some(_) => return Candidate::Dead,
                None => {
                    let shallower = match &need {
                        None => true,
                        Some((a, n)) => (addr.len(), arg) < (n.len(), *a),
                    };
                    if shallower {
                        need = Some((arg, addr));
                    }
                }
            },
            // Patterns are certified base terms.
            Term::Fun(..) => return Candidate::Dead,
        }
    }
    match need {
        Some((arg, addr)) => Candidate::Pending(arg, addr),
        None => Candidate::Matched(bindings),
    }
}

/// Selects the equation for `f` whose patterns agree with the observed
/// constructors of the arguments. `observe(arg, address)` returns the
/// constructor at `address` of argument `arg` when it has been observed.
pub fn match_equation<'p>(
    program: &'p Program,
    function: &str,
    observe: &mut dyn FnMut(usize, &Address) -> Option<CtorId>,
) -> MatchOutcome<'p> {
    let mut need: Option<(usize, Address)> = None;
    for eq in program.equations_for(function) {
        match try_equation(eq, observe) {
            Candidate::Matched(bindings) => {
                return MatchOutcome::Matched {
                    equation: eq,
                    bindings,
                }
            }
            Candidate::Dead => {}
            Candidate::Pending(arg, addr) => {
                let shallower = match &need {
                    None => true,
                    Some((a, n)) => (addr.len(), arg, &addr) < (n.len(), *a, n),
                };
                if shallower {
                    need = Some((arg, addr));
                }
            }
        }
    }
    match need {
        Some((arg, address)) => MatchOutcome::NeedMore { arg, address },
        None => MatchOutcome::NoMatch,
    }
}

/// [`match_equation`] against fully known finite arguments.
pub fn match_data<'p>(program: &'p Program, function: &str, args: &[DataTerm]) -> MatchOutcome<'p> {
    match_equation(program, function, &mut |arg, addr| {
        args.get(arg)?.subterm(addr).map(|t| t.ctor)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat() -> Arc<Vocabulary> {
        Arc::new(Vocabulary::new([("0", 0), ("s", 1)]).unwrap())
    }

    fn add_program(v: &Arc<Vocabulary>) -> Program {
        let z = v.lookup("0").unwrap();
        let s = v.lookup("s").unwrap();
        let add = FunctionId::new("add", 2);
        Program::new(
            v.clone(),
            vec![
                ProgramEquation::new(
                    add.clone(),
                    vec![Term::Ctor(z, vec![]), Term::var("y")],
                    Term::var("y"),
                ),
                ProgramEquation::new(
                    add.clone(),
                    vec![Term::Ctor(s, vec![Term::var("x")]), Term::var("y")],
                    Term::Ctor(
                        s,
                        vec![Term::app(&add, vec![Term::var("x"), Term::var("y")])],
                    ),
                ),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn standard_equations_for_nat() {
        let v = nat();
        let eqs = standard_equations(&v);
        let shown: Vec<String> = eqs.iter().map(|e| e.display(&v).to_string()).collect();
        assert_eq!(
            shown,
            [
                "pi_1_1(0) = 0",
                "pi_1_1(s(x1)) = x1",
                "delta(0,b1,b2) = b1",
                "delta(s(x1),b1,b2) = b2",
            ]
        );
    }

    #[test]
    fn standard_equation_counts() {
        let v = Vocabulary::new([("0", 0), ("1", 0), ("e", 0), ("s", 1), ("p", 2)]).unwrap();
        assert_eq!(standard_equations(&v).len(), 15);
        let e = Vocabulary::new([("e", 0)]).unwrap();
        let shown: Vec<String> = standard_equations(&e)
            .iter()
            .map(|q| q.display(&e).to_string())
            .collect();
        assert_eq!(shown, ["pi_1_1(e) = e", "delta(e,b1) = b1"]);
    }

    #[test]
    fn add_is_certified() {
        let v = nat();
        let p = add_program(&v);
        assert_eq!(&*p.principal().name, "add");
        assert_eq!(p.equations_for("add").len(), 2);
    }

    #[test]
    fn incompatible_pair_reports_unifier() {
        let v = Arc::new(Vocabulary::new([("0", 0), ("a", 0), ("b", 0)]).unwrap());
        let c = |n: &str| Term::Ctor(v.lookup(n).unwrap(), vec![]);
        let f = FunctionId::new("f", 1);
        let err = Program::new(
            v.clone(),
            vec![
                ProgramEquation::new(f.clone(), vec![Term::var("x")], c("a")),
                ProgramEquation::new(f.clone(), vec![c("0")], c("b")),
            ],
            None,
        )
        .unwrap_err();
        assert_eq!(
            err,
            ProgramError::IncompatiblePair {
                first: 0,
                second: 1,
                function: "f".into(),
                unifier: "{x ↦ 0}".into()
            }
        );
    }

    #[test]
    fn nonlinear_rejected() {
        let v = nat();
        let g = FunctionId::new("g", 2);
        let err = Program::new(
            v,
            vec![ProgramEquation::new(
                g,
                vec![Term::var("x"), Term::var("x")],
                Term::var("x"),
            )],
            None,
        )
        .unwrap_err();
        assert!(
            matches!(err, ProgramError::NonLinearPattern { ref variable, .. } if variable == "x")
        );
    }

    #[test]
    fn unbound_rhs_rejected() {
        let v = nat();
        let g = FunctionId::new("g", 1);
        let err = Program::new(
            v,
            vec![ProgramEquation::new(
                g,
                vec![Term::var("x")],
                Term::var("y"),
            )],
            None,
        )
        .unwrap_err();
        assert_eq!(
            err,
            ProgramError::UnboundRhsVariable {
                equation: 0,
                variable: "y".into()
            }
        );
    }

    #[test]
    fn reserved_and_undefined_names() {
        let v = nat();
        let z = Term::Ctor(v.lookup("0").unwrap(), vec![]);
        let pi = FunctionId::new("pi_1_1", 0);
        assert!(matches!(
            Program::new(
                v.clone(),
                vec![ProgramEquation::new(pi, vec![], z.clone())],
                None
            ),
            Err(ProgramError::ReservedName(_))
        ));
        let f = FunctionId::new("f", 0);
        let h = FunctionId::new("h", 0);
        assert_eq!(
            Program::new(
                v,
                vec![ProgramEquation::new(f, vec![], Term::app(&h, vec![]))],
                None
            )
            .unwrap_err(),
            ProgramError::UndefinedFunction("h".into())
        );
    }

    #[test]
    fn dispatch_outcomes() {
        let v = nat();
        let p = add_program(&v);
        let s = v.lookup("s").unwrap();
        let z = v.lookup("0").unwrap();
        let two = DataTerm::node(s, vec![DataTerm::node(s, vec![DataTerm::leaf(z)])]);
        match match_data(&p, "add", &[two.clone(), DataTerm::leaf(z)]) {
            MatchOutcome::Matched { equation, bindings } => {
                assert_eq!(equation, &p.equations_for("add")[1]);
                assert_eq!(
                    bindings[0],
                    Binding {
                        var: Arc::from("x"),
                        arg: 0,
                        address: Address::from_steps([0])
                    }
                );
            }
            other => panic!("unexpected {other:?}"),
        }
        let out = match_equation(&p, "add", &mut |_, _| None);
        assert_eq!(
            out,
            MatchOutcome::NeedMore {
                arg: 0,
                address: Address::root()
            }
        );
    }

    #[test]
    fn no_match_on_foreign_head() {
        let v = Arc::new(Vocabulary::new([("0", 0), ("s", 1), ("p", 2)]).unwrap());
        let z = v.lookup("0").unwrap();
        let s = v.lookup("s").unwrap();
        let add = FunctionId::new("add", 2);
        let p = Program::new(
            v.clone(),
            vec![
                ProgramEquation::new(
                    add.clone(),
                    vec![Term::Ctor(z, vec![]), Term::var("y")],
                    Term::var("y"),
                ),
                ProgramEquation::new(
                    add.clone(),
                    vec![Term::Ctor(s, vec![Term::var("x")]), Term::var("y")],
                    Term::Ctor(
                        s,
                        vec![Term::app(&add, vec![Term::var("x"), Term::var("y")])],
                    ),
                ),
            ],
            None,
        )
        .unwrap();
        let pz = DataTerm::node(
            v.lookup("p").unwrap(),
            vec![DataTerm::leaf(z), DataTerm::leaf(z)],
        );
        assert_eq!(
            match_data(&p, "add", &[pz, DataTerm::leaf(z)]),
            MatchOutcome::NoMatch
        );
    }
}

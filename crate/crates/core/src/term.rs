//! Addresses, finite data-terms, and program terms.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::vocab::{CtorId, Vocabulary};

/// A path of 0-based child indices from the root of a hyper-term.
///
/// An address is the same thing as a deep destructor: the surface destructor
/// `π_{i,m}` selects child `i - 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(Vec<usize>);

impl Address {
    pub fn root() -> Self {
        Address(Vec::new())
    }

    pub fn from_steps(steps: impl Into<Vec<usize>>) -> Self {
        Address(steps.into())
    }

    pub fn steps(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: usize) -> Address {
        let mut steps = Vec::with_capacity(self.0.len() + 1);
        steps.extend_from_slice(&self.0);
        steps.push(i);
        Address(steps)
    }

    pub fn parent(&self) -> Option<(Address, usize)> {
        let (&last, init) = self.0.split_last()?;
        Some((Address(init.to_vec()), last))
    }

    /// `self` followed by `rest`.
    pub fn join(&self, rest: &Address) -> Address {
        let mut steps = self.0.clone();
        steps.extend_from_slice(&rest.0);
        Address(steps)
    }

    pub fn strip_prefix(&self, prefix: &Address) -> Option<Address> {
        self.0
            .strip_prefix(prefix.0.as_slice())
            .map(|s| Address(s.to_vec()))
    }

    /// `⟨0⟩^n`, the address of the n-th element of a stream.
    pub fn zeros(n: usize) -> Address {
        Address(vec![0; n])
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "⟩")
    }
}

/// A finite term built from constructors only.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataTerm {
    pub ctor: CtorId,
    pub args: Vec<DataTerm>,
}

impl DataTerm {
    pub fn leaf(ctor: CtorId) -> Self {
        DataTerm {
            ctor,
            args: Vec::new(),
        }
    }

    pub fn node(ctor: CtorId, args: Vec<DataTerm>) -> Self {
        DataTerm { ctor, args }
    }

    /// Height of the syntax tree; leaves have height 0.
    pub fn height(&self) -> usize {
        self.args.iter().map(|a| a.height() + 1).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.args.iter().map(DataTerm::size).sum::<usize>()
    }

    pub fn subterm(&self, addr: &Address) -> Option<&DataTerm> {
        let mut cur = self;
        for &i in addr.steps() {
            cur = cur.args.get(i)?;
        }
        Some(cur)
    }

    /// Checks every application against the vocabulary's arities.
    pub fn is_well_formed(&self, vocab: &Vocabulary) -> bool {
        self.ctor.index() < vocab.len()
            && vocab.arity(self.ctor) == self.args.len()
            && self.args.iter().all(|a| a.is_well_formed(vocab))
    }

    pub fn to_term(&self) -> Term {
        Term::Ctor(self.ctor, self.args.iter().map(DataTerm::to_term).collect())
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        Rendered(move |f: &mut fmt::Formatter<'_>| write_data(f, self, vocab))
    }
}

fn write_data(f: &mut fmt::Formatter<'_>, t: &DataTerm, vocab: &Vocabulary) -> fmt::Result {
    write!(f, "{}", vocab.name(t.ctor))?;
    if !t.args.is_empty() {
        write!(f, "(")?;
        for (i, a) in t.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write_data(f, a, vocab)?;
        }
        write!(f, ")")?;
    }
    Ok(())
}

/// Adapter turning a formatting closure into a `Display` value.
pub(crate) struct Rendered<F>(pub(crate) F);

impl<F> fmt::Display for Rendered<F>
where
    F: Fn(&mut fmt::Formatter<'_>) -> fmt::Result,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        (self.0)(f)
    }
}

/// A program-function symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionId {
    pub name: Arc<str>,
    pub arity: usize,
}

impl FunctionId {
    pub fn new(name: &str, arity: usize) -> Self {
        FunctionId {
            name: Arc::from(name),
            arity,
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// Program term. Data-terms and base-terms (patterns) are the strata without
/// function symbols, respectively without function symbols and variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Arc<str>),
    Ctor(CtorId, Vec<Term>),
    Fun(FunctionId, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Arc::from(name))
    }

    pub fn ctor(id: CtorId, args: Vec<Term>) -> Term {
        Term::Ctor(id, args)
    }

    pub fn app(f: &FunctionId, args: Vec<Term>) -> Term {
        Term::Fun(f.clone(), args)
    }

    pub fn is_data_term(&self) -> bool {
        match self {
            Term::Var(_) | Term::Fun(..) => false,
            Term::Ctor(_, args) => args.iter().all(Term::is_data_term),
        }
    }

    pub fn is_base_term(&self) -> bool {
        match self {
            Term::Var(_) => true,
            Term::Fun(..) => false,
            Term::Ctor(_, args) => args.iter().all(Term::is_base_term),
        }
    }

    pub fn to_data_term(&self) -> Option<DataTerm> {
        match self {
            Term::Ctor(c, args) => Some(DataTerm {
                ctor: *c,
                args: args.iter().map(Term::to_data_term).collect::<Option<_>>()?,
            }),
            _ => None,
        }
    }

    /// Arity-correctness of every constructor and function application.
    pub fn is_arity_correct(&self, vocab: &Vocabulary) -> bool {
        match self {
            Term::Var(_) => true,
            Term::Ctor(c, args) => {
                c.index() < vocab.len()
                    && vocab.arity(*c) == args.len()
                    && args.iter().all(|a| a.is_arity_correct(vocab))
            }
            Term::Fun(f, args) => {
                f.arity == args.len() && args.iter().all(|a| a.is_arity_correct(vocab))
            }
        }
    }

    /// Variables in left-to-right order of first occurrence, with repeats.
    pub fn variable_occurrences(&self) -> Vec<Arc<str>> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Arc<str>>) {
        match self {
            Term::Var(v) => out.push(v.clone()),
            Term::Ctor(_, args) | Term::Fun(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn variables(&self) -> BTreeSet<Arc<str>> {
        self.variable_occurrences().into_iter().collect()
    }

    pub fn functions(&self) -> BTreeSet<FunctionId> {
        let mut out = BTreeSet::new();
        self.collect_functions(&mut out);
        out
    }

    fn collect_functions(&self, out: &mut BTreeSet<FunctionId>) {
        match self {
            Term::Var(_) => {}
            Term::Ctor(_, args) => args.iter().for_each(|a| a.collect_functions(out)),
            Term::Fun(f, args) => {
                out.insert(f.clone());
                args.iter().for_each(|a| a.collect_functions(out));
            }
        }
    }

    /// Depth of the deepest constructor below the root, counting the root as 1.
    /// Variables contribute 0; this bounds how far a pattern inspects its input.
    pub fn pattern_depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::Ctor(_, args) | Term::Fun(_, args) => {
                1 + args.iter().map(Term::pattern_depth).max().unwrap_or(0)
            }
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        Rendered(move |f: &mut fmt::Formatter<'_>| write_term(f, self, vocab))
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term, vocab: &Vocabulary) -> fmt::Result {
    let (head, args): (&str, &[Term]) = match t {
        Term::Var(v) => return write!(f, "{v}"),
        Term::Ctor(c, args) => (vocab.name(*c), args),
        Term::Fun(g, args) => (&g.name, args),
    };
    write!(f, "{head}")?;
    if !args.is_empty() {
        write!(f, "(")?;
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write_term(f, a, vocab)?;
        }
        write!(f, ")")?;
    }
    Ok(())
}

//! Hyper-terms as address-indexed producers of constructors.
//!
//! A possibly infinite hyper-term is never materialized. Every consumer in the
//! crate observes it through [`HyperTermSource::query`], which answers with
//! the constructor found at an address. Answers are three-valued so that a
//! computation that runs out of budget reports [`ConstructorQuery::Unknown`]
//! instead of diverging.
//!
//! Sources are single-threaded: implementations may memoize through interior
//! mutability, and shared handles are `Rc`s. Distinct sources over the same
//! immutable program can live on different threads.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use crate::term::{Address, DataTerm, Rendered};
use crate::vocab::{CtorId, Vocabulary};

/// Why a bounded observation gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnknownReason {
    /// Rewrite or search budget exhausted.
    Fuel,
    /// The address is deeper than the session may resolve.
    Depth,
    /// No program equation applies, so no constructor is derivable.
    Stuck,
    /// The T_D search frontier outgrew its cap.
    Frontier,
}

impl fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnknownReason::Fuel => "fuel",
            UnknownReason::Depth => "depth",
            UnknownReason::Stuck => "stuck",
            UnknownReason::Frontier => "frontier",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstructorQuery {
    Known(CtorId),
    /// The address lies outside the tree.
    OutOfRange,
    Unknown(UnknownReason),
}

impl ConstructorQuery {
    pub fn known(self) -> Option<CtorId> {
        match self {
            ConstructorQuery::Known(c) => Some(c),
            _ => None,
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        Rendered(move |f: &mut fmt::Formatter<'_>| match self {
            ConstructorQuery::Known(c) => write!(f, "{}", vocab.name(*c)),
            ConstructorQuery::OutOfRange => write!(f, "out-of-range"),
            ConstructorQuery::Unknown(r) => write!(f, "unknown({r})"),
        })
    }
}

/// An element of the replete structure, observed one address at a time.
///
/// Implementations must be deterministic and prefix-consistent: a `Known`
/// answer at `a·⟨i⟩` implies a `Known(d)` answer at `a` with `i < arity(d)`.
pub trait HyperTermSource {
    fn query(&self, addr: &Address) -> ConstructorQuery;
}

pub type SourceRef = Rc<dyn HyperTermSource>;

pub fn query_at(src: &dyn HyperTermSource, addr: &Address) -> ConstructorQuery {
    src.query(addr)
}

/// A finite literal tree is its own source.
#[derive(Debug, Clone)]
pub struct LiteralSource {
    term: DataTerm,
}

impl LiteralSource {
    pub fn new(term: DataTerm) -> Self {
        LiteralSource { term }
    }

    pub fn shared(term: DataTerm) -> SourceRef {
        Rc::new(LiteralSource { term })
    }

    pub fn term(&self) -> &DataTerm {
        &self.term
    }
}

impl HyperTermSource for LiteralSource {
    fn query(&self, addr: &Address) -> ConstructorQuery {
        match self.term.subterm(addr) {
            Some(t) => ConstructorQuery::Known(t.ctor),
            None => ConstructorQuery::OutOfRange,
        }
    }
}

/// A source about which nothing can ever be learned.
#[derive(Debug, Clone, Copy)]
pub struct OpaqueSource(pub UnknownReason);

impl HyperTermSource for OpaqueSource {
    fn query(&self, _addr: &Address) -> ConstructorQuery {
        ConstructorQuery::Unknown(self.0)
    }
}

/// The sub-hyper-term rooted at a fixed address of another source.
pub struct Subtree {
    inner: SourceRef,
    base: Address,
}

impl Subtree {
    pub fn new(inner: SourceRef, base: Address) -> Self {
        Subtree { inner, base }
    }
}

impl HyperTermSource for Subtree {
    fn query(&self, addr: &Address) -> ConstructorQuery {
        self.inner.query(&self.base.join(addr))
    }
}

/// Remembers every answer of the wrapped source, including `Unknown` ones, so
/// that one search sees a single fixed view of the hyper-term.
pub struct CachedSource {
    inner: SourceRef,
    cache: RefCell<HashMap<Address, ConstructorQuery>>,
}

impl CachedSource {
    pub fn new(inner: SourceRef) -> Self {
        CachedSource {
            inner,
            cache: RefCell::new(HashMap::new()),
        }
    }
}

impl HyperTermSource for CachedSource {
    fn query(&self, addr: &Address) -> ConstructorQuery {
        if let Some(q) = self.cache.borrow().get(addr) {
            return *q;
        }
        // Parents first: a failed parent decides the child without touching
        // the inner source.
        if let Some((parent, _)) = addr.parent() {
            match self.query(&parent) {
                ConstructorQuery::Known(_) => {}
                other => {
                    self.cache.borrow_mut().insert(addr.clone(), other);
                    return other;
                }
            }
        }
        let q = self.inner.query(addr);
        self.cache.borrow_mut().insert(addr.clone(), q);
        q
    }
}

/// The result of `π_{i,m}` applied to a hyper-term, computed semantically:
/// the `i`-th child when the root has at least `i` children, the term itself
/// otherwise.
pub struct Destructed {
    inner: SourceRef,
    /// 0-based child index.
    child: usize,
    vocab: Arc<Vocabulary>,
}

impl HyperTermSource for Destructed {
    fn query(&self, addr: &Address) -> ConstructorQuery {
        match self.inner.query(&Address::root()) {
            ConstructorQuery::Known(c) => {
                if self.child < self.vocab.arity(c) {
                    self.inner
                        .query(&Address::root().child(self.child).join(addr))
                } else {
                    self.inner.query(addr)
                }
            }
            other => other,
        }
    }
}

/// Semantic `π_{index,m}` with a 1-based `index`, `1 <= index <= m`.
pub fn semantic_destruct(src: SourceRef, index: usize, vocab: Arc<Vocabulary>) -> SourceRef {
    assert!(
        index >= 1 && index <= vocab.destructor_width(),
        "destructor index {index} outside 1..={}",
        vocab.destructor_width()
    );
    Rc::new(Destructed {
        inner: src,
        child: index - 1,
        vocab,
    })
}

/// Semantic discriminator: picks the branch of the root constructor.
/// `branches` is indexed in vocabulary order. `None` when the root is not
/// known.
pub fn semantic_discriminate<'b, V>(src: &dyn HyperTermSource, branches: &'b [V]) -> Option<&'b V> {
    match src.query(&Address::root()) {
        ConstructorQuery::Known(c) => branches.get(c.index()),
        _ => None,
    }
}

/// A depth-bounded view of a hyper-term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FinitePrefix {
    Known(CtorId, Vec<FinitePrefix>),
    Unexplored,
}

impl FinitePrefix {
    /// Restriction to a smaller depth.
    pub fn truncate(&self, depth: usize) -> FinitePrefix {
        match self {
            FinitePrefix::Unexplored => FinitePrefix::Unexplored,
            _ if depth == 0 => FinitePrefix::Unexplored,
            FinitePrefix::Known(c, kids) => {
                FinitePrefix::Known(*c, kids.iter().map(|k| k.truncate(depth - 1)).collect())
            }
        }
    }

    /// The data-term, when no node is unexplored.
    pub fn to_data_term(&self) -> Option<DataTerm> {
        match self {
            FinitePrefix::Unexplored => None,
            FinitePrefix::Known(c, kids) => Some(DataTerm {
                ctor: *c,
                args: kids
                    .iter()
                    .map(FinitePrefix::to_data_term)
                    .collect::<Option<_>>()?,
            }),
        }
    }

    pub fn known_nodes(&self) -> usize {
        match self {
            FinitePrefix::Unexplored => 0,
            FinitePrefix::Known(_, kids) => {
                1 + kids.iter().map(FinitePrefix::known_nodes).sum::<usize>()
            }
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        Rendered(move |f: &mut fmt::Formatter<'_>| write_prefix(f, self, vocab))
    }
}

fn write_prefix(f: &mut fmt::Formatter<'_>, p: &FinitePrefix, vocab: &Vocabulary) -> fmt::Result {
    match p {
        FinitePrefix::Unexplored => write!(f, "…"),
        FinitePrefix::Known(c, kids) => {
            write!(f, "{}", vocab.name(*c))?;
            if !kids.is_empty() {
                write!(f, "(")?;
                for (i, k) in kids.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write_prefix(f, k, vocab)?;
                }
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

/// Resolves every address shorter than `depth`.
pub fn prefix(src: &dyn HyperTermSource, vocab: &Vocabulary, depth: usize) -> FinitePrefix {
    prefix_at(src, vocab, &Address::root(), depth)
}

fn prefix_at(
    src: &dyn HyperTermSource,
    vocab: &Vocabulary,
    addr: &Address,
    depth: usize,
) -> FinitePrefix {
    if depth == 0 {
        return FinitePrefix::Unexplored;
    }
    match src.query(addr) {
        ConstructorQuery::Known(c) => {
            let kids = (0..vocab.arity(c))
                .map(|i| prefix_at(src, vocab, &addr.child(i), depth - 1))
                .collect();
            FinitePrefix::Known(c, kids)
        }
        _ => FinitePrefix::Unexplored,
    }
}

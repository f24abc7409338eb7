//! Membership of hyper-terms in the types of a data-system.
//!
//! Inductive types are checked by searching for a finite derivation from the
//! packaged rules. Coinductive types are checked against the expansion tree
//! `T_D`: a hyper-term has type `D` iff for every height there is a node of
//! that height consistent with it, so we look for one at a requested height.
//! All answers are three-valued; refutations only come from definite
//! constructor conflicts.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

use crate::datasystem::{Polarity, TypeId, ValidatedSystem};
use crate::evaluator::{as_source, EvalConfig, Mismatch, Valuation, Verdict3};
use crate::program::{Program, ProgramEquation, ProgramError};
use crate::source::{
    CachedSource, ConstructorQuery, HyperTermSource, SourceRef, Subtree, UnknownReason,
};
use crate::term::{Address, FunctionId, Rendered, Term};
use crate::vocab::{CtorId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckParams {
    /// Derivation nodes (inductive) or tree expansions (coinductive).
    pub fuel: usize,
    /// Level of `T_D` that a coinductive check must reach.
    pub height: usize,
    /// Share of `fuel` handed to each lower-rank sub-check.
    pub lower_fuel_ratio: f64,
    /// Largest number of open candidates kept per level.
    pub frontier_cap: usize,
    /// Budget for program-defined sources built by the checker itself.
    pub eval: EvalConfig,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            fuel: 10_000,
            height: 32,
            lower_fuel_ratio: 0.5,
            frontier_cap: 4096,
            eval: EvalConfig::default(),
        }
    }
}

impl CheckParams {
    fn lower(&self) -> CheckParams {
        CheckParams {
            fuel: ((self.fuel as f64 * self.lower_fuel_ratio) as usize).max(1),
            ..*self
        }
    }
}

/// A finite derivation of `type_id` at `address`, using disjunct
/// `disjunct` of the type's packaged rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub type_id: TypeId,
    pub address: Address,
    pub ctor: CtorId,
    pub disjunct: usize,
    pub premises: Vec<Premise>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Premise {
    /// A component of the same bundle, derived in turn.
    Derived(Rc<Derivation>),
    /// A component of an earlier bundle, checked on its own. Addresses inside
    /// `verdict` are relative to `address`.
    Lower {
        type_id: TypeId,
        address: Address,
        verdict: Box<MembershipVerdict>,
    },
}

impl Derivation {
    pub fn size(&self) -> usize {
        1 + self
            .premises
            .iter()
            .map(|p| match p {
                Premise::Derived(d) => d.size(),
                Premise::Lower { .. } => 1,
            })
            .sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Refutation {
    /// No disjunct of the type fits the constructor found at `address`.
    NoRule {
        address: Address,
        type_name: String,
        found: CtorId,
    },
    /// The subterm at `address` is not of the lower-rank type.
    LowerRank { address: Address, type_name: String },
    /// Every node of the expansion tree at `level` is inconsistent;
    /// `witness` is a conflict of greatest depth among the last candidates.
    NoConsistentNode {
        level: usize,
        witness: Option<Mismatch>,
    },
}

impl Refutation {
    pub fn address(&self) -> Option<&Address> {
        match self {
            Refutation::NoRule { address, .. } | Refutation::LowerRank { address, .. } => {
                Some(address)
            }
            Refutation::NoConsistentNode { witness, .. } => witness.as_ref().map(|m| m.address()),
        }
    }

    fn depth(&self) -> usize {
        self.address().map_or(0, Address::len)
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        Rendered(move |f: &mut fmt::Formatter<'_>| match self {
            Refutation::NoRule {
                address,
                type_name,
                found,
            } => {
                write!(
                    f,
                    "at {address}: no rule of {type_name} accepts {}",
                    vocab.name(*found)
                )
            }
            Refutation::LowerRank { address, type_name } => {
                write!(f, "at {address}: subterm is not of type {type_name}")
            }
            Refutation::NoConsistentNode { level, witness } => {
                write!(f, "no consistent node at level {level}")?;
                match witness {
                    Some(m) => write!(f, "; {}", m.display(vocab)),
                    None => Ok(()),
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MembershipVerdict {
    VerifiedToHeight(usize),
    Derived(Rc<Derivation>),
    Refuted {
        height: usize,
        explanation: Refutation,
    },
    Unknown(UnknownReason),
}

impl MembershipVerdict {
    pub fn is_positive(&self) -> bool {
        matches!(
            self,
            MembershipVerdict::VerifiedToHeight(_) | MembershipVerdict::Derived(_)
        )
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, MembershipVerdict::Refuted { .. })
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        Rendered(move |f: &mut fmt::Formatter<'_>| match self {
            MembershipVerdict::VerifiedToHeight(h) => write!(f, "VerifiedToHeight({h})"),
            MembershipVerdict::Derived(d) => {
                write!(f, "Derived (derivation of {} steps)", d.size())
            }
            MembershipVerdict::Refuted {
                height,
                explanation,
            } => {
                write!(
                    f,
                    "Refuted at height {height}: {}",
                    explanation.display(vocab)
                )
            }
            MembershipVerdict::Unknown(r) => write!(f, "Unknown ({r})"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeCheckError {
    #[error("type `{type_name}` is {actual}, expected {expected}")]
    PolarityMismatch {
        type_name: String,
        expected: Polarity,
        actual: Polarity,
    },
    #[error("choice {choice} at step {step} is out of range ({available} available)")]
    ChoiceOutOfRange {
        step: usize,
        choice: usize,
        available: usize,
    },
    #[error("`{function}` has arity {arity}; a typing claim needs a unary function")]
    ClaimArity { function: String, arity: usize },
    #[error("sample {index} is not of the claimed input type")]
    SampleNotOfClaimedInputType {
        index: usize,
        verdict: MembershipVerdict,
    },
    #[error(transparent)]
    Program(#[from] ProgramError),
}

fn require(ds: &ValidatedSystem, t: TypeId, expected: Polarity) -> Result<(), TypeCheckError> {
    let actual = ds.polarity(t);
    if actual == expected {
        Ok(())
    } else {
        Err(TypeCheckError::PolarityMismatch {
            type_name: ds.type_name(t).to_string(),
            expected,
            actual,
        })
    }
}

/// Shared state of one membership check: the lower-rank results already
/// computed, keyed by type and address.
struct Checker<'a> {
    ds: &'a ValidatedSystem,
    src: SourceRef,
    params: CheckParams,
    lower: HashMap<(TypeId, Address), MembershipVerdict>,
}

impl<'a> Checker<'a> {
    fn new(ds: &'a ValidatedSystem, src: SourceRef, params: CheckParams) -> Self {
        Checker {
            ds,
            src,
            params,
            lower: HashMap::new(),
        }
    }

    fn lower_check(&mut self, t: TypeId, addr: &Address) -> MembershipVerdict {
        if let Some(v) = self.lower.get(&(t, addr.clone())) {
            return v.clone();
        }
        let sub: SourceRef = Rc::new(Subtree::new(self.src.clone(), addr.clone()));
        let v = check_type_inner(self.ds, t, sub, &self.params.lower());
        self.lower.insert((t, addr.clone()), v.clone());
        v
    }
}

enum Outcome {
    Derived(Rc<Derivation>),
    Refuted(Refutation),
    Unknown(UnknownReason),
}

impl Clone for Outcome {
    fn clone(&self) -> Self {
        match self {
            Outcome::Derived(d) => Outcome::Derived(d.clone()),
            Outcome::Refuted(r) => Outcome::Refuted(r.clone()),
            Outcome::Unknown(r) => Outcome::Unknown(*r),
        }
    }
}

struct Inductive<'a> {
    checker: Checker<'a>,
    fuel: usize,
    memo: HashMap<(TypeId, Address), Outcome>,
}

impl Inductive<'_> {
    fn derive(&mut self, t: TypeId, addr: &Address) -> Outcome {
        if let Some(o) = self.memo.get(&(t, addr.clone())) {
            return o.clone();
        }
        if self.fuel == 0 {
            return Outcome::Unknown(UnknownReason::Fuel);
        }
        self.fuel -= 1;
        let o = stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.derive_here(t, addr));
        self.memo.insert((t, addr.clone()), o.clone());
        o
    }

    fn derive_here(&mut self, t: TypeId, addr: &Address) -> Outcome {
        let ds = self.checker.ds;
        let found = match self.checker.src.query(addr) {
            ConstructorQuery::Known(c) => c,
            ConstructorQuery::OutOfRange => return Outcome::Unknown(UnknownReason::Stuck),
            ConstructorQuery::Unknown(r) => return Outcome::Unknown(r),
        };
        let mut unknown = None;
        let mut refutation: Option<Refutation> = None;
        for (i, st) in ds.disjuncts(t).iter().enumerate() {
            if st.ctor != found {
                continue;
            }
            let mut premises = Vec::with_capacity(st.components.len());
            let mut blocked = None;
            let mut refuted = None;
            for (j, &u) in st.components.iter().enumerate() {
                let child = addr.child(j);
                if ds.bundle_of(u) == ds.bundle_of(t) {
                    match self.derive(u, &child) {
                        Outcome::Derived(d) => premises.push(Premise::Derived(d)),
                        Outcome::Refuted(r) => {
                            refuted = Some(r);
                            break;
                        }
                        Outcome::Unknown(r) => {
                            blocked.get_or_insert(r);
                        }
                    }
                } else {
                    match self.checker.lower_check(u, &child) {
                        v if v.is_positive() => premises.push(Premise::Lower {
                            type_id: u,
                            address: child,
                            verdict: Box::new(v),
                        }),
                        MembershipVerdict::Unknown(r) => {
                            blocked.get_or_insert(r);
                        }
                        _ => {
                            refuted = Some(Refutation::LowerRank {
                                address: child,
                                type_name: ds.type_name(u).to_string(),
                            });
                            break;
                        }
                    }
                }
            }
            match (refuted, blocked) {
                (Some(r), _) => {
                    if refutation
                        .as_ref()
                        .is_none_or(|best| r.depth() > best.depth())
                    {
                        refutation = Some(r);
                    }
                }
                (None, Some(r)) => {
                    unknown.get_or_insert(r);
                }
                (None, None) => {
                    return Outcome::Derived(Rc::new(Derivation {
                        type_id: t,
                        address: addr.clone(),
                        ctor: found,
                        disjunct: i,
                        premises,
                    }))
                }
            }
        }
        if let Some(r) = unknown {
            return Outcome::Unknown(r);
        }
        Outcome::Refuted(refutation.unwrap_or_else(|| Refutation::NoRule {
            address: addr.clone(),
            type_name: ds.type_name(t).to_string(),
            found,
        }))
    }
}

/// Searches for a finite derivation of `d` at the root of `src`. Each
/// derivation node costs one unit of fuel, which also bounds its height.
pub fn check_inductive(
    ds: &ValidatedSystem,
    d: TypeId,
    src: &SourceRef,
    params: &CheckParams,
) -> Result<MembershipVerdict, TypeCheckError> {
    require(ds, d, Polarity::Inductive)?;
    Ok(inductive(ds, d, cached(src), params))
}

fn inductive(
    ds: &ValidatedSystem,
    d: TypeId,
    src: SourceRef,
    params: &CheckParams,
) -> MembershipVerdict {
    let mut run = Inductive {
        checker: Checker::new(ds, src, *params),
        fuel: params.fuel,
        memo: HashMap::new(),
    };
    match run.derive(d, &Address::root()) {
        Outcome::Derived(w) => MembershipVerdict::Derived(w),
        Outcome::Refuted(r) => MembershipVerdict::Refuted {
            height: r.depth(),
            explanation: r,
        },
        Outcome::Unknown(r) => MembershipVerdict::Unknown(r),
    }
}

/// Re-checks a derivation against the packaged rules and the source,
/// independently of the search that produced it.
pub fn verify_derivation(ds: &ValidatedSystem, src: &dyn HyperTermSource, d: &Derivation) -> bool {
    stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
        if src.query(&d.address) != ConstructorQuery::Known(d.ctor) {
            return false;
        }
        let Some(st) = ds.disjuncts(d.type_id).get(d.disjunct) else {
            return false;
        };
        if st.ctor != d.ctor || st.components.len() != d.premises.len() {
            return false;
        }
        st.components
            .iter()
            .zip(&d.premises)
            .enumerate()
            .all(|(j, (&u, p))| {
                let child = d.address.child(j);
                match p {
                    Premise::Derived(sub) => {
                        sub.type_id == u
                            && sub.address == child
                            && ds.bundle_of(u) == ds.bundle_of(d.type_id)
                            && verify_derivation(ds, src, sub)
                    }
                    Premise::Lower {
                        type_id,
                        address,
                        verdict,
                    } => {
                        *type_id == u
                            && *address == child
                            && ds.bundle_of(u) < ds.bundle_of(d.type_id)
                            && match &**verdict {
                                MembershipVerdict::Derived(sub) => {
                                    let rebased = Rebased {
                                        inner: src,
                                        base: child.clone(),
                                    };
                                    sub.type_id == u && verify_derivation(ds, &rebased, sub)
                                }
                                v => v.is_positive(),
                            }
                    }
                }
            })
    })
}

struct Rebased<'s> {
    inner: &'s dyn HyperTermSource,
    base: Address,
}

impl HyperTermSource for Rebased<'_> {
    fn query(&self, addr: &Address) -> ConstructorQuery {
        self.inner.query(&self.base.join(addr))
    }
}

/// A node of `T_D`: a partial typing of a hyper-term of type `D`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExpansionNode {
    root: TypeId,
    internal: Vec<(Address, TypeId, CtorId)>,
    open: VecDeque<(Address, TypeId)>,
    terminal: Vec<(Address, TypeId)>,
    path: Vec<usize>,
}

impl ExpansionNode {
    /// The bare leaf `D`.
    pub fn root(d: TypeId) -> Self {
        ExpansionNode {
            root: d,
            internal: Vec::new(),
            open: VecDeque::from([(Address::root(), d)]),
            terminal: Vec::new(),
            path: Vec::new(),
        }
    }

    pub fn root_type(&self) -> TypeId {
        self.root
    }

    /// Number of expansion steps from the bare leaf.
    pub fn height(&self) -> usize {
        self.path.len()
    }

    /// Disjunct choices leading to this node.
    pub fn path(&self) -> &[usize] {
        &self.path
    }

    /// Expanded positions in expansion order, with their type and constructor.
    pub fn internal(&self) -> &[(Address, TypeId, CtorId)] {
        &self.internal
    }

    /// Unexpanded same-bundle leaves, the next one to expand first.
    pub fn open_leaves(&self) -> impl Iterator<Item = &(Address, TypeId)> {
        self.open.iter()
    }

    /// Leaves typed by earlier bundles; never expanded.
    pub fn terminal_leaves(&self) -> &[(Address, TypeId)] {
        &self.terminal
    }

    pub fn next_leaf(&self) -> Option<&(Address, TypeId)> {
        self.open.front()
    }

    /// A node without open leaves has no children.
    pub fn is_complete(&self) -> bool {
        self.open.is_empty()
    }

    pub fn child_count(&self, ds: &ValidatedSystem) -> usize {
        self.next_leaf().map_or(0, |(_, t)| ds.disjuncts(*t).len())
    }

    /// Expands the next leaf by its `choice`-th disjunct.
    pub fn child(
        &self,
        ds: &ValidatedSystem,
        choice: usize,
    ) -> Result<ExpansionNode, TypeCheckError> {
        let available = self.child_count(ds);
        if choice >= available {
            return Err(TypeCheckError::ChoiceOutOfRange {
                step: self.height(),
                choice,
                available,
            });
        }
        let mut node = self.clone();
        let (addr, t) = node.open.pop_front().expect("child_count is nonzero");
        let st = &ds.disjuncts(t)[choice];
        for (j, &u) in st.components.iter().enumerate() {
            if ds.bundle_of(u) == ds.bundle_of(self.root) {
                node.open.push_back((addr.child(j), u));
            } else {
                node.terminal.push((addr.child(j), u));
            }
        }
        node.internal.push((addr, t, st.ctor));
        node.path.push(choice);
        Ok(node)
    }

    pub fn children(&self, ds: &ValidatedSystem) -> Vec<ExpansionNode> {
        (0..self.child_count(ds))
            .map(|i| self.child(ds, i).expect("choice in range"))
            .collect()
    }

    /// Renders the partial typing, e.g. `D=p(E, [T])`: expanded positions as
    /// `Type=ctor(..)`, open leaves by type name, lower-rank leaves bracketed.
    pub fn display<'a>(&'a self, ds: &'a ValidatedSystem) -> impl fmt::Display + 'a {
        Rendered(move |f: &mut fmt::Formatter<'_>| self.render(ds, &Address::root(), f))
    }

    fn render(
        &self,
        ds: &ValidatedSystem,
        addr: &Address,
        f: &mut fmt::Formatter<'_>,
    ) -> fmt::Result {
        if let Some((_, t, c)) = self.internal.iter().find(|(a, _, _)| a == addr) {
            write!(f, "{}={}", ds.type_name(*t), ds.vocab().name(*c))?;
            let arity = ds.vocab().arity(*c);
            if arity > 0 {
                f.write_str("(")?;
                for j in 0..arity {
                    if j > 0 {
                        f.write_str(", ")?;
                    }
                    self.render(ds, &addr.child(j), f)?;
                }
                f.write_str(")")?;
            }
            Ok(())
        } else if let Some((_, t)) = self.open.iter().find(|(a, _)| a == addr) {
            f.write_str(ds.type_name(*t))
        } else if let Some((_, t)) = self.terminal.iter().find(|(a, _)| a == addr) {
            write!(f, "[{}]", ds.type_name(*t))
        } else {
            f.write_str("?")
        }
    }
}

/// The expansion tree of a coinductive type, addressed by disjunct choices.
pub struct TdTree<'a> {
    ds: &'a ValidatedSystem,
    root: TypeId,
}

impl<'a> TdTree<'a> {
    pub fn new(ds: &'a ValidatedSystem, root: TypeId) -> Result<Self, TypeCheckError> {
        require(ds, root, Polarity::Coinductive)?;
        Ok(TdTree { ds, root })
    }

    pub fn root_type(&self) -> TypeId {
        self.root
    }

    pub fn node(&self, path: &[usize]) -> Result<ExpansionNode, TypeCheckError> {
        let mut node = ExpansionNode::root(self.root);
        for &choice in path {
            node = node.child(self.ds, choice)?;
        }
        Ok(node)
    }

    pub fn children(&self, node: &ExpansionNode) -> Vec<ExpansionNode> {
        node.children(self.ds)
    }
}

/// The node of `T_D` reached by the given disjunct choices.
pub fn td_node(
    ds: &ValidatedSystem,
    d: TypeId,
    path: &[usize],
) -> Result<ExpansionNode, TypeCheckError> {
    TdTree::new(ds, d)?.node(path)
}

fn head_conflict(
    src: &dyn HyperTermSource,
    addr: &Address,
    expected: CtorId,
) -> Result<(), Verdict3> {
    match src.query(addr) {
        ConstructorQuery::Known(c) if c == expected => Ok(()),
        ConstructorQuery::Unknown(r) => Err(Verdict3::Unknown(r)),
        other => Err(Verdict3::No(Mismatch::Constructors {
            address: addr.clone(),
            left: ConstructorQuery::Known(expected),
            right: other,
        })),
    }
}

impl Checker<'_> {
    fn leaf_conflict(&mut self, addr: &Address, t: TypeId) -> Result<(), Verdict3> {
        match self.lower_check(t, addr) {
            v if v.is_positive() => Ok(()),
            MembershipVerdict::Unknown(r) => Err(Verdict3::Unknown(r)),
            _ => Err(Verdict3::No(Mismatch::LowerRank {
                address: addr.clone(),
                type_name: self.ds.type_name(t).to_string(),
            })),
        }
    }

    /// Consistency of every constraint of `node`, skipping the first
    /// `internal_from` internal positions and `terminal_from` lower leaves.
    fn consistency(
        &mut self,
        node: &ExpansionNode,
        internal_from: usize,
        terminal_from: usize,
    ) -> Verdict3 {
        let mut unknown = None;
        for (addr, _, c) in &node.internal[internal_from..] {
            match head_conflict(&*self.src, addr, *c) {
                Ok(()) => {}
                Err(Verdict3::Unknown(r)) => {
                    unknown.get_or_insert(r);
                }
                Err(no) => return no,
            }
        }
        for (addr, t) in &node.terminal[terminal_from..] {
            match self.leaf_conflict(addr, *t) {
                Ok(()) => {}
                Err(Verdict3::Unknown(r)) => {
                    unknown.get_or_insert(r);
                }
                Err(no) => return no,
            }
        }
        unknown.map_or(Verdict3::Yes, Verdict3::Unknown)
    }
}

/// Whether `src` fits the partial typing `node`: matching constructors at
/// every expanded position and membership in the lower-rank type at every
/// terminal leaf.
pub fn consistent(
    ds: &ValidatedSystem,
    node: &ExpansionNode,
    src: &SourceRef,
    params: &CheckParams,
) -> Verdict3 {
    Checker::new(ds, cached(src), *params).consistency(node, 0, 0)
}

/// Looks for a node at level `params.height` of `T_D` consistent with `src`.
/// Complete nodes (no open leaves) stay in the search at every later level,
/// since a terminating branch is unbounded.
pub fn check_coinductive(
    ds: &ValidatedSystem,
    d: TypeId,
    src: &SourceRef,
    params: &CheckParams,
) -> Result<MembershipVerdict, TypeCheckError> {
    require(ds, d, Polarity::Coinductive)?;
    Ok(coinductive(ds, d, cached(src), params))
}

fn coinductive(
    ds: &ValidatedSystem,
    d: TypeId,
    src: SourceRef,
    params: &CheckParams,
) -> MembershipVerdict {
    let mut checker = Checker::new(ds, src, *params);
    let mut fuel = params.fuel;
    let mut frontier = vec![ExpansionNode::root(d)];
    // Nodes whose status is Unknown can never become consistent, so they are
    // dropped; but once one is dropped a refutation is no longer sound.
    let mut dropped_unknown: Option<UnknownReason> = None;
    for level in 1..=params.height {
        let mut next = Vec::new();
        let mut witness: Option<Mismatch> = None;
        for node in frontier {
            if node.is_complete() {
                next.push(node);
                continue;
            }
            for choice in 0..node.child_count(ds) {
                if fuel == 0 {
                    return MembershipVerdict::Unknown(UnknownReason::Fuel);
                }
                fuel -= 1;
                let child = node.child(ds, choice).expect("choice in range");
                match checker.consistency(&child, node.internal.len(), node.terminal.len()) {
                    Verdict3::Yes => next.push(child),
                    Verdict3::No(m) => {
                        if witness
                            .as_ref()
                            .is_none_or(|w| m.address().len() > w.address().len())
                        {
                            witness = Some(m);
                        }
                    }
                    Verdict3::Unknown(r) => {
                        dropped_unknown.get_or_insert(r);
                    }
                }
            }
        }
        if next.is_empty() {
            return match dropped_unknown {
                Some(r) => MembershipVerdict::Unknown(r),
                None => MembershipVerdict::Refuted {
                    height: level,
                    explanation: Refutation::NoConsistentNode { level, witness },
                },
            };
        }
        if next.len() > params.frontier_cap {
            return MembershipVerdict::Unknown(UnknownReason::Frontier);
        }
        frontier = next;
    }
    MembershipVerdict::VerifiedToHeight(params.height)
}

fn cached(src: &SourceRef) -> SourceRef {
    Rc::new(CachedSource::new(src.clone()))
}

/// Membership of `src` in `t`, by the check matching `t`'s polarity.
pub fn check_type(
    ds: &ValidatedSystem,
    t: TypeId,
    src: &SourceRef,
    params: &CheckParams,
) -> MembershipVerdict {
    check_type_inner(ds, t, cached(src), params)
}

fn check_type_inner(
    ds: &ValidatedSystem,
    t: TypeId,
    src: SourceRef,
    params: &CheckParams,
) -> MembershipVerdict {
    match ds.polarity(t) {
        Polarity::Inductive => inductive(ds, t, src, params),
        Polarity::Coinductive => coinductive(ds, t, src, params),
    }
}

/// The merging program `eq` over `vocab` extended by a fresh nullary `ξ`:
/// `eq(c(x⃗), c(y⃗)) = c(eq(x1,y1), …)` and `eq(c(x⃗), d(y⃗)) = ξ` for `c ≠ d`.
#[derive(Debug, Clone)]
pub struct EqProgram {
    pub program: Arc<Program>,
    pub function: FunctionId,
    pub xi: CtorId,
}

impl EqProgram {
    pub fn vocab(&self) -> &Arc<Vocabulary> {
        self.program.vocab()
    }
}

pub fn eq_program(vocab: &Vocabulary) -> EqProgram {
    let xi_name = vocab.fresh_name("ξ");
    let (extended, xi) = vocab.extended_with(&xi_name, 0).expect("fresh name");
    let mut fname = String::from("eq");
    while extended.lookup(&fname).is_some() {
        fname.push('\'');
    }
    let eq = FunctionId::new(&fname, 2);
    let vars = |prefix: &str, n: usize| -> Vec<Term> {
        (1..=n)
            .map(|i| Term::var(&format!("{prefix}{i}")))
            .collect()
    };
    let mut equations = Vec::new();
    for (c, cc) in extended.iter() {
        for (d, dc) in extended.iter() {
            let xs = vars("x", cc.arity);
            let ys = vars("y", dc.arity);
            let rhs = if c == d {
                Term::ctor(
                    c,
                    xs.iter()
                        .zip(&ys)
                        .map(|(x, y)| Term::app(&eq, vec![x.clone(), y.clone()]))
                        .collect(),
                )
            } else {
                Term::ctor(xi, vec![])
            };
            equations.push(ProgramEquation::new(
                eq.clone(),
                vec![Term::ctor(c, xs), Term::ctor(d, ys)],
                rhs,
            ));
        }
    }
    let program = Program::new(Arc::new(extended), equations, Some(&fname))
        .expect("eq program is well formed");
    EqProgram {
        program: Arc::new(program),
        function: eq,
        xi,
    }
}

/// `a ≐_D b`, decided as membership of `eq(a, b)` in `d`.
pub fn typed_eq(
    ds: &ValidatedSystem,
    d: TypeId,
    a: &SourceRef,
    b: &SourceRef,
    params: &CheckParams,
) -> MembershipVerdict {
    let eq = eq_program(ds.vocab());
    let env = Valuation::of([("x", a.clone()), ("y", b.clone())]);
    let term = Term::app(&eq.function, vec![Term::var("x"), Term::var("y")]);
    let src = as_source(eq.program.clone(), env, term, params.eval);
    check_type(ds, d, &src, params)
}

/// Evidence for one sample of a typing claim `D(x) → E(f(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub input: MembershipVerdict,
    pub output: MembershipVerdict,
}

/// Checks the claim `from(x) → to(f(x))` on each sample. Every sample must
/// itself be positively of type `from`.
pub fn check_program_type(
    ds: &ValidatedSystem,
    program: &Arc<Program>,
    f: &FunctionId,
    from: TypeId,
    to: TypeId,
    samples: &[SourceRef],
    params: &CheckParams,
) -> Result<Vec<SampleReport>, TypeCheckError> {
    if f.arity != 1 {
        return Err(TypeCheckError::ClaimArity {
            function: f.name.to_string(),
            arity: f.arity,
        });
    }
    let mut reports = Vec::with_capacity(samples.len());
    for (index, sample) in samples.iter().enumerate() {
        let input = check_type(ds, from, sample, params);
        if !input.is_positive() {
            return Err(TypeCheckError::SampleNotOfClaimedInputType {
                index,
                verdict: input,
            });
        }
        let env = Valuation::of([("v", sample.clone())]);
        let out = as_source(
            program.clone(),
            env,
            Term::app(f, vec![Term::var("v")]),
            params.eval,
        );
        let output = check_type(ds, to, &out, params);
        reports.push(SampleReport { input, output });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasystem::{validate, BundleDef, DataSystem, RuleDef, StatementDef};
    use crate::source::{LiteralSource, OpaqueSource};
    use crate::term::DataTerm;

    fn st(c: &str, comps: &[&str]) -> StatementDef {
        StatementDef::Constructor {
            ctor: c.into(),
            components: comps.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn build(c: &str, target: &str, comps: &[&str]) -> RuleDef {
        RuleDef::Construction {
            target: target.into(),
            body: st(c, comps),
        }
    }

    fn decon(source: &str, ds: Vec<StatementDef>) -> RuleDef {
        RuleDef::Deconstruction {
            source: source.into(),
            disjuncts: ds,
        }
    }

    fn words_vocab() -> Arc<Vocabulary> {
        Arc::new(Vocabulary::new([("e", 0), ("0", 1), ("1", 1)]).unwrap())
    }

    fn ze() -> ValidatedSystem {
        validate(&DataSystem {
            name: "ZE".into(),
            vocabulary: words_vocab(),
            bundles: vec![BundleDef {
                polarity: Polarity::Inductive,
                types: vec!["Z".into(), "E".into()],
                rules: vec![
                    build("e", "Z", &[]),
                    build("0", "Z", &["Z"]),
                    build("1", "E", &["Z"]),
                    build("0", "Z", &["E"]),
                ],
            }],
        })
        .unwrap()
    }

    fn word(v: &Vocabulary, s: &str) -> SourceRef {
        let mut t = DataTerm::leaf(v.lookup("e").unwrap());
        for ch in s.chars().rev() {
            t = DataTerm::node(v.lookup(&ch.to_string()).unwrap(), vec![t]);
        }
        LiteralSource::shared(t)
    }

    #[test]
    fn inductive_examples() {
        let ds = ze();
        let z = ds.lookup_type("Z").unwrap();
        let p = CheckParams::default();
        let v = ds.vocab().clone();
        for (w, positive) in [
            ("010", true),
            ("", true),
            ("11", false),
            ("0110", false),
            ("1", false),
        ] {
            let src = word(&v, w);
            let verdict = check_inductive(&ds, z, &src, &p).unwrap();
            assert_eq!(verdict.is_positive(), positive, "{w}");
            if let MembershipVerdict::Derived(d) = &verdict {
                assert!(verify_derivation(&ds, &*src, d));
            } else {
                assert!(verdict.is_refuted());
            }
        }
    }

    #[test]
    fn tampered_derivation_fails_verification() {
        let ds = ze();
        let z = ds.lookup_type("Z").unwrap();
        let src = word(ds.vocab(), "010");
        let MembershipVerdict::Derived(d) =
            check_inductive(&ds, z, &src, &CheckParams::default()).unwrap()
        else {
            panic!("expected a derivation")
        };
        let mut bad = (*d).clone();
        bad.disjunct = 0;
        assert!(!verify_derivation(&ds, &*src, &bad));
        let other = word(ds.vocab(), "000");
        assert!(!verify_derivation(&ds, &*other, &d));
    }

    #[test]
    fn unknown_source_is_unknown() {
        let ds = ze();
        let z = ds.lookup_type("Z").unwrap();
        let src: SourceRef = Rc::new(OpaqueSource(UnknownReason::Fuel));
        assert_eq!(
            check_type(&ds, z, &src, &CheckParams::default()),
            MembershipVerdict::Unknown(UnknownReason::Fuel)
        );
    }

    #[test]
    fn polarity_is_enforced() {
        let ds = ze();
        let z = ds.lookup_type("Z").unwrap();
        let src = word(ds.vocab(), "");
        assert!(matches!(
            check_coinductive(&ds, z, &src, &CheckParams::default()),
            Err(TypeCheckError::PolarityMismatch { .. })
        ));
        assert!(td_node(&ds, z, &[]).is_err());
    }

    /// The running example of the expansion-tree construction.
    fn running() -> ValidatedSystem {
        let v = Arc::new(Vocabulary::new([("0", 0), ("s", 1), ("f", 1), ("p", 2)]).unwrap());
        validate(&DataSystem {
            name: "Run".into(),
            vocabulary: v,
            bundles: vec![
                BundleDef {
                    polarity: Polarity::Inductive,
                    types: vec!["T".into()],
                    rules: vec![build("0", "T", &[]), build("s", "T", &["T"])],
                },
                BundleDef {
                    polarity: Polarity::Coinductive,
                    types: vec!["D".into(), "E".into()],
                    rules: vec![
                        decon(
                            "D",
                            vec![st("p", &["D", "E"]), st("p", &["T", "D"]), st("f", &["E"])],
                        ),
                        decon("E", vec![st("p", &["E", "D"])]),
                    ],
                },
            ],
        })
        .unwrap()
    }

    #[test]
    fn td_children_and_errors() {
        let ds = running();
        let d = ds.lookup_type("D").unwrap();
        let e = ds.lookup_type("E").unwrap();
        let root = td_node(&ds, d, &[]).unwrap();
        assert_eq!(root.display(&ds).to_string(), "D");
        assert_eq!(root.children(&ds).len(), 3);
        assert_eq!(td_node(&ds, e, &[]).unwrap().children(&ds).len(), 1);
        assert_eq!(
            td_node(&ds, e, &[0]).unwrap().display(&ds).to_string(),
            "E=p(E, D)"
        );
        assert_eq!(
            td_node(&ds, d, &[1]).unwrap().display(&ds).to_string(),
            "D=p([T], D)"
        );
        // Breadth-first: the leaf at ⟨0⟩ is expanded before ⟨1⟩.
        assert_eq!(
            td_node(&ds, d, &[0, 2]).unwrap().display(&ds).to_string(),
            "D=p(D=f(E), E)"
        );
        assert_eq!(
            td_node(&ds, d, &[0, 3]),
            Err(TypeCheckError::ChoiceOutOfRange {
                step: 1,
                choice: 3,
                available: 3
            })
        );
    }

    fn cycle(v: &Vocabulary, names: &[&str]) -> SourceRef {
        struct Cycle(Vec<CtorId>);
        impl HyperTermSource for Cycle {
            fn query(&self, addr: &Address) -> ConstructorQuery {
                if addr.steps().iter().any(|&s| s != 0) {
                    return ConstructorQuery::OutOfRange;
                }
                ConstructorQuery::Known(self.0[addr.len() % self.0.len()])
            }
        }
        Rc::new(Cycle(names.iter().map(|n| v.lookup(n).unwrap()).collect()))
    }

    fn omega_words() -> ValidatedSystem {
        validate(&DataSystem {
            name: "W".into(),
            vocabulary: words_vocab(),
            bundles: vec![BundleDef {
                polarity: Polarity::Coinductive,
                types: vec!["W".into()],
                rules: vec![decon("W", vec![st("0", &["W"]), st("1", &["W"])])],
            }],
        })
        .unwrap()
    }

    #[test]
    fn consistency_examples() {
        let ds = omega_words();
        let w = ds.lookup_type("W").unwrap();
        let p = CheckParams::default();
        let alt = cycle(ds.vocab(), &["0", "1"]);
        assert_eq!(
            consistent(&ds, &td_node(&ds, w, &[]).unwrap(), &alt, &p),
            Verdict3::Yes
        );
        assert_eq!(
            consistent(&ds, &td_node(&ds, w, &[0, 1]).unwrap(), &alt, &p),
            Verdict3::Yes
        );
        match consistent(&ds, &td_node(&ds, w, &[1]).unwrap(), &alt, &p) {
            Verdict3::No(m) => assert!(m.address().is_root()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coinductive_verify_and_refute() {
        let ds = omega_words();
        let w = ds.lookup_type("W").unwrap();
        let p = CheckParams {
            height: 16,
            ..CheckParams::default()
        };
        let alt = cycle(ds.vocab(), &["0", "1"]);
        assert_eq!(
            check_type(&ds, w, &alt, &p),
            MembershipVerdict::VerifiedToHeight(16)
        );
        // A finite word is not an ω-word: it ends in e.
        let fin = word(ds.vocab(), "01");
        assert!(check_type(&ds, w, &fin, &p).is_refuted());
        let opaque: SourceRef = Rc::new(OpaqueSource(UnknownReason::Stuck));
        assert_eq!(
            check_type(&ds, w, &opaque, &p),
            MembershipVerdict::Unknown(UnknownReason::Stuck)
        );
    }

    #[test]
    fn lower_rank_leaves_are_checked() {
        let ds = running();
        let d = ds.lookup_type("D").unwrap();
        let v = ds.vocab().clone();
        let zero = DataTerm::leaf(v.lookup("0").unwrap());
        let p_ = v.lookup("p").unwrap();
        // p(0, p(0, …)) is in D through the second disjunct.
        struct Spine(CtorId, CtorId);
        impl HyperTermSource for Spine {
            fn query(&self, addr: &Address) -> ConstructorQuery {
                match addr.steps().split_last() {
                    None => ConstructorQuery::Known(self.0),
                    Some((&0, init)) if init.iter().all(|&s| s == 1) => {
                        ConstructorQuery::Known(self.1)
                    }
                    Some((&1, init)) if init.iter().all(|&s| s == 1) => {
                        ConstructorQuery::Known(self.0)
                    }
                    _ => ConstructorQuery::OutOfRange,
                }
            }
        }
        let good: SourceRef = Rc::new(Spine(p_, zero.ctor));
        let p = CheckParams {
            height: 12,
            ..CheckParams::default()
        };
        assert_eq!(
            check_type(&ds, d, &good, &p),
            MembershipVerdict::VerifiedToHeight(12)
        );
        // f(f(…)) needs E below f, and E only admits p.
        let bad = cycle(&v, &["f"]);
        assert!(check_type(&ds, d, &bad, &p).is_refuted());
    }

    #[test]
    fn incremental_consistency_agrees_with_full_check() {
        let ds = running();
        let d = ds.lookup_type("D").unwrap();
        let v = ds.vocab().clone();
        struct Spine(CtorId, CtorId);
        impl HyperTermSource for Spine {
            fn query(&self, addr: &Address) -> ConstructorQuery {
                match addr.steps().last() {
                    None | Some(1) => ConstructorQuery::Known(self.0),
                    Some(_) if addr.steps()[..addr.len() - 1].iter().all(|&s| s == 1) => {
                        ConstructorQuery::Known(self.1)
                    }
                    _ => ConstructorQuery::OutOfRange,
                }
            }
        }
        let src: SourceRef = Rc::new(Spine(v.lookup("p").unwrap(), v.lookup("0").unwrap()));
        let p = CheckParams::default();
        let mut level = vec![ExpansionNode::root(d)];
        for _ in 0..4 {
            let mut next = Vec::new();
            for node in &level {
                for child in node.children(&ds) {
                    let full = consistent(&ds, &child, &src, &p);
                    let mut checker = Checker::new(&ds, cached(&src), p);
                    let parent = checker.consistency(node, 0, 0);
                    let step =
                        checker.consistency(&child, node.internal.len(), node.terminal.len());
                    let combined = match (parent, step) {
                        (Verdict3::No(m), _) | (Verdict3::Yes, Verdict3::No(m)) => Verdict3::No(m),
                        (Verdict3::Yes, s) => s,
                        (u, _) => u,
                    };
                    assert_eq!(
                        full == Verdict3::Yes,
                        combined == Verdict3::Yes,
                        "{}",
                        child.display(&ds)
                    );
                    next.push(child);
                }
            }
            level = next;
        }
    }

    #[test]
    fn eq_program_merges() {
        let v = words_vocab();
        let eq = eq_program(&v);
        assert_eq!(eq.vocab().name(eq.xi), "ξ");
        assert_eq!(eq.program.user_equations().len(), 16);
        let ds = omega_words();
        let w = ds.lookup_type("W").unwrap();
        let alt = cycle(&v, &["0", "1"]);
        let zeros = cycle(&v, &["0"]);
        let p = CheckParams {
            height: 8,
            ..CheckParams::default()
        };
        assert_eq!(
            typed_eq(&ds, w, &alt, &alt, &p),
            MembershipVerdict::VerifiedToHeight(8)
        );
        match typed_eq(&ds, w, &zeros, &alt, &p) {
            MembershipVerdict::Refuted {
                explanation:
                    Refutation::NoConsistentNode {
                        witness: Some(m), ..
                    },
                ..
            } => {
                assert_eq!(m.address(), &Address::from_steps([0]));
                assert!(
                    matches!(m, Mismatch::Constructors { right: ConstructorQuery::Known(c), .. } if c == eq.xi)
                );
            }
            other => panic!("{other:?}"),
        }
        let ze = ze();
        let z = ze.lookup_type("Z").unwrap();
        let e = word(&v, "");
        assert!(matches!(
            typed_eq(&ze, z, &e, &e, &p),
            MembershipVerdict::Derived(_)
        ));
    }

    #[test]
    fn claims_on_samples() {
        let v = words_vocab();
        let ds = omega_words();
        let w = ds.lookup_type("W").unwrap();
        let zero = v.lookup("0").unwrap();
        let one = v.lookup("1").unwrap();
        let tl = FunctionId::new("tl", 1);
        let y = Term::var("y");
        let prog = Arc::new(
            Program::new(
                v.clone(),
                vec![
                    ProgramEquation::new(
                        tl.clone(),
                        vec![Term::ctor(zero, vec![y.clone()])],
                        y.clone(),
                    ),
                    ProgramEquation::new(
                        tl.clone(),
                        vec![Term::ctor(one, vec![y.clone()])],
                        y.clone(),
                    ),
                ],
                None,
            )
            .unwrap(),
        );
        let p = CheckParams {
            height: 10,
            ..CheckParams::default()
        };
        let alt = cycle(&v, &["0", "1"]);
        let reports = check_program_type(&ds, &prog, &tl, w, w, &[alt], &p).unwrap();
        assert_eq!(reports[0].output, MembershipVerdict::VerifiedToHeight(10));
        let fin = word(&v, "0");
        assert!(matches!(
            check_program_type(&ds, &prog, &tl, w, w, &[fin], &p),
            Err(TypeCheckError::SampleNotOfClaimedInputType { index: 0, .. })
        ));
    }
}

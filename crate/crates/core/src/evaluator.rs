//! Lazy evaluation of program terms over hyper-terms.
//!
//! Terms are turned into a graph of shared thunks. Forcing a thunk to weak
//! head normal form rewrites it in place with the outermost applicable
//! equation, so every subcomputation runs at most once per session. Pattern
//! variables are bound to (suspended) argument nodes, never to evaluated
//! values, and arguments are forced only as far as [`match_equation`] asks.
//!
//! Valuation entries are hyper-term sources; their nodes are expanded one
//! address at a time, which is exactly the node-by-node information the
//! diagram of the valuation provides.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use crate::program::{match_equation, MatchOutcome, Program};
use crate::source::{ConstructorQuery, HyperTermSource, SourceRef, UnknownReason};
use crate::term::{Address, DataTerm, FunctionId, Term};
use crate::vocab::{CtorId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    /// Rewrite steps allowed per head query.
    pub fuel: usize,
    /// Longest address a session resolves.
    pub max_depth: usize,
    /// Keep the evaluated graph between queries of one source.
    pub memo: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fuel: 10_000,
            max_depth: 1024,
            memo: true,
        }
    }
}

impl EvalConfig {
    pub fn with_fuel(fuel: usize) -> Self {
        EvalConfig {
            fuel: fuel.max(1),
            ..EvalConfig::default()
        }
    }
}

/// Assignment of hyper-terms to variables.
#[derive(Clone, Default)]
pub struct Valuation {
    bindings: BTreeMap<Arc<str>, SourceRef>,
}

impl Valuation {
    pub fn new() -> Self {
        Valuation::default()
    }

    /// `[v1..vr ← t1..tr]`
    pub fn of<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, SourceRef)>,
        S: AsRef<str>,
    {
        let mut v = Valuation::new();
        for (name, src) in pairs {
            v.bind(name.as_ref(), src);
        }
        v
    }

    pub fn bind(&mut self, var: &str, src: SourceRef) {
        self.bindings.insert(Arc::from(var), src);
    }

    pub fn get(&self, var: &str) -> Option<&SourceRef> {
        self.bindings.get(var)
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(|k| &**k)
    }
}

impl fmt::Debug for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.bindings.keys()).finish()
    }
}

type NodeRef = Rc<Node>;

struct Node(RefCell<State>);

#[derive(Clone)]
enum State {
    Apply(FunctionId, Vec<NodeRef>),
    /// The subtree at an address of a valuation entry.
    External(SourceRef, Address),
    /// Rewritten to a variable: the node now stands for another node.
    Alias(NodeRef),
    Whnf(CtorId, Vec<NodeRef>),
    Stuck,
}

fn node(state: State) -> NodeRef {
    Rc::new(Node(RefCell::new(state)))
}

struct Machine<'p> {
    program: &'p Program,
    vocab: &'p Vocabulary,
}

type Head = (CtorId, Vec<NodeRef>);

impl<'p> Machine<'p> {
    fn new(program: &'p Program) -> Self {
        Machine {
            program,
            vocab: program.vocab(),
        }
    }

    fn build(&self, t: &Term, env: &Valuation) -> NodeRef {
        match t {
            Term::Var(v) => match env.get(v) {
                Some(src) => node(State::External(src.clone(), Address::root())),
                None => node(State::Stuck),
            },
            Term::Ctor(c, args) => node(State::Whnf(
                *c,
                args.iter().map(|a| self.build(a, env)).collect(),
            )),
            Term::Fun(f, args) => node(State::Apply(
                f.clone(),
                args.iter().map(|a| self.build(a, env)).collect(),
            )),
        }
    }

    fn literal(&self, t: &DataTerm) -> NodeRef {
        node(State::Whnf(
            t.ctor,
            t.args.iter().map(|a| self.literal(a)).collect(),
        ))
    }

    fn instantiate(&self, t: &Term, env: &HashMap<Arc<str>, NodeRef>) -> NodeRef {
        match t {
            Term::Var(v) => env[v].clone(),
            Term::Ctor(c, args) => node(State::Whnf(
                *c,
                args.iter().map(|a| self.instantiate(a, env)).collect(),
            )),
            Term::Fun(f, args) => node(State::Apply(
                f.clone(),
                args.iter().map(|a| self.instantiate(a, env)).collect(),
            )),
        }
    }

    /// The state that replaces a redex rewritten to `rhs`.
    fn instantiate_top(&self, rhs: &Term, env: &HashMap<Arc<str>, NodeRef>) -> State {
        match rhs {
            Term::Var(v) => State::Alias(env[v].clone()),
            Term::Ctor(c, args) => {
                State::Whnf(*c, args.iter().map(|a| self.instantiate(a, env)).collect())
            }
            Term::Fun(f, args) => State::Apply(
                f.clone(),
                args.iter().map(|a| self.instantiate(a, env)).collect(),
            ),
        }
    }

    /// The node at `addr` below `n`, without forcing anything.
    fn observed(n: &NodeRef, addr: &Address) -> Option<NodeRef> {
        let mut cur = n.clone();
        let mut steps = addr.steps().iter();
        loop {
            let next = match &*cur.0.borrow() {
                State::Alias(t) => Some(t.clone()),
                State::Whnf(_, kids) => match steps.next() {
                    None => return Some(cur.clone()),
                    Some(&i) => Some(kids.get(i)?.clone()),
                },
                _ if steps.len() == 0 => return Some(cur.clone()),
                _ => None,
            };
            cur = next?;
        }
    }

    fn observed_ctor(n: &NodeRef, addr: &Address) -> Option<CtorId> {
        let target = Self::observed(n, addr)?;
        let state = target.0.borrow();
        match &*state {
            State::Whnf(c, _) => Some(*c),
            _ => None,
        }
    }

    fn whnf(&self, n: &NodeRef, fuel: &mut usize) -> Result<Head, UnknownReason> {
        stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || self.whnf_inner(n, fuel))
    }

    fn whnf_inner(&self, n: &NodeRef, fuel: &mut usize) -> Result<Head, UnknownReason> {
        loop {
            let state = n.0.borrow().clone();
            match state {
                State::Whnf(c, kids) => return Ok((c, kids)),
                State::Stuck => return Err(UnknownReason::Stuck),
                State::Alias(target) => {
                    let head = self.whnf(&target, fuel)?;
                    *n.0.borrow_mut() = State::Whnf(head.0, head.1.clone());
                    return Ok(head);
                }
                State::External(src, addr) => match src.query(&addr) {
                    ConstructorQuery::Known(c) => {
                        let kids: Vec<NodeRef> = (0..self.vocab.arity(c))
                            .map(|i| node(State::External(src.clone(), addr.child(i))))
                            .collect();
                        *n.0.borrow_mut() = State::Whnf(c, kids.clone());
                        return Ok((c, kids));
                    }
                    ConstructorQuery::OutOfRange => {
                        *n.0.borrow_mut() = State::Stuck;
                        return Err(UnknownReason::Stuck);
                    }
                    ConstructorQuery::Unknown(r) => return Err(r),
                },
                State::Apply(f, args) => {
                    let outcome = match_equation(self.program, &f.name, &mut |arg, addr| {
                        Self::observed_ctor(args.get(arg)?, addr)
                    });
                    match outcome {
                        MatchOutcome::NeedMore { arg, address } => {
                            let target = Self::observed(&args[arg], &address)
                                .expect("match driver asks below observed constructors only");
                            self.whnf(&target, fuel)?;
                        }
                        MatchOutcome::NoMatch => {
                            *n.0.borrow_mut() = State::Stuck;
                            return Err(UnknownReason::Stuck);
                        }
                        MatchOutcome::Matched { equation, bindings } => {
                            if *fuel == 0 {
                                return Err(UnknownReason::Fuel);
                            }
                            *fuel -= 1;
                            let env: HashMap<Arc<str>, NodeRef> = bindings
                                .into_iter()
                                .map(|b| {
                                    let target = Self::observed(&args[b.arg], &b.address)
                                        .expect("bound subterms lie below matched constructors");
                                    (b.var, target)
                                })
                                .collect();
                            let next = self.instantiate_top(&equation.rhs, &env);
                            *n.0.borrow_mut() = next;
                        }
                    }
                }
            }
        }
    }

    fn resolve(&self, root: &NodeRef, addr: &Address, cfg: &EvalConfig) -> ConstructorQuery {
        if addr.len() > cfg.max_depth {
            return ConstructorQuery::Unknown(UnknownReason::Depth);
        }
        let mut cur = root.clone();
        for &step in addr.steps() {
            let mut fuel = cfg.fuel;
            match self.whnf(&cur, &mut fuel) {
                Ok((_, kids)) => match kids.get(step) {
                    Some(k) => cur = k.clone(),
                    None => return ConstructorQuery::OutOfRange,
                },
                Err(r) => return ConstructorQuery::Unknown(r),
            }
        }
        let mut fuel = cfg.fuel;
        match self.whnf(&cur, &mut fuel) {
            Ok((c, _)) => ConstructorQuery::Known(c),
            Err(r) => ConstructorQuery::Unknown(r),
        }
    }

    fn normalize(&self, n: &NodeRef, fuel: &mut usize) -> Result<DataTerm, UnknownReason> {
        stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || {
            let (c, kids) = self.whnf(n, fuel)?;
            let args = kids
                .iter()
                .map(|k| self.normalize(k, fuel))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(DataTerm::node(c, args))
        })
    }
}

/// Head constructor of `t` under `env`.
pub fn eval_head(
    program: &Program,
    env: &Valuation,
    t: &Term,
    cfg: &EvalConfig,
) -> ConstructorQuery {
    eval_at(program, env, t, &Address::root(), cfg)
}

/// Constructor of `t` at `addr`, computed by descending through head normal
/// forms. Each head query along the way gets `cfg.fuel` rewrite steps.
pub fn eval_at(
    program: &Program,
    env: &Valuation,
    t: &Term,
    addr: &Address,
    cfg: &EvalConfig,
) -> ConstructorQuery {
    let m = Machine::new(program);
    let root = m.build(t, env);
    m.resolve(&root, addr, cfg)
}

/// The hyper-term denoted by a program term, as a source.
pub struct ProgramSource {
    program: Arc<Program>,
    env: Valuation,
    term: Term,
    cfg: EvalConfig,
    graph: RefCell<Option<NodeRef>>,
    answers: RefCell<HashMap<Address, ConstructorQuery>>,
}

impl ProgramSource {
    pub fn new(program: Arc<Program>, env: Valuation, term: Term, cfg: EvalConfig) -> Self {
        ProgramSource {
            program,
            env,
            term,
            cfg,
            graph: RefCell::new(None),
            answers: RefCell::new(HashMap::new()),
        }
    }

    pub fn program(&self) -> &Arc<Program> {
        &self.program
    }
}

impl HyperTermSource for ProgramSource {
    fn query(&self, addr: &Address) -> ConstructorQuery {
        let m = Machine::new(&self.program);
        if !self.cfg.memo {
            let root = m.build(&self.term, &self.env);
            return m.resolve(&root, addr, &self.cfg);
        }
        if let Some(q) = self.answers.borrow().get(addr) {
            return *q;
        }
        let root = self
            .graph
            .borrow_mut()
            .get_or_insert_with(|| m.build(&self.term, &self.env))
            .clone();
        let q = m.resolve(&root, addr, &self.cfg);
        // Unknown answers may still be resolved by a later query that
        // resumes the partially rewritten graph.
        if !matches!(q, ConstructorQuery::Unknown(_)) {
            self.answers.borrow_mut().insert(addr.clone(), q);
        }
        q
    }
}

pub fn as_source(program: Arc<Program>, env: Valuation, t: Term, cfg: EvalConfig) -> SourceRef {
    Rc::new(ProgramSource::new(program, env, t, cfg))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FiniteOutcome {
    Value(DataTerm),
    /// No equation applies somewhere along the way.
    Stuck,
    OutOfFuel,
}

/// Rewrites `f(args)` outermost-first until a data-term is reached, using at
/// most `step_bound` rewrite steps in total.
pub fn finite_eval(
    program: &Program,
    f: &FunctionId,
    args: &[DataTerm],
    step_bound: usize,
) -> FiniteOutcome {
    let m = Machine::new(program);
    let root = node(State::Apply(
        f.clone(),
        args.iter().map(|a| m.literal(a)).collect(),
    ));
    let mut fuel = step_bound;
    match m.normalize(&root, &mut fuel) {
        Ok(t) => FiniteOutcome::Value(t),
        Err(UnknownReason::Stuck) => FiniteOutcome::Stuck,
        Err(_) => FiniteOutcome::OutOfFuel,
    }
}

/// Finite evidence that two hyper-terms differ, or that a hyper-term does
/// not fit a typing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    Constructors {
        address: Address,
        left: ConstructorQuery,
        right: ConstructorQuery,
    },
    LowerRank {
        address: Address,
        type_name: String,
    },
}

impl Mismatch {
    pub fn address(&self) -> &Address {
        match self {
            Mismatch::Constructors { address, .. } | Mismatch::LowerRank { address, .. } => address,
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        crate::term::Rendered(move |f: &mut fmt::Formatter<'_>| match self {
            Mismatch::Constructors {
                address,
                left,
                right,
            } => write!(
                f,
                "at {address}: {} vs {}",
                left.display(vocab),
                right.display(vocab)
            ),
            Mismatch::LowerRank { address, type_name } => {
                write!(f, "at {address}: subterm is not of type {type_name}")
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict3 {
    Yes,
    No(Mismatch),
    Unknown(UnknownReason),
}

/// Compares two hyper-terms on every address of length at most `depth`.
pub fn locally_equal_sources(
    left: &dyn HyperTermSource,
    right: &dyn HyperTermSource,
    vocab: &Vocabulary,
    depth: usize,
) -> Verdict3 {
    let mut unknown = None;
    let mut queue = VecDeque::from([Address::root()]);
    while let Some(addr) = queue.pop_front() {
        let (l, r) = (left.query(&addr), right.query(&addr));
        match (l, r) {
            (ConstructorQuery::Known(a), ConstructorQuery::Known(b)) if a == b => {
                if addr.len() < depth {
                    queue.extend((0..vocab.arity(a)).map(|i| addr.child(i)));
                }
            }
            (ConstructorQuery::OutOfRange, ConstructorQuery::OutOfRange) => {}
            (ConstructorQuery::Unknown(reason), _) | (_, ConstructorQuery::Unknown(reason)) => {
                unknown.get_or_insert(reason);
            }
            _ => {
                return Verdict3::No(Mismatch::Constructors {
                    address: addr,
                    left: l,
                    right: r,
                })
            }
        }
    }
    match unknown {
        Some(r) => Verdict3::Unknown(r),
        None => Verdict3::Yes,
    }
}

/// Local equality `t = q` checked to the given depth.
pub fn locally_equal(
    program: &Arc<Program>,
    env: &Valuation,
    t: &Term,
    q: &Term,
    depth: usize,
    cfg: &EvalConfig,
) -> Verdict3 {
    let left = ProgramSource::new(program.clone(), env.clone(), t.clone(), *cfg);
    let right = ProgramSource::new(program.clone(), env.clone(), q.clone(), *cfg);
    locally_equal_sources(&left, &right, program.vocab(), depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{destructor_function, ProgramEquation};
    use crate::source::{prefix, FinitePrefix, LiteralSource, OpaqueSource};

    struct Fixture {
        vocab: Arc<Vocabulary>,
        program: Arc<Program>,
    }

    impl Fixture {
        fn c(&self, n: &str) -> CtorId {
            self.vocab.lookup(n).unwrap()
        }
        fn f(&self, n: &str) -> FunctionId {
            self.program.function(n).unwrap().clone()
        }
    }

    /// Words over unary 0/1 and nat over s, with `i = s(i)`, `w = 0(1(w))`,
    /// `z = 0(z)`, the looping `g` and `add`.
    fn fixture() -> Fixture {
        let vocab =
            Arc::new(Vocabulary::new([("e", 0), ("0", 1), ("1", 1), ("s", 1), ("z", 0)]).unwrap());
        let c = |n: &str| vocab.lookup(n).unwrap();
        let i = FunctionId::new("i", 0);
        let w = FunctionId::new("w", 0);
        let zs = FunctionId::new("zs", 0);
        let g = FunctionId::new("g", 1);
        let add = FunctionId::new("add", 2);
        let eqs = vec![
            ProgramEquation::new(
                i.clone(),
                vec![],
                Term::Ctor(c("s"), vec![Term::app(&i, vec![])]),
            ),
            ProgramEquation::new(
                w.clone(),
                vec![],
                Term::Ctor(
                    c("0"),
                    vec![Term::Ctor(c("1"), vec![Term::app(&w, vec![])])],
                ),
            ),
            ProgramEquation::new(
                zs.clone(),
                vec![],
                Term::Ctor(c("0"), vec![Term::app(&zs, vec![])]),
            ),
            ProgramEquation::new(
                g.clone(),
                vec![Term::Ctor(c("0"), vec![Term::var("y")])],
                Term::app(&g, vec![Term::var("y")]),
            ),
            ProgramEquation::new(
                add.clone(),
                vec![Term::Ctor(c("z"), vec![]), Term::var("y")],
                Term::var("y"),
            ),
            ProgramEquation::new(
                add.clone(),
                vec![Term::Ctor(c("s"), vec![Term::var("x")]), Term::var("y")],
                Term::Ctor(
                    c("s"),
                    vec![Term::app(&add, vec![Term::var("x"), Term::var("y")])],
                ),
            ),
        ];
        let program = Arc::new(Program::new(vocab.clone(), eqs, None).unwrap());
        Fixture { vocab, program }
    }

    fn nat(fx: &Fixture, n: usize) -> DataTerm {
        (0..n).fold(DataTerm::leaf(fx.c("z")), |t, _| {
            DataTerm::node(fx.c("s"), vec![t])
        })
    }

    #[test]
    fn s_omega_head_and_depth() {
        let fx = fixture();
        let cfg = EvalConfig::default();
        let i = Term::app(&fx.f("i"), vec![]);
        let env = Valuation::new();
        assert_eq!(
            eval_head(&fx.program, &env, &i, &cfg),
            ConstructorQuery::Known(fx.c("s"))
        );
        assert_eq!(
            eval_at(&fx.program, &env, &i, &Address::zeros(10), &cfg),
            ConstructorQuery::Known(fx.c("s"))
        );
        assert_eq!(
            eval_at(&fx.program, &env, &i, &Address::from_steps([1]), &cfg),
            ConstructorQuery::OutOfRange
        );
    }

    #[test]
    fn variables_consult_the_valuation() {
        let fx = fixture();
        let w = as_source(
            fx.program.clone(),
            Valuation::new(),
            Term::app(&fx.f("w"), vec![]),
            EvalConfig::default(),
        );
        let env = Valuation::of([("v", w)]);
        let cfg = EvalConfig::default();
        assert_eq!(
            eval_head(&fx.program, &env, &Term::var("v"), &cfg),
            ConstructorQuery::Known(fx.c("0"))
        );
        assert_eq!(
            eval_at(&fx.program, &env, &Term::var("v"), &Address::zeros(3), &cfg),
            ConstructorQuery::Known(fx.c("1"))
        );
    }

    #[test]
    fn looping_program_runs_out_of_fuel() {
        let fx = fixture();
        let zs = as_source(
            fx.program.clone(),
            Valuation::new(),
            Term::app(&fx.f("zs"), vec![]),
            EvalConfig::default(),
        );
        let env = Valuation::of([("v", zs)]);
        let t = Term::app(&fx.f("g"), vec![Term::var("v")]);
        for fuel in [1, 10, 500] {
            assert_eq!(
                eval_head(&fx.program, &env, &t, &EvalConfig::with_fuel(fuel)),
                ConstructorQuery::Unknown(UnknownReason::Fuel)
            );
        }
        let src = as_source(fx.program.clone(), env, t, EvalConfig::with_fuel(100));
        assert_eq!(
            src.query(&Address::root()),
            ConstructorQuery::Unknown(UnknownReason::Fuel)
        );
    }

    #[test]
    fn literal_terms_and_out_of_range() {
        let fx = fixture();
        let cfg = EvalConfig::default();
        let env = Valuation::new();
        let s0 = Term::Ctor(fx.c("s"), vec![Term::Ctor(fx.c("z"), vec![])]);
        assert_eq!(
            eval_at(&fx.program, &env, &s0, &Address::from_steps([0]), &cfg),
            ConstructorQuery::Known(fx.c("z"))
        );
        let e = Term::Ctor(fx.c("e"), vec![]);
        assert_eq!(
            eval_at(&fx.program, &env, &e, &Address::from_steps([0]), &cfg),
            ConstructorQuery::OutOfRange
        );
        let d = nat(&fx, 3);
        let src = as_source(fx.program.clone(), env, d.to_term(), cfg);
        assert_eq!(
            prefix(&*src, &fx.vocab, 10),
            prefix(&LiteralSource::new(d), &fx.vocab, 10)
        );
    }

    #[test]
    fn depth_limit() {
        let fx = fixture();
        let cfg = EvalConfig {
            max_depth: 4,
            ..EvalConfig::default()
        };
        let i = Term::app(&fx.f("i"), vec![]);
        assert_eq!(
            eval_at(&fx.program, &Valuation::new(), &i, &Address::zeros(5), &cfg),
            ConstructorQuery::Unknown(UnknownReason::Depth)
        );
    }

    #[test]
    fn as_source_prefix_of_s_omega() {
        let fx = fixture();
        let src = as_source(
            fx.program.clone(),
            Valuation::new(),
            Term::app(&fx.f("i"), vec![]),
            EvalConfig::default(),
        );
        let s = fx.c("s");
        let expected = FinitePrefix::Known(
            s,
            vec![FinitePrefix::Known(
                s,
                vec![FinitePrefix::Known(s, vec![FinitePrefix::Unexplored])],
            )],
        );
        assert_eq!(prefix(&*src, &fx.vocab, 3), expected);
    }

    #[test]
    fn finite_eval_add() {
        let fx = fixture();
        let add = fx.f("add");
        assert_eq!(
            finite_eval(&fx.program, &add, &[nat(&fx, 2), nat(&fx, 1)], 100),
            FiniteOutcome::Value(nat(&fx, 3))
        );
        let e = DataTerm::leaf(fx.c("e"));
        assert_eq!(
            finite_eval(&fx.program, &add, &[e.clone(), e.clone()], 100),
            FiniteOutcome::Stuck
        );
        let g = fx.f("g");
        let zero_e = DataTerm::node(fx.c("0"), vec![e.clone()]);
        assert_eq!(
            finite_eval(&fx.program, &g, &[zero_e], 100),
            FiniteOutcome::Stuck
        );
        let i = fx.f("i");
        assert_eq!(
            finite_eval(&fx.program, &i, &[], 1000),
            FiniteOutcome::OutOfFuel
        );
    }

    #[test]
    fn destructors_rewrite() {
        let vocab = Arc::new(Vocabulary::new([("e", 0), ("0", 1), ("p", 2)]).unwrap());
        let program = Program::new(vocab.clone(), vec![], None).unwrap();
        let c = |n: &str| vocab.lookup(n).unwrap();
        let t = DataTerm::node(
            c("p"),
            vec![
                DataTerm::leaf(c("e")),
                DataTerm::node(c("0"), vec![DataTerm::leaf(c("e"))]),
            ],
        );
        assert_eq!(
            finite_eval(
                &program,
                &destructor_function(1, 2),
                std::slice::from_ref(&t),
                10
            ),
            FiniteOutcome::Value(DataTerm::leaf(c("e")))
        );
        assert_eq!(
            finite_eval(
                &program,
                &destructor_function(2, 2),
                &[t.args[1].clone()],
                10
            ),
            FiniteOutcome::Value(t.args[1].clone())
        );
    }

    #[test]
    fn local_equality() {
        let fx = fixture();
        let cfg = EvalConfig::default();
        let env = Valuation::new();
        let i = Term::app(&fx.f("i"), vec![]);
        let si = Term::Ctor(fx.c("s"), vec![i.clone()]);
        assert_eq!(
            locally_equal(&fx.program, &env, &i, &si, 10, &cfg),
            Verdict3::Yes
        );
        assert_eq!(
            locally_equal(&fx.program, &env, &i, &i, 25, &cfg),
            Verdict3::Yes
        );
        let zs = Term::app(&fx.f("zs"), vec![]);
        let w = Term::app(&fx.f("w"), vec![]);
        assert_eq!(
            locally_equal(&fx.program, &env, &zs, &w, 3, &cfg),
            Verdict3::No(Mismatch::Constructors {
                address: Address::from_steps([0]),
                left: ConstructorQuery::Known(fx.c("0")),
                right: ConstructorQuery::Known(fx.c("1")),
            })
        );
        let opaque: SourceRef = Rc::new(OpaqueSource(UnknownReason::Fuel));
        assert_eq!(
            locally_equal_sources(&*opaque, &*opaque, &fx.vocab, 3),
            Verdict3::Unknown(UnknownReason::Fuel)
        );
    }

    #[test]
    fn memo_and_fresh_sessions_agree() {
        let fx = fixture();
        let w = Term::app(&fx.f("w"), vec![]);
        let memo = ProgramSource::new(
            fx.program.clone(),
            Valuation::new(),
            w.clone(),
            EvalConfig::default(),
        );
        let fresh = ProgramSource::new(
            fx.program.clone(),
            Valuation::new(),
            w,
            EvalConfig {
                memo: false,
                ..EvalConfig::default()
            },
        );
        for n in (0..40).rev() {
            assert_eq!(
                memo.query(&Address::zeros(n)),
                fresh.query(&Address::zeros(n))
            );
        }
    }
}

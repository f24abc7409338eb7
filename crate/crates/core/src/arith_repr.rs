//! Hyper-terms as partial numeric functions from address codes to
//! constructor codes.
//!
//! Address coding (frozen; dumps depend on it):
//!
//! * `pair(x, y) = (x + y)(x + y + 1)/2 + y` is the Cantor pairing.
//! * `⟨⟩` encodes to `0`.
//! * `⟨a0 … a(k-1)⟩` with `k ≥ 1` and `β = max(ai) + 2` encodes to
//!   `pair(k, pair(β - 2, D))` where `D = Σ ai·β^i`.
//!
//! A number decodes only if it lies in the image: `k = 0` forces the inner
//! pair to be `0`, and otherwise the largest of the `k` base-`β` digits of
//! `D` must be exactly `β - 2`, with `D < β^k`.
//!
//! Constructor codes are the 1-based positions in the vocabulary; `0` is
//! never a constructor code.

use std::fmt::Write as _;
use std::rc::Rc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::source::{ConstructorQuery, FinitePrefix, HyperTermSource, SourceRef, UnknownReason};
use crate::term::Address;
use crate::vocab::{CtorId, Vocabulary};

/// Longest address a code may describe.
const MAX_DECODED_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReprError {
    #[error("{0} is not an address code: {1}")]
    DecodeError(BigUint, &'static str),
    #[error("invalid representation at {0}")]
    InvalidRepresentation(Address),
    #[error("constructor `{ctor}` takes {expected} arguments, got {found}")]
    ArityMismatch {
        ctor: String,
        expected: usize,
        found: usize,
    },
}

pub fn pair(x: &BigUint, y: &BigUint) -> BigUint {
    let s = x + y;
    ((&s * (&s + 1u32)) >> 1usize) + y
}

pub fn unpair(z: &BigUint) -> (BigUint, BigUint) {
    // w = ⌊(√(8z+1) − 1)/2⌋ is the diagonal holding z.
    let w = (((z << 3usize) + 1u32).sqrt() - 1u32) >> 1usize;
    let t = (&w * (&w + 1u32)) >> 1usize;
    let y = z - t;
    let x = w - &y;
    (x, y)
}

pub fn encode_address(a: &Address) -> BigUint {
    let steps = a.steps();
    let Some(&max) = steps.iter().max() else {
        return BigUint::zero();
    };
    let beta = BigUint::from(max) + 2u32;
    let digits = steps
        .iter()
        .rev()
        .fold(BigUint::zero(), |acc, &d| acc * &beta + BigUint::from(d));
    pair(&BigUint::from(steps.len()), &pair(&(beta - 2u32), &digits))
}

pub fn decode_address(n: &BigUint) -> Result<Address, ReprError> {
    let err = |why| ReprError::DecodeError(n.clone(), why);
    let (k, rest) = unpair(n);
    if k.is_zero() {
        return if rest.is_zero() {
            Ok(Address::root())
        } else {
            Err(err("empty address with nonzero payload"))
        };
    }
    let k = k
        .to_usize()
        .filter(|&k| k <= MAX_DECODED_LEN)
        .ok_or_else(|| err("length out of range"))?;
    let (m, mut digits) = unpair(&rest);
    let max = m.to_usize().ok_or_else(|| err("entry out of range"))?;
    let beta = m + 2u32;
    let mut steps = Vec::with_capacity(k);
    for _ in 0..k {
        let (q, r) = digits.div_rem(&beta);
        steps.push(r.to_usize().expect("digit below β"));
        digits = q;
    }
    if !digits.is_zero() {
        return Err(err("more digits than the length allows"));
    }
    if steps.iter().max() != Some(&max) {
        return Err(err("largest entry does not match the base"));
    }
    Ok(Address::from_steps(steps))
}

/// `c ↦ c♯`, 1-based in vocabulary order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstructorCodeTable {
    arities: Vec<usize>,
}

impl ConstructorCodeTable {
    pub fn new(vocab: &Vocabulary) -> Self {
        ConstructorCodeTable {
            arities: vocab.iter().map(|(_, c)| c.arity).collect(),
        }
    }

    pub fn code(&self, c: CtorId) -> u64 {
        c.index() as u64 + 1
    }

    pub fn ctor(&self, code: u64) -> Option<CtorId> {
        let i = usize::try_from(code).ok()?.checked_sub(1)?;
        (i < self.arities.len()).then_some(CtorId(i as u32))
    }

    pub fn arity(&self, c: CtorId) -> usize {
        self.arities[c.index()]
    }

    /// Largest arity, at least one.
    pub fn width(&self) -> usize {
        self.arities.iter().copied().max().unwrap_or(0).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuncValue {
    Defined(u64),
    Undefined,
    Unknown(UnknownReason),
}

/// A partial function on address codes.
#[derive(Clone)]
pub struct FuncRepr(Rc<dyn Fn(&BigUint) -> FuncValue>);

impl FuncRepr {
    pub fn new(f: impl Fn(&BigUint) -> FuncValue + 'static) -> Self {
        FuncRepr(Rc::new(f))
    }

    /// Nowhere defined.
    pub fn empty() -> Self {
        FuncRepr::new(|_| FuncValue::Undefined)
    }

    pub fn call(&self, n: &BigUint) -> FuncValue {
        (self.0)(n)
    }

    pub fn at(&self, a: &Address) -> FuncValue {
        self.call(&encode_address(a))
    }
}

/// `g(⟨a⟩) = c♯` wherever the source has `c` at `a`. Addresses outside the
/// tree, and numbers that code no address, stay undefined.
pub fn term_to_funcrepr(src: SourceRef, table: &ConstructorCodeTable) -> FuncRepr {
    let table = table.clone();
    FuncRepr::new(move |n| match decode_address(n) {
        Err(_) => FuncValue::Undefined,
        Ok(a) => match src.query(&a) {
            ConstructorQuery::Known(c) => FuncValue::Defined(table.code(c)),
            ConstructorQuery::OutOfRange => FuncValue::Undefined,
            ConstructorQuery::Unknown(r) => FuncValue::Unknown(r),
        },
    })
}

/// Rooting: `ĉ(f0 … f(r-1))⟨⟩ = c♯` and `ĉ(f0 … f(r-1))(⟨i⟩ * a) = fi(a)`.
pub fn apply_chat(
    c: CtorId,
    args: Vec<FuncRepr>,
    table: &ConstructorCodeTable,
    vocab: &Vocabulary,
) -> Result<FuncRepr, ReprError> {
    let expected = table.arity(c);
    if args.len() != expected {
        return Err(ReprError::ArityMismatch {
            ctor: vocab.name(c).to_string(),
            expected,
            found: args.len(),
        });
    }
    let code = table.code(c);
    Ok(FuncRepr::new(move |n| match decode_address(n) {
        Err(_) => FuncValue::Undefined,
        Ok(a) => match a.steps().split_first() {
            None => FuncValue::Defined(code),
            Some((&i, rest)) => match args.get(i) {
                Some(f) => f.at(&Address::from_steps(rest)),
                None => FuncValue::Undefined,
            },
        },
    }))
}

/// The function as a hyper-term source. Codes outside the table read as
/// out of range.
pub struct ReprSource {
    g: FuncRepr,
    table: ConstructorCodeTable,
}

impl ReprSource {
    pub fn new(g: FuncRepr, table: ConstructorCodeTable) -> Self {
        ReprSource { g, table }
    }
}

impl HyperTermSource for ReprSource {
    fn query(&self, addr: &Address) -> ConstructorQuery {
        match self.g.at(addr) {
            FuncValue::Defined(code) => self
                .table
                .ctor(code)
                .map_or(ConstructorQuery::OutOfRange, ConstructorQuery::Known),
            FuncValue::Undefined => ConstructorQuery::OutOfRange,
            FuncValue::Unknown(r) => ConstructorQuery::Unknown(r),
        }
    }
}

/// Reads back every address shorter than `depth`, checking that each
/// observed code names a constructor and that no child is defined beyond
/// its parent's arity.
pub fn funcrepr_to_prefix(
    g: &FuncRepr,
    table: &ConstructorCodeTable,
    depth: usize,
) -> Result<FinitePrefix, ReprError> {
    prefix_at(g, table, &Address::root(), depth)
}

fn prefix_at(
    g: &FuncRepr,
    table: &ConstructorCodeTable,
    addr: &Address,
    depth: usize,
) -> Result<FinitePrefix, ReprError> {
    if depth == 0 {
        return Ok(FinitePrefix::Unexplored);
    }
    let code = match g.at(addr) {
        FuncValue::Defined(code) => code,
        FuncValue::Undefined | FuncValue::Unknown(_) => return Ok(FinitePrefix::Unexplored),
    };
    let c = table
        .ctor(code)
        .ok_or_else(|| ReprError::InvalidRepresentation(addr.clone()))?;
    let arity = table.arity(c);
    if depth > 1 {
        for j in arity..table.width() {
            let child = addr.child(j);
            if matches!(g.at(&child), FuncValue::Defined(_)) {
                return Err(ReprError::InvalidRepresentation(child));
            }
        }
    }
    let kids = (0..arity)
        .map(|j| prefix_at(g, table, &addr.child(j), depth - 1))
        .collect::<Result<_, _>>()?;
    Ok(FinitePrefix::Known(c, kids))
}

/// `addr-code<TAB>ctor-code` lines, sorted by address code, for every
/// defined point of `g` at addresses shorter than `depth`.
pub fn dump(g: &FuncRepr, table: &ConstructorCodeTable, depth: usize) -> Result<String, ReprError> {
    let p = funcrepr_to_prefix(g, table, depth)?;
    let mut rows = Vec::new();
    collect(&p, &Address::root(), table, &mut rows);
    rows.sort();
    let mut out = String::new();
    for (a, c) in rows {
        writeln!(out, "{a}\t{c}").expect("writing to a string");
    }
    Ok(out)
}

fn collect(
    p: &FinitePrefix,
    addr: &Address,
    table: &ConstructorCodeTable,
    rows: &mut Vec<(BigUint, u64)>,
) {
    if let FinitePrefix::Known(c, kids) = p {
        rows.push((encode_address(addr), table.code(*c)));
        for (j, k) in kids.iter().enumerate() {
            collect(k, &addr.child(j), table, rows);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{prefix, LiteralSource};
    use crate::term::DataTerm;
    use num_traits::One;
    use std::collections::HashSet;

    fn addr(steps: &[usize]) -> Address {
        Address::from_steps(steps.to_vec())
    }

    /// Cantor pairing by walking the diagonals.
    fn pair_oracle(x: u64, y: u64) -> u64 {
        let mut n = 0;
        for d in 0.. {
            for b in 0..=d {
                if d - b == x && b == y {
                    return n;
                }
                n += 1;
            }
        }
        unreachable!()
    }

    #[test]
    fn pairing_matches_diagonal_walk() {
        for x in 0..20u64 {
            for y in 0..20u64 {
                let z = pair(&BigUint::from(x), &BigUint::from(y));
                assert_eq!(z, BigUint::from(pair_oracle(x, y)));
                assert_eq!(unpair(&z), (BigUint::from(x), BigUint::from(y)));
            }
        }
    }

    #[test]
    fn frozen_codes() {
        assert_eq!(encode_address(&Address::root()), BigUint::zero());
        // ⟨0⟩: k=1, β=2, D=0 → pair(1, pair(0,0)) = pair(1,0) = 1
        assert_eq!(encode_address(&addr(&[0])), BigUint::from(1u32));
        // ⟨1⟩: β=3, D=1 → pair(1, pair(1,1)) = pair(1, 4) = 19
        assert_eq!(encode_address(&addr(&[1])), BigUint::from(19u32));
        // ⟨1,0⟩: β=3, D=1 → pair(2, pair(1,1)) = pair(2, 4) = 25
        assert_eq!(encode_address(&addr(&[1, 0])), BigUint::from(25u32));
        assert_eq!(
            decode_address(&BigUint::from(25u32)).unwrap(),
            addr(&[1, 0])
        );
    }

    #[test]
    fn injective_on_small_addresses() {
        let mut all = vec![Address::root()];
        let mut layer = vec![Address::root()];
        for _ in 0..4 {
            layer = layer
                .iter()
                .flat_map(|a| (0..3).map(move |i| a.child(i)))
                .collect();
            all.extend(layer.iter().cloned());
        }
        assert_eq!(all.len(), 121);
        let codes: HashSet<BigUint> = all.iter().map(encode_address).collect();
        assert_eq!(codes.len(), 121);
        for a in &all {
            assert_eq!(&decode_address(&encode_address(a)).unwrap(), a);
        }
    }

    #[test]
    fn decode_is_inverse_on_its_domain() {
        let mut decoded = 0;
        for n in 0u32..20_000 {
            let n = BigUint::from(n);
            if let Ok(a) = decode_address(&n) {
                assert_eq!(encode_address(&a), n);
                decoded += 1;
            }
        }
        assert!(decoded > 100);
        // pair(1, pair(1, 0)) claims base 3 but its only digit is 0.
        let bad = pair(&BigUint::one(), &pair(&BigUint::one(), &BigUint::zero()));
        assert!(matches!(
            decode_address(&bad),
            Err(ReprError::DecodeError(..))
        ));
        assert!(decode_address(&pair(&BigUint::zero(), &BigUint::one())).is_err());
    }

    fn vocab() -> Vocabulary {
        Vocabulary::new([("e", 0), ("0", 1), ("1", 1), ("p", 2)]).unwrap()
    }

    fn p_e_0e(v: &Vocabulary) -> DataTerm {
        let e = DataTerm::leaf(v.lookup("e").unwrap());
        DataTerm::node(
            v.lookup("p").unwrap(),
            vec![e.clone(), DataTerm::node(v.lookup("0").unwrap(), vec![e])],
        )
    }

    #[test]
    fn finite_term_representation() {
        let v = vocab();
        let table = ConstructorCodeTable::new(&v);
        let code = |n: &str| FuncValue::Defined(table.code(v.lookup(n).unwrap()));
        let g = term_to_funcrepr(LiteralSource::shared(p_e_0e(&v)), &table);
        assert_eq!(g.at(&Address::root()), code("p"));
        assert_eq!(g.at(&addr(&[0])), code("e"));
        assert_eq!(g.at(&addr(&[1])), code("0"));
        assert_eq!(g.at(&addr(&[1, 0])), code("e"));
        assert_eq!(g.at(&addr(&[0, 0])), FuncValue::Undefined);
        let back = funcrepr_to_prefix(&g, &table, 3).unwrap();
        assert_eq!(back.to_data_term(), Some(p_e_0e(&v)));
    }

    #[test]
    fn invalid_and_empty_representations() {
        let v = vocab();
        let table = ConstructorCodeTable::new(&v);
        let e = table.code(v.lookup("e").unwrap());
        let g = FuncRepr::new(move |n| {
            if n <= &BigUint::one() {
                FuncValue::Defined(e)
            } else {
                FuncValue::Undefined
            }
        });
        assert_eq!(
            funcrepr_to_prefix(&g, &table, 2),
            Err(ReprError::InvalidRepresentation(addr(&[0])))
        );
        assert_eq!(
            funcrepr_to_prefix(&FuncRepr::empty(), &table, 2),
            Ok(FinitePrefix::Unexplored)
        );
        let bogus = FuncRepr::new(|_| FuncValue::Defined(99));
        assert_eq!(
            funcrepr_to_prefix(&bogus, &table, 1),
            Err(ReprError::InvalidRepresentation(Address::root()))
        );
    }

    #[test]
    fn rooting_agrees_with_direct_representation() {
        let v = vocab();
        let table = ConstructorCodeTable::new(&v);
        let t = p_e_0e(&v);
        let kids: Vec<FuncRepr> = t
            .args
            .iter()
            .map(|k| term_to_funcrepr(LiteralSource::shared(k.clone()), &table))
            .collect();
        let rooted = apply_chat(t.ctor, kids, &table, &v).unwrap();
        let direct = term_to_funcrepr(LiteralSource::shared(t.clone()), &table);
        let src = LiteralSource::new(t);
        assert_eq!(
            funcrepr_to_prefix(&rooted, &table, 4).unwrap(),
            prefix(&src, &v, 4)
        );
        for n in 0u32..2000 {
            let n = BigUint::from(n);
            assert_eq!(rooted.call(&n), direct.call(&n), "{n}");
        }
        let e = v.lookup("e").unwrap();
        let leaf = apply_chat(e, vec![], &table, &v).unwrap();
        assert_eq!(leaf.at(&Address::root()), FuncValue::Defined(table.code(e)));
        assert_eq!(leaf.at(&addr(&[0])), FuncValue::Undefined);
        assert!(matches!(
            apply_chat(e, vec![FuncRepr::empty()], &table, &v),
            Err(ReprError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn dump_is_sorted_by_address_code() {
        let v = vocab();
        let table = ConstructorCodeTable::new(&v);
        let g = term_to_funcrepr(LiteralSource::shared(p_e_0e(&v)), &table);
        // p=4 at 0, e=1 at ⟨0⟩=1, 0=2 at ⟨1⟩=19, e=1 at ⟨1,0⟩=25
        assert_eq!(dump(&g, &table, 8).unwrap(), "0\t4\n1\t1\n19\t2\n25\t1\n");
    }
}

//! Syntactic first-order unification over terms, with occurs check.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::term::Term;

pub type Substitution = BTreeMap<Arc<str>, Term>;

/// Follows variable bindings at the root only.
fn walk<'t>(t: &'t Term, subst: &'t Substitution) -> &'t Term {
    let mut cur = t;
    while let Term::Var(v) = cur {
        match subst.get(v) {
            Some(next) => cur = next,
            None => break,
        }
    }
    cur
}

fn occurs(v: &Arc<str>, t: &Term, subst: &Substitution) -> bool {
    match walk(t, subst) {
        Term::Var(w) => w == v,
        Term::Ctor(_, args) | Term::Fun(_, args) => args.iter().any(|a| occurs(v, a, subst)),
    }
}

/// Most general unifier of the pairs, fully resolved, or `None`.
pub fn unify_all(pairs: &[(Term, Term)]) -> Option<Substitution> {
    let mut subst = Substitution::new();
    let mut work: Vec<(Term, Term)> = pairs.iter().rev().cloned().collect();
    while let Some((a, b)) = work.pop() {
        let a = walk(&a, &subst).clone();
        let b = walk(&b, &subst).clone();
        match (a, b) {
            (Term::Var(x), Term::Var(y)) if x == y => {}
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if occurs(&x, &t, &subst) {
                    return None;
                }
                subst.insert(x, t);
            }
            (Term::Ctor(c, xs), Term::Ctor(d, ys)) => {
                if c != d || xs.len() != ys.len() {
                    return None;
                }
                work.extend(xs.into_iter().zip(ys).rev());
            }
            (Term::Fun(f, xs), Term::Fun(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return None;
                }
                work.extend(xs.into_iter().zip(ys).rev());
            }
            _ => return None,
        }
    }
    let keys: Vec<_> = subst.keys().cloned().collect();
    let resolved = keys
        .into_iter()
        .map(|k| {
            let t = apply(&Term::Var(k.clone()), &subst);
            (k, t)
        })
        .collect();
    Some(resolved)
}

pub fn unify(a: &Term, b: &Term) -> Option<Substitution> {
    unify_all(&[(a.clone(), b.clone())])
}

/// Applies a (possibly triangular) substitution until no bound variable remains.
pub fn apply(t: &Term, subst: &Substitution) -> Term {
    match walk(t, subst) {
        Term::Var(v) => Term::Var(v.clone()),
        Term::Ctor(c, args) => Term::Ctor(*c, args.iter().map(|a| apply(a, subst)).collect()),
        Term::Fun(f, args) => Term::Fun(f.clone(), args.iter().map(|a| apply(a, subst)).collect()),
    }
}

/// Renames every variable `v` to `v` followed by `suffix`.
pub fn rename(t: &Term, suffix: &str) -> Term {
    match t {
        Term::Var(v) => Term::Var(Arc::from(format!("{v}{suffix}"))),
        Term::Ctor(c, args) => Term::Ctor(*c, args.iter().map(|a| rename(a, suffix)).collect()),
        Term::Fun(f, args) => {
            Term::Fun(f.clone(), args.iter().map(|a| rename(a, suffix)).collect())
        }
    }
}

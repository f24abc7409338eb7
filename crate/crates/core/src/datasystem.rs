//! Data-systems: ordered bundles of inductive and coinductive types.
//!
//! Every type is described, after validation, by a list of disjuncts
//! ("constructor-statements"): `x = c(y1..yr)` with a type for each `yi`.
//! For an inductive type the list is the packaged closure condition, for a
//! coinductive type it is the right-hand side of its deconstruction rule.
//!
//! A disjunct may also be written as a bare reference `G(x)` to a type `G` of
//! an earlier bundle. Validation unfolds it into `G`'s own disjuncts, which
//! is sound because both least and greatest fixpoints satisfy their defining
//! equivalence.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::vocab::{CtorId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Inductive,
    Coinductive,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Inductive => "inductive",
            Polarity::Coinductive => "coinductive",
        })
    }
}

/// Index of a type in its [`ValidatedSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeInfo {
    pub name: String,
    pub bundle: usize,
    pub position: usize,
}

/// `∃y1..yr. x = c(y1..yr) ∧ Q1(y1) ∧ … ∧ Qr(yr)`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstructorStatement {
    pub ctor: CtorId,
    pub components: Vec<TypeId>,
}

/// A disjunct as written, before names are resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatementDef {
    Constructor {
        ctor: String,
        components: Vec<String>,
    },
    /// `G(x)` for a type `G` of an earlier bundle.
    TypeRef(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleDef {
    /// `body → target(x)`
    Construction { target: String, body: StatementDef },
    /// `source(x) → d1 ∨ … ∨ dk`
    Deconstruction {
        source: String,
        disjuncts: Vec<StatementDef>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleDef {
    pub polarity: Polarity,
    pub types: Vec<String>,
    pub rules: Vec<RuleDef>,
}

/// An unvalidated data-system.
#[derive(Debug, Clone)]
pub struct DataSystem {
    pub name: String,
    pub vocabulary: Arc<Vocabulary>,
    pub bundles: Vec<BundleDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("type `{0}` declared more than once")]
    DuplicateTypeName(String),
    #[error("bundle {0} declares no types")]
    EmptyBundle(usize),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown constructor `{0}`")]
    UnknownConstructor(String),
    #[error(
        "constructor `{ctor}` has arity {expected} but the statement lists {found} component types"
    )]
    ArityMismatch {
        ctor: String,
        expected: usize,
        found: usize,
    },
    #[error("bundle {bundle} refers to `{referenced}` of bundle {referenced_bundle}; only earlier bundles and the bundle's own types may be used")]
    StratificationViolation {
        bundle: usize,
        referenced: String,
        referenced_bundle: usize,
    },
    #[error(
        "type reference `{referenced}` in bundle {bundle} must name a type of an earlier bundle"
    )]
    TypeRefNotEarlier { bundle: usize, referenced: String },
    #[error("rule for `{target}` appears in bundle {bundle}, which does not declare it")]
    ForeignRule { bundle: usize, target: String },
    #[error("{polarity} bundle {bundle} cannot hold this kind of rule")]
    WrongRuleKind { bundle: usize, polarity: Polarity },
    #[error("coinductive type `{0}` has no deconstruction rule")]
    CoinductiveRuleMissing(String),
    #[error("coinductive type `{0}` has more than one deconstruction rule")]
    DuplicateDeconstruction(String),
    #[error("bundle is not inductive")]
    NotInductive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub polarity: Polarity,
    pub types: Vec<TypeId>,
    /// Construction rules `statement → target(x)`; inductive bundles only.
    pub inductive_rules: Vec<(ConstructorStatement, TypeId)>,
    /// One disjunct list per type; coinductive bundles only.
    pub coinductive_rules: BTreeMap<TypeId, Vec<ConstructorStatement>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Sigma,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rank {
    pub side: Side,
    pub level: usize,
}

impl Rank {
    /// Rank of a nonempty sequence of bundle polarities: a single bundle is
    /// Σ1 or Π1, and each change of polarity raises the level by one.
    pub fn of_polarities(polarities: &[Polarity]) -> Option<Rank> {
        let (first, rest) = polarities.split_first()?;
        let mut rank = Rank {
            side: side_of(*first),
            level: 1,
        };
        for &p in rest {
            if side_of(p) != rank.side {
                rank = Rank {
                    side: side_of(p),
                    level: rank.level + 1,
                };
            }
        }
        Some(rank)
    }
}

fn side_of(p: Polarity) -> Side {
    match p {
        Polarity::Inductive => Side::Sigma,
        Polarity::Coinductive => Side::Pi,
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::Sigma => write!(f, "Sigma {}", self.level),
            Side::Pi => write!(f, "Pi {}", self.level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedSystem {
    name: String,
    vocab: Arc<Vocabulary>,
    types: Vec<TypeInfo>,
    bundles: Vec<Bundle>,
    disjuncts: Vec<Vec<ConstructorStatement>>,
    warnings: Vec<String>,
}

struct Resolver<'a> {
    vocab: &'a Vocabulary,
    ids: &'a HashMap<String, TypeId>,
    types: &'a [TypeInfo],
    disjuncts: &'a [Vec<ConstructorStatement>],
    bundle: usize,
}

impl Resolver<'_> {
    fn type_id(&self, name: &str) -> Result<TypeId, SystemError> {
        let id = *self
            .ids
            .get(name)
            .ok_or_else(|| SystemError::UnknownType(name.to_string()))?;
        let referenced_bundle = self.types[id.0].bundle;
        if referenced_bundle > self.bundle {
            return Err(SystemError::StratificationViolation {
                bundle: self.bundle,
                referenced: name.to_string(),
                referenced_bundle,
            });
        }
        Ok(id)
    }

    fn statements(&self, def: &StatementDef) -> Result<Vec<ConstructorStatement>, SystemError> {
        match def {
            StatementDef::Constructor { ctor, components } => {
                let id = self
                    .vocab
                    .lookup(ctor)
                    .ok_or_else(|| SystemError::UnknownConstructor(ctor.clone()))?;
                let expected = self.vocab.arity(id);
                if expected != components.len() {
                    return Err(SystemError::ArityMismatch {
                        ctor: ctor.clone(),
                        expected,
                        found: components.len(),
                    });
                }
                let components = components
                    .iter()
                    .map(|c| self.type_id(c))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(vec![ConstructorStatement {
                    ctor: id,
                    components,
                }])
            }
            StatementDef::TypeRef(name) => {
                let id = self.type_id(name)?;
                if self.types[id.0].bundle >= self.bundle {
                    return Err(SystemError::TypeRefNotEarlier {
                        bundle: self.bundle,
                        referenced: name.clone(),
                    });
                }
                Ok(self.disjuncts[id.0].clone())
            }
        }
    }
}

pub fn validate(ds: &DataSystem) -> Result<ValidatedSystem, SystemError> {
    let vocab = &*ds.vocabulary;
    let mut types = Vec::new();
    let mut ids: HashMap<String, TypeId> = HashMap::new();
    for (b, bundle) in ds.bundles.iter().enumerate() {
        if bundle.types.is_empty() {
            return Err(SystemError::EmptyBundle(b));
        }
        for (pos, name) in bundle.types.iter().enumerate() {
            if ids.insert(name.clone(), TypeId(types.len())).is_some() {
                return Err(SystemError::DuplicateTypeName(name.clone()));
            }
            types.push(TypeInfo {
                name: name.clone(),
                bundle: b,
                position: pos,
            });
        }
    }

    let mut disjuncts: Vec<Vec<ConstructorStatement>> = vec![Vec::new(); types.len()];
    let mut bundles = Vec::new();
    let mut warnings = Vec::new();
    for (b, def) in ds.bundles.iter().enumerate() {
        let members: Vec<TypeId> = def.types.iter().map(|n| ids[n]).collect();
        let mut bundle = Bundle {
            polarity: def.polarity,
            types: members.clone(),
            inductive_rules: Vec::new(),
            coinductive_rules: BTreeMap::new(),
        };
        let resolver = Resolver {
            vocab,
            ids: &ids,
            types: &types,
            disjuncts: &disjuncts,
            bundle: b,
        };
        let member = |name: &str| -> Result<TypeId, SystemError> {
            ids.get(name)
                .copied()
                .filter(|id| types[id.0].bundle == b)
                .ok_or_else(|| SystemError::ForeignRule {
                    bundle: b,
                    target: name.to_string(),
                })
        };
        for rule in &def.rules {
            match (def.polarity, rule) {
                (Polarity::Inductive, RuleDef::Construction { target, body }) => {
                    let target = member(target)?;
                    for st in resolver.statements(body)? {
                        bundle.inductive_rules.push((st, target));
                    }
                }
                (
                    Polarity::Coinductive,
                    RuleDef::Deconstruction {
                        source,
                        disjuncts: ds,
                    },
                ) => {
                    let source_id = member(source)?;
                    if bundle.coinductive_rules.contains_key(&source_id) {
                        return Err(SystemError::DuplicateDeconstruction(source.clone()));
                    }
                    let mut list = Vec::new();
                    for d in ds {
                        list.extend(resolver.statements(d)?);
                    }
                    bundle.coinductive_rules.insert(source_id, list);
                }
                (polarity, _) => {
                    return Err(SystemError::WrongRuleKind {
                        bundle: b,
                        polarity,
                    })
                }
            }
        }
        match def.polarity {
            Polarity::Inductive => {
                for (t, list) in package(&bundle) {
                    disjuncts[t.0] = list;
                }
            }
            Polarity::Coinductive => {
                for &t in &members {
                    let list = bundle.coinductive_rules.get(&t).ok_or_else(|| {
                        SystemError::CoinductiveRuleMissing(types[t.0].name.clone())
                    })?;
                    disjuncts[t.0] = list.clone();
                }
            }
        }
        bundles.push(bundle);
    }

    let inhabited = inhabitation(&types, &bundles, &disjuncts);
    for (i, t) in types.iter().enumerate() {
        if !inhabited[i] {
            warnings.push(format!("type `{}` is empty", t.name));
        }
    }

    Ok(ValidatedSystem {
        name: ds.name.clone(),
        vocab: ds.vocabulary.clone(),
        types,
        bundles,
        disjuncts,
        warnings,
    })
}

fn package(bundle: &Bundle) -> BTreeMap<TypeId, Vec<ConstructorStatement>> {
    let mut out: BTreeMap<TypeId, Vec<ConstructorStatement>> =
        bundle.types.iter().map(|&t| (t, Vec::new())).collect();
    for (st, target) in &bundle.inductive_rules {
        let list = out.entry(*target).or_default();
        if !list.contains(st) {
            list.push(st.clone());
        }
    }
    out
}

/// Groups the construction rules of an inductive bundle into one disjunct
/// list per type, the packaged form `ψ1 ∨ … ∨ ψk → D(x)`.
pub fn package_inductive(
    bundle: &Bundle,
) -> Result<BTreeMap<TypeId, Vec<ConstructorStatement>>, SystemError> {
    match bundle.polarity {
        Polarity::Inductive => Ok(package(bundle)),
        Polarity::Coinductive => Err(SystemError::NotInductive),
    }
}

/// Which types have at least one element, bundle by bundle: least fixpoint
/// for inductive bundles, greatest for coinductive ones.
fn inhabitation(
    types: &[TypeInfo],
    bundles: &[Bundle],
    disjuncts: &[Vec<ConstructorStatement>],
) -> Vec<bool> {
    let mut inhabited = vec![false; types.len()];
    for bundle in bundles {
        let start = bundle.polarity == Polarity::Coinductive;
        for &t in &bundle.types {
            inhabited[t.0] = start;
        }
        loop {
            let mut changed = false;
            for &t in &bundle.types {
                let now = disjuncts[t.0]
                    .iter()
                    .any(|st| st.components.iter().all(|c| inhabited[c.0]));
                if now != inhabited[t.0] {
                    inhabited[t.0] = now;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    inhabited
}

impl ValidatedSystem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn types(&self) -> impl Iterator<Item = (TypeId, &TypeInfo)> {
        self.types.iter().enumerate().map(|(i, t)| (TypeId(i), t))
    }

    pub fn type_info(&self, t: TypeId) -> &TypeInfo {
        &self.types[t.0]
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.types[t.0].name
    }

    pub fn lookup_type(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t.name == name).map(TypeId)
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    pub fn bundle_of(&self, t: TypeId) -> usize {
        self.types[t.0].bundle
    }

    pub fn polarity(&self, t: TypeId) -> Polarity {
        self.bundles[self.bundle_of(t)].polarity
    }

    /// Disjuncts describing `t`: packaged construction rules when inductive,
    /// the deconstruction rule when coinductive.
    pub fn disjuncts(&self, t: TypeId) -> &[ConstructorStatement] {
        &self.disjuncts[t.0]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn rank(&self) -> Rank {
        self.prefix_rank(self.bundles.len())
    }

    /// Rank of the system truncated after the bundle containing `t`.
    pub fn rank_of_type(&self, t: TypeId) -> Rank {
        self.prefix_rank(self.bundle_of(t) + 1)
    }

    fn prefix_rank(&self, bundles: usize) -> Rank {
        let polarities: Vec<Polarity> =
            self.bundles[..bundles].iter().map(|b| b.polarity).collect();
        Rank::of_polarities(&polarities).unwrap_or(Rank {
            side: Side::Sigma,
            level: 1,
        })
    }

    /// The system in session-file syntax, with type references unfolded.
    pub fn to_dsl(&self) -> String {
        let mut out = format!("system {} {{\n", self.name);
        for bundle in &self.bundles {
            let names: Vec<&str> = bundle.types.iter().map(|&t| self.type_name(t)).collect();
            out.push_str(&format!(
                "  {} bundle {{\n    type {};\n",
                bundle.polarity,
                names.join(", ")
            ));
            match bundle.polarity {
                Polarity::Inductive => {
                    for (st, target) in &bundle.inductive_rules {
                        let vars = fresh_vars(st.components.len());
                        let pattern = self.pattern(st.ctor, &vars);
                        out.push_str(&format!("    {}({})", self.type_name(*target), pattern));
                        if !vars.is_empty() {
                            out.push_str(&format!(" <- {}", self.typing(st, &vars)));
                        }
                        out.push_str(";\n");
                    }
                }
                Polarity::Coinductive => {
                    for (t, list) in &bundle.coinductive_rules {
                        let alts: Vec<String> = list
                            .iter()
                            .map(|st| {
                                let vars = fresh_vars(st.components.len());
                                let pattern = self.pattern(st.ctor, &vars);
                                if vars.is_empty() {
                                    pattern
                                } else {
                                    format!("{pattern} with {}", self.typing(st, &vars))
                                }
                            })
                            .collect();
                        out.push_str(&format!(
                            "    {}(x) -> {};\n",
                            self.type_name(*t),
                            alts.join(" | ")
                        ));
                    }
                }
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    fn pattern(&self, ctor: CtorId, vars: &[String]) -> String {
        if vars.is_empty() {
            self.vocab.name(ctor).to_string()
        } else {
            format!("{}({})", self.vocab.name(ctor), vars.join(", "))
        }
    }

    fn typing(&self, st: &ConstructorStatement, vars: &[String]) -> String {
        st.components
            .iter()
            .zip(vars)
            .map(|(t, v)| format!("{}({v})", self.type_name(*t)))
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

fn fresh_vars(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("y{i}")).collect()
}

/// Rank of the whole system plus per-type ranks.
pub fn classify_rank(ds: &ValidatedSystem) -> (Rank, Vec<(TypeId, Rank)>) {
    let per_type = ds.types().map(|(t, _)| (t, ds.rank_of_type(t))).collect();
    (ds.rank(), per_type)
}

//! Constructor vocabularies.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Index of a constructor inside its [`Vocabulary`].
///
/// Extending a vocabulary with [`Vocabulary::extended_with`] only appends, so
/// ids issued by the original stay valid in the extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CtorId(pub u32);

impl CtorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constructor {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("constructor name must be nonempty")]
    EmptyName,
    #[error("constructor `{0}` declared twice")]
    Duplicate(String),
}

/// An ordered, finite set of constructors with a distinguished nullary
/// padding constructor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    ctors: Vec<Constructor>,
    padding: CtorId,
    by_name: HashMap<String, CtorId>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(name, arity)` pairs in declaration order.
    ///
    /// When no nullary constructor is declared, a fresh `o` (or `o'`, `o''`,
    /// ... if taken) is appended to serve as padding.
    pub fn new<I, S>(decls: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut ctors = Vec::new();
        let mut by_name = HashMap::new();
        for (name, arity) in decls {
            let name = name.into();
            if name.is_empty() {
                return Err(VocabError::EmptyName);
            }
            if by_name.contains_key(&name) {
                return Err(VocabError::Duplicate(name));
            }
            by_name.insert(name.clone(), CtorId(ctors.len() as u32));
            ctors.push(Constructor { name, arity });
        }
        let padding = match ctors.iter().position(|c| c.arity == 0) {
            Some(i) => CtorId(i as u32),
            None => {
                let mut name = String::from("o");
                while by_name.contains_key(&name) {
                    name.push('\'');
                }
                let id = CtorId(ctors.len() as u32);
                by_name.insert(name.clone(), id);
                ctors.push(Constructor { name, arity: 0 });
                id
            }
        };
        Ok(Vocabulary {
            ctors,
            padding,
            by_name,
        })
    }

    /// Appends a constructor, keeping every existing id stable.
    pub fn extended_with(
        &self,
        name: &str,
        arity: usize,
    ) -> Result<(Vocabulary, CtorId), VocabError> {
        if name.is_empty() {
            return Err(VocabError::EmptyName);
        }
        if self.by_name.contains_key(name) {
            return Err(VocabError::Duplicate(name.to_string()));
        }
        let mut next = self.clone();
        let id = CtorId(next.ctors.len() as u32);
        next.by_name.insert(name.to_string(), id);
        next.ctors.push(Constructor {
            name: name.to_string(),
            arity,
        });
        Ok((next, id))
    }

    /// A name not yet used by any constructor, derived from `base`.
    pub fn fresh_name(&self, base: &str) -> String {
        let mut name = base.to_string();
        while self.by_name.contains_key(&name) {
            name.push('\'');
        }
        name
    }

    pub fn len(&self) -> usize {
        self.ctors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ctors.is_empty()
    }

    pub fn get(&self, id: CtorId) -> &Constructor {
        &self.ctors[id.index()]
    }

    pub fn name(&self, id: CtorId) -> &str {
        &self.ctors[id.index()].name
    }

    pub fn arity(&self, id: CtorId) -> usize {
        self.ctors[id.index()].arity
    }

    pub fn lookup(&self, name: &str) -> Option<CtorId> {
        self.by_name.get(name).copied()
    }

    pub fn padding(&self) -> CtorId {
        self.padding
    }

    pub fn ids(&self) -> impl Iterator<Item = CtorId> + '_ {
        (0..self.ctors.len()).map(|i| CtorId(i as u32))
    }

    pub fn iter(&self) -> impl Iterator<Item = (CtorId, &Constructor)> + '_ {
        self.ctors
            .iter()
            .enumerate()
            .map(|(i, c)| (CtorId(i as u32), c))
    }

    pub fn max_arity(&self) -> usize {
        self.ctors.iter().map(|c| c.arity).max().unwrap_or(0)
    }

    /// The `m` of the destructor family `π_{1,m} .. π_{m,m}`; at least 1 so
    /// that purely nullary vocabularies still get a destructor.
    pub fn destructor_width(&self) -> usize {
        self.max_arity().max(1)
    }
}

impl fmt::Display for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.ctors.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}/{}", c.name, c.arity)?;
        }
        write!(f, "}}")
    }
}

//! Linear terms over a finite signature, and strong linear Maltsev
//! conditions built from identities between them.
//!
//! Variables are plain indices. The text format maps the names `x y z u v w`
//! to indices `0..6` and `x6`, `x7`, ... to the indices they carry, so a
//! rendered condition parses back to the same value.

mod generators;
mod parse;

pub use generators::{
    cube_condition, hagemann_mitschke_condition, jonsson_condition, union_conditions, CubeLetter,
};
pub use parse::{parse_condition, ParseError};

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// An operation symbol with a fixed arity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OperationSymbol {
    pub name: String,
    pub arity: usize,
}

impl OperationSymbol {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        OperationSymbol {
            name: name.into(),
            arity,
        }
    }
}

impl fmt::Display for OperationSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// Index of a symbol inside the signature of the condition it belongs to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub usize);

/// A variable, identified by its index in the canonical variable set.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable(pub usize);

const STANDARD_NAMES: [&str; 6] = ["x", "y", "z", "u", "v", "w"];

impl Variable {
    pub const X: Variable = Variable(0);
    pub const Y: Variable = Variable(1);
    pub const Z: Variable = Variable(2);

    /// Canonical printed name.
    pub fn name(self) -> String {
        match STANDARD_NAMES.get(self.0) {
            Some(n) => (*n).to_string(),
            None => format!("x{}", self.0),
        }
    }

    /// Inverse of [`Variable::name`]; `None` for non-canonical names.
    pub fn from_canonical_name(name: &str) -> Option<Variable> {
        if let Some(i) = STANDARD_NAMES.iter().position(|n| *n == name) {
            return Some(Variable(i));
        }
        let digits = name.strip_prefix('x')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        let i: usize = digits.parse().ok()?;
        (i >= STANDARD_NAMES.len()).then_some(Variable(i))
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A term containing at most one operation symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinearTerm {
    Var(Variable),
    App { symbol: SymbolId, args: Vec<Variable> },
}

impl LinearTerm {
    pub fn app(symbol: SymbolId, args: impl IntoIterator<Item = Variable>) -> Self {
        LinearTerm::App {
            symbol,
            args: args.into_iter().collect(),
        }
    }

    pub fn symbol(&self) -> Option<SymbolId> {
        match self {
            LinearTerm::Var(_) => None,
            LinearTerm::App { symbol, .. } => Some(*symbol),
        }
    }

    /// Variables in order of occurrence, with repetitions.
    pub fn occurrences(&self) -> &[Variable] {
        match self {
            LinearTerm::Var(v) => std::slice::from_ref(v),
            LinearTerm::App { args, .. } => args,
        }
    }

    /// Replaces every variable `v` by `map(v)`; the symbol is untouched.
    pub fn substitute(&self, map: impl Fn(Variable) -> Variable) -> LinearTerm {
        match self {
            LinearTerm::Var(v) => LinearTerm::Var(map(*v)),
            LinearTerm::App { symbol, args } => LinearTerm::App {
                symbol: *symbol,
                args: args.iter().map(|v| map(*v)).collect(),
            },
        }
    }
}

/// Substitution given as a table: variable `i` goes to `table[i]`.
///
/// Panics if a variable of `t` has no entry.
pub fn substitute(t: &LinearTerm, table: &[Variable]) -> LinearTerm {
    t.substitute(|v| table[v.0])
}

/// An identity `lhs ≈ rhs` between linear terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Identity {
    pub lhs: LinearTerm,
    pub rhs: LinearTerm,
}

impl Identity {
    pub fn new(lhs: LinearTerm, rhs: LinearTerm) -> Self {
        Identity { lhs, rhs }
    }

    /// Distinct variables, sorted by index.
    pub fn variables(&self) -> Vec<Variable> {
        let mut vs: Vec<Variable> = self
            .lhs
            .occurrences()
            .iter()
            .chain(self.rhs.occurrences())
            .copied()
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    pub fn substitute(&self, map: impl Fn(Variable) -> Variable + Copy) -> Identity {
        Identity {
            lhs: self.lhs.substitute(map),
            rhs: self.rhs.substitute(map),
        }
    }

    /// Renames the variables to `0..d` preserving their order.
    pub fn compact(&self) -> Identity {
        let vars = self.variables();
        self.substitute(|v| Variable(vars.binary_search(&v).expect("variable of identity")))
    }

    pub fn symbols(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.lhs.symbol().into_iter().chain(self.rhs.symbol())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("operation symbol name must not be empty")]
    EmptyName,
    #[error("duplicate operation symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("identity {index} refers to symbol #{symbol} which is not in the signature")]
    UnknownSymbol { index: usize, symbol: usize },
    #[error("identity {index}: `{name}` has arity {expected} but is applied to {found} arguments")]
    ArityMismatch {
        index: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("operation symbol `{0}` occurs in more than one of the conditions")]
    SymbolCollision(String),
    #[error("{0}")]
    Generator(String),
}

/// A strong linear Maltsev condition: a finite signature and a finite set of
/// linear identities over it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MaltsevCondition {
    signature: Vec<OperationSymbol>,
    identities: Vec<Identity>,
}

impl MaltsevCondition {
    /// Validates the signature and identities. Duplicate identities are
    /// dropped, keeping the first occurrence.
    pub fn new(
        signature: Vec<OperationSymbol>,
        identities: Vec<Identity>,
    ) -> Result<Self, TermError> {
        let mut names = HashSet::new();
        for s in &signature {
            if s.name.is_empty() {
                return Err(TermError::EmptyName);
            }
            if !names.insert(s.name.as_str()) {
                return Err(TermError::DuplicateSymbol(s.name.clone()));
            }
        }
        for (index, id) in identities.iter().enumerate() {
            for t in [&id.lhs, &id.rhs] {
                if let LinearTerm::App { symbol, args } = t {
                    let sym = signature.get(symbol.0).ok_or(TermError::UnknownSymbol {
                        index,
                        symbol: symbol.0,
                    })?;
                    if sym.arity != args.len() {
                        return Err(TermError::ArityMismatch {
                            index,
                            name: sym.name.clone(),
                            expected: sym.arity,
                            found: args.len(),
                        });
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        let identities = identities
            .into_iter()
            .filter(|id| seen.insert(id.clone()))
            .collect();
        Ok(MaltsevCondition {
            signature,
            identities,
        })
    }

    pub fn signature(&self) -> &[OperationSymbol] {
        &self.signature
    }

    pub fn identities(&self) -> &[Identity] {
        &self.identities
    }

    pub fn symbol(&self, id: SymbolId) -> &OperationSymbol {
        &self.signature[id.0]
    }

    pub fn symbol_id(&self, name: &str) -> Option<SymbolId> {
        self.signature
            .iter()
            .position(|s| s.name == name)
            .map(SymbolId)
    }

    pub fn symbol_ids(&self) -> impl Iterator<Item = SymbolId> {
        (0..self.signature.len()).map(SymbolId)
    }

    pub fn max_arity(&self) -> usize {
        self.signature.iter().map(|s| s.arity).max().unwrap_or(0)
    }

    /// Renders a term using this condition's symbol names.
    pub fn display_term<'a>(&'a self, term: &'a LinearTerm) -> TermDisplay<'a> {
        TermDisplay {
            signature: &self.signature,
            term,
        }
    }

    pub fn display_identity<'a>(&'a self, id: &'a Identity) -> IdentityDisplay<'a> {
        IdentityDisplay {
            signature: &self.signature,
            identity: id,
        }
    }
}

/// Prints the condition in the text format accepted by [`parse_condition`].
impl fmt::Display for MaltsevCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig: Vec<String> = self.signature.iter().map(|s| s.to_string()).collect();
        writeln!(f, "signature: {}", sig.join(", "))?;
        writeln!(f, "identities:")?;
        for id in &self.identities {
            writeln!(f, "  {}", self.display_identity(id))?;
        }
        Ok(())
    }
}

pub struct TermDisplay<'a> {
    signature: &'a [OperationSymbol],
    term: &'a LinearTerm,
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.term {
            LinearTerm::Var(v) => write!(f, "{v}"),
            LinearTerm::App { symbol, args } => {
                let name = self
                    .signature
                    .get(symbol.0)
                    .map(|s| s.name.as_str())
                    .unwrap_or("?");
                let args: Vec<String> = args.iter().map(|v| v.name()).collect();
                write!(f, "{}({})", name, args.join(","))
            }
        }
    }
}

pub struct IdentityDisplay<'a> {
    signature: &'a [OperationSymbol],
    identity: &'a Identity,
}

impl fmt::Display for IdentityDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs = TermDisplay {
            signature: self.signature,
            term: &self.identity.lhs,
        };
        let rhs = TermDisplay {
            signature: self.signature,
            term: &self.identity.rhs,
        };
        write!(f, "{lhs} = {rhs}")
    }
}

/// A finite variable set `{v0, ..., v(n-1)}`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableSet {
    size: usize,
}

impl VariableSet {
    pub fn new(size: usize) -> Self {
        VariableSet { size }
    }

    pub fn len(self) -> usize {
        self.size
    }

    pub fn is_empty(self) -> bool {
        self.size == 0
    }

    pub fn contains(self, v: Variable) -> bool {
        v.0 < self.size
    }

    pub fn iter(self) -> impl Iterator<Item = Variable> {
        (0..self.size).map(Variable)
    }
}

/// Smallest variable set that is large enough for the identities of `m`
/// together with `extra`: at least two variables, at least the arity of every
/// symbol in the signature, and at least the number of distinct variables of
/// any single identity.
pub fn canonical_variable_set(m: &MaltsevCondition, extra: Option<&Identity>) -> VariableSet {
    let widest = m
        .identities()
        .iter()
        .chain(extra)
        .map(|id| id.variables().len())
        .max()
        .unwrap_or(0);
    VariableSet::new(2.max(m.max_arity()).max(widest))
}

/// Partition of the positions of a tuple induced by equality of entries.
///
/// Stored in first-occurrence form: entry `i` is the smallest position `j`
/// holding the same value as position `i` (positions are 0-based; the
/// `Display` form is 1-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EqualityPattern {
    first: Vec<usize>,
}

impl EqualityPattern {
    pub fn of<T: PartialEq>(tuple: &[T]) -> Self {
        let first = (0..tuple.len())
            .map(|i| (0..=i).find(|&j| tuple[j] == tuple[i]).unwrap_or(i))
            .collect();
        EqualityPattern { first }
    }

    pub fn first_occurrences(&self) -> &[usize] {
        &self.first
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    /// Block number of each position, blocks numbered in order of first
    /// occurrence.
    pub fn blocks(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.first.len());
        let mut next = 0;
        for (i, &f) in self.first.iter().enumerate() {
            if f == i {
                out.push(next);
                next += 1;
            } else {
                out.push(out[f]);
            }
        }
        out
    }

    pub fn block_count(&self) -> usize {
        self.first
            .iter()
            .enumerate()
            .filter(|(i, f)| i == *f)
            .count()
    }

    /// The canonical variable tuple realising the pattern: position `i` gets
    /// the variable numbered by its block.
    pub fn canonical_variables(&self) -> Vec<Variable> {
        self.blocks().into_iter().map(Variable).collect()
    }

    /// Every equality pattern of length `k`, in lexicographic order of their
    /// block sequences.
    pub fn all(k: usize) -> Vec<EqualityPattern> {
        fn rec(prefix: &mut Vec<usize>, max: usize, k: usize, out: &mut Vec<EqualityPattern>) {
            if prefix.len() == k {
                out.push(EqualityPattern::of(prefix));
                return;
            }
            for b in 0..=max {
                prefix.push(b);
                rec(prefix, if b == max { max + 1 } else { max }, k, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::with_capacity(k), 0, k, &mut out);
        out
    }
}

impl fmt::Display for EqualityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.first.iter().map(|p| (p + 1).to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

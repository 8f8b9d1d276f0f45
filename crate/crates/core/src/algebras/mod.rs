//! Finite algebras given by operation tables.

mod format;
mod subpower;

pub use format::{parse_algebra, parse_instance, render_algebra, render_instance, FormatError};
pub use subpower::{
    generate_subpower, smp_decide, ClosureConfig, ClosureError, ClosureResult, ClosureStats,
    Origin, SmpAnswer, SmpInstance, DEFAULT_BUDGET,
};

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::terms::{Identity, LinearTerm, MaltsevCondition, OperationSymbol};

pub type Element = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("universe must have at least one element")]
    EmptyUniverse,
    #[error("operation `{name}`: table has {found} entries, expected {expected}")]
    TableSize {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("operation `{name}`: entry {value} is outside the universe of size {size}")]
    OutOfRange {
        name: String,
        value: Element,
        size: usize,
    },
    #[error("duplicate operation `{0}`")]
    DuplicateOperation(String),
    #[error("no operation named `{0}`")]
    MissingOperation(String),
    #[error("operation `{name}` has arity {actual}, expected {expected}")]
    ArityMismatch {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("term uses argument x{index} but only {available} arguments were given")]
    MissingArgument { index: usize, available: usize },
    #[error("argument {value} is outside the universe of size {size}")]
    ArgumentOutOfRange { value: Element, size: usize },
    #[error("tuples of different lengths")]
    RaggedTuples,
}

/// An operation with its table in row-major order over lexicographically
/// ordered argument tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    pub symbol: OperationSymbol,
    pub table: Vec<Element>,
}

impl Operation {
    /// Builds the table of `f` on a universe of `size` elements.
    pub fn from_fn(
        name: impl Into<String>,
        arity: usize,
        size: usize,
        f: impl Fn(&[Element]) -> Element,
    ) -> Self {
        let total = size.pow(arity as u32);
        let mut args = vec![0; arity];
        let table = (0..total)
            .map(|mut code| {
                for slot in args.iter_mut().rev() {
                    *slot = code % size;
                    code /= size;
                }
                f(&args)
            })
            .collect();
        Operation {
            symbol: OperationSymbol::new(name, arity),
            table,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAlgebra {
    size: usize,
    operations: Vec<Operation>,
    by_name: HashMap<String, usize>,
}

impl FiniteAlgebra {
    pub fn new(size: usize, operations: Vec<Operation>) -> Result<Self, AlgebraError> {
        if size == 0 {
            return Err(AlgebraError::EmptyUniverse);
        }
        let mut by_name = HashMap::new();
        for (i, op) in operations.iter().enumerate() {
            let expected = size.pow(op.symbol.arity as u32);
            if op.table.len() != expected {
                return Err(AlgebraError::TableSize {
                    name: op.symbol.name.clone(),
                    expected,
                    found: op.table.len(),
                });
            }
            if let Some(&value) = op.table.iter().find(|&&v| v >= size) {
                return Err(AlgebraError::OutOfRange {
                    name: op.symbol.name.clone(),
                    value,
                    size,
                });
            }
            if by_name.insert(op.symbol.name.clone(), i).is_some() {
                return Err(AlgebraError::DuplicateOperation(op.symbol.name.clone()));
            }
        }
        Ok(FiniteAlgebra {
            size,
            operations,
            by_name,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn operations(&self) -> &[Operation] {
        &self.operations
    }

    pub fn operation_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn operation(&self, name: &str) -> Option<&Operation> {
        self.operation_index(name).map(|i| &self.operations[i])
    }

    pub fn signature(&self) -> Vec<OperationSymbol> {
        self.operations.iter().map(|o| o.symbol.clone()).collect()
    }

    /// Table lookup; `args` must have the operation's arity and be in range.
    pub fn apply(&self, op: usize, args: &[Element]) -> Element {
        let code = args.iter().fold(0, |acc, &a| acc * self.size + a);
        self.operations[op].table[code]
    }

    fn apply_checked(&self, name: &str, args: &[Element]) -> Result<Element, AlgebraError> {
        let i = self
            .operation_index(name)
            .ok_or_else(|| AlgebraError::MissingOperation(name.to_string()))?;
        let arity = self.operations[i].symbol.arity;
        if arity != args.len() {
            return Err(AlgebraError::ArityMismatch {
                name: name.to_string(),
                expected: arity,
                actual: args.len(),
            });
        }
        Ok(self.apply(i, args))
    }

    /// Whether every operation is idempotent.
    pub fn is_idempotent(&self) -> bool {
        (0..self.operations.len()).all(|op| {
            let k = self.operations[op].symbol.arity;
            (0..self.size).all(|a| self.apply(op, &vec![a; k]) == a)
        })
    }
}

/// A term as a tree: leaves are argument positions (`x1`, `x2`, ... printed
/// 1-based), inner nodes carry an operation name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TermTree {
    Leaf(usize),
    Node { symbol: String, children: Vec<TermTree> },
}

impl TermTree {
    pub fn node(symbol: impl Into<String>, children: Vec<TermTree>) -> Self {
        TermTree::Node {
            symbol: symbol.into(),
            children,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            TermTree::Leaf(_) => 1,
            TermTree::Node { children, .. } => 1 + children.iter().map(TermTree::size).sum::<usize>(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            TermTree::Leaf(_) => 0,
            TermTree::Node { children, .. } => {
                1 + children.iter().map(TermTree::height).max().unwrap_or(0)
            }
        }
    }

    /// Whether any node is labelled by a symbol satisfying `pred`.
    pub fn any_symbol(&self, pred: &impl Fn(&str) -> bool) -> bool {
        match self {
            TermTree::Leaf(_) => false,
            TermTree::Node { symbol, children } => {
                pred(symbol) || children.iter().any(|c| c.any_symbol(pred))
            }
        }
    }

    pub fn max_leaf(&self) -> Option<usize> {
        match self {
            TermTree::Leaf(i) => Some(*i),
            TermTree::Node { children, .. } => children.iter().filter_map(TermTree::max_leaf).max(),
        }
    }

    /// Renames leaves by `f`.
    pub fn map_leaves(&self, f: &impl Fn(usize) -> usize) -> TermTree {
        match self {
            TermTree::Leaf(i) => TermTree::Leaf(f(*i)),
            TermTree::Node { symbol, children } => TermTree::Node {
                symbol: symbol.clone(),
                children: children.iter().map(|c| c.map_leaves(f)).collect(),
            },
        }
    }
}

impl fmt::Display for TermTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermTree::Leaf(i) => write!(f, "x{}", i + 1),
            TermTree::Node { symbol, children } => {
                write!(f, "{symbol}(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Bottom-up evaluation of `t` in `a` at `args`.
pub fn evaluate(t: &TermTree, a: &FiniteAlgebra, args: &[Element]) -> Result<Element, AlgebraError> {
    if let Some(&value) = args.iter().find(|&&v| v >= a.size()) {
        return Err(AlgebraError::ArgumentOutOfRange { value, size: a.size() });
    }
    eval_rec(t, a, args)
}

fn eval_rec(t: &TermTree, a: &FiniteAlgebra, args: &[Element]) -> Result<Element, AlgebraError> {
    match t {
        TermTree::Leaf(i) => args.get(*i).copied().ok_or(AlgebraError::MissingArgument {
            index: i + 1,
            available: args.len(),
        }),
        TermTree::Node { symbol, children } => {
            let vals = children
                .iter()
                .map(|c| eval_rec(c, a, args))
                .collect::<Result<Vec<_>, _>>()?;
            a.apply_checked(symbol, &vals)
        }
    }
}

/// Coordinatewise evaluation in a power of `a`: `args[i]` is the tuple
/// assigned to leaf `i`.
pub fn evaluate_power(
    t: &TermTree,
    a: &FiniteAlgebra,
    args: &[Vec<Element>],
) -> Result<Vec<Element>, AlgebraError> {
    let m = match args.first() {
        Some(t) => t.len(),
        None => {
            // a term without leaves: only nullary operations
            return evaluate(t, a, &[]).map(|v| vec![v]);
        }
    };
    if args.iter().any(|t| t.len() != m) {
        return Err(AlgebraError::RaggedTuples);
    }
    (0..m)
        .map(|j| {
            let column: Vec<Element> = args.iter().map(|t| t[j]).collect();
            evaluate(t, a, &column)
        })
        .collect()
}

/// A failed identity with the assignment (one value per variable index of
/// the compacted identity) that breaks it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub identity: usize,
    pub assignment: Vec<Element>,
    pub lhs_value: Element,
    pub rhs_value: Element,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Satisfaction {
    Holds,
    Fails(Counterexample),
}

impl Satisfaction {
    pub fn holds(&self) -> bool {
        matches!(self, Satisfaction::Holds)
    }
}

/// Resolves the symbols of `m` to operation indices of `a`.
pub fn interpretation_map(a: &FiniteAlgebra, m: &MaltsevCondition) -> Result<Vec<usize>, AlgebraError> {
    m.signature()
        .iter()
        .map(|s| {
            let i = a
                .operation_index(&s.name)
                .ok_or_else(|| AlgebraError::MissingOperation(s.name.clone()))?;
            let actual = a.operations()[i].symbol.arity;
            if actual != s.arity {
                return Err(AlgebraError::ArityMismatch {
                    name: s.name.clone(),
                    expected: s.arity,
                    actual,
                });
            }
            Ok(i)
        })
        .collect()
}

/// Value of a linear term under `assignment` (indexed by variable).
pub fn evaluate_linear(
    a: &FiniteAlgebra,
    ops: &[usize],
    t: &LinearTerm,
    assignment: &[Element],
) -> Element {
    match t {
        LinearTerm::Var(v) => assignment[v.0],
        LinearTerm::App { symbol, args } => {
            let vals: Vec<Element> = args.iter().map(|v| assignment[v.0]).collect();
            a.apply(ops[symbol.0], &vals)
        }
    }
}

fn first_failure(
    a: &FiniteAlgebra,
    ops: &[usize],
    id: &Identity,
) -> Option<(Vec<Element>, Element, Element)> {
    let id = id.compact();
    let d = id.variables().len();
    let mut assignment = vec![0; d];
    loop {
        let l = evaluate_linear(a, ops, &id.lhs, &assignment);
        let r = evaluate_linear(a, ops, &id.rhs, &assignment);
        if l != r {
            return Some((assignment, l, r));
        }
        let mut i = d;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            assignment[i] += 1;
            if assignment[i] < a.size() {
                break;
            }
            assignment[i] = 0;
        }
    }
}

/// Checks every identity of `m` under every assignment.
pub fn satisfies(a: &FiniteAlgebra, m: &MaltsevCondition) -> Result<Satisfaction, AlgebraError> {
    let ops = interpretation_map(a, m)?;
    for (i, id) in m.identities().iter().enumerate() {
        if let Some((assignment, lhs_value, rhs_value)) = first_failure(a, &ops, id) {
            return Ok(Satisfaction::Fails(Counterexample {
                identity: i,
                assignment,
                lhs_value,
                rhs_value,
            }));
        }
    }
    Ok(Satisfaction::Holds)
}

/// Human readable satisfaction report.
pub fn describe_satisfaction(m: &MaltsevCondition, s: &Satisfaction) -> String {
    match s {
        Satisfaction::Holds => format!("satisfied: all {} identities hold\n", m.identities().len()),
        Satisfaction::Fails(c) => {
            let id = m.identities()[c.identity].compact();
            let vars: Vec<String> = id
                .variables()
                .iter()
                .zip(&c.assignment)
                .map(|(v, a)| format!("{v}={a}"))
                .collect();
            format!(
                "not satisfied: {} fails at {} ({} != {})\n",
                m.display_identity(&id),
                vars.join(", "),
                c.lhs_value,
                c.rhs_value
            )
        }
    }
}

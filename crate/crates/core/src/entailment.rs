//! Weak closure of a set of linear identities and the entailment queries it
//! answers.
//!
//! The closure over a variable set `X` is the least equivalence relation on
//! linear terms over `X` that contains the identities and is stable under
//! every substitution `X -> X`. Linear terms over `X` form a finite universe,
//! so the closure is a partition of that universe. Entailment is then
//! derivability (both sides in one class) or inconsistency (two distinct
//! variables in one class), provided `X` is large enough for the identities
//! and the query.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::terms::{
    canonical_variable_set, Identity, LinearTerm, MaltsevCondition, SymbolId, Variable,
    VariableSet,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EntailmentError {
    #[error("variable set of size {available} is too small: {reason} needs {needed}")]
    VariableSetTooSmall {
        available: usize,
        needed: usize,
        reason: String,
    },
    #[error("term outside the closure's universe: {0}")]
    TermOutsideUniverse(String),
}

/// Dense numbering of all linear terms over `X` in a signature: variables
/// first, then each symbol's applications in lexicographic argument order.
#[derive(Clone, Debug)]
pub struct TermUniverse {
    vars: usize,
    arities: Vec<usize>,
    offsets: Vec<usize>,
    len: usize,
}

impl TermUniverse {
    fn new(vars: usize, arities: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(arities.len());
        let mut len = vars;
        for &a in &arities {
            offsets.push(len);
            len += vars.pow(a as u32);
        }
        TermUniverse {
            vars,
            arities,
            offsets,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index_of(&self, t: &LinearTerm) -> Option<usize> {
        match t {
            LinearTerm::Var(v) => (v.0 < self.vars).then_some(v.0),
            LinearTerm::App { symbol, args } => {
                let offset = *self.offsets.get(symbol.0)?;
                if args.len() != self.arities[symbol.0] {
                    return None;
                }
                let mut code = 0;
                for a in args {
                    if a.0 >= self.vars {
                        return None;
                    }
                    code = code * self.vars + a.0;
                }
                Some(offset + code)
            }
        }
    }

    pub fn term(&self, index: usize) -> LinearTerm {
        assert!(index < self.len, "term index out of range");
        if index < self.vars {
            return LinearTerm::Var(Variable(index));
        }
        let s = self.offsets.partition_point(|&o| o <= index) - 1;
        let arity = self.arities[s];
        let mut code = index - self.offsets[s];
        let mut args = vec![Variable(0); arity];
        for slot in args.iter_mut().rev() {
            *slot = Variable(code % self.vars);
            code /= self.vars;
        }
        LinearTerm::App {
            symbol: SymbolId(s),
            args,
        }
    }
}

/// Outcome of an entailment query.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct EntailmentVerdict {
    /// The identity lies in the weak closure.
    pub derivable: bool,
    /// The identities derive `x = y` for distinct variables.
    pub inconsistent: bool,
    /// Every model of the identities satisfies the query.
    pub semantic: bool,
}

/// The weak closure of a condition over a fixed variable set.
#[derive(Clone, Debug)]
pub struct EntailmentIndex {
    condition: MaltsevCondition,
    vars: VariableSet,
    universe: TermUniverse,
    parent: Vec<usize>,
    merges: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Roots are always the least index of their class.
fn union(parent: &mut [usize], a: usize, b: usize) -> bool {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra == rb {
        return false;
    }
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi] = lo;
    true
}

/// Calls `f` with every map `{0..width} -> {0..n}`, as a slice.
fn for_each_map(width: usize, n: usize, mut f: impl FnMut(&[usize])) {
    if n == 0 && width > 0 {
        return;
    }
    let mut img = vec![0usize; width];
    loop {
        f(&img);
        let mut i = 0;
        loop {
            if i == width {
                return;
            }
            img[i] += 1;
            if img[i] < n {
                break;
            }
            img[i] = 0;
            i += 1;
        }
    }
}

/// Checks that `vars` is large enough for the identities of `m`.
fn check_large_enough(m: &MaltsevCondition, vars: VariableSet) -> Result<(), EntailmentError> {
    let small = |needed: usize, reason: String| EntailmentError::VariableSetTooSmall {
        available: vars.len(),
        needed,
        reason,
    };
    if vars.len() < 2 {
        return Err(small(2, "any closure".into()));
    }
    if let Some(s) = m.signature().iter().find(|s| s.arity > vars.len()) {
        return Err(small(s.arity, format!("symbol {s}")));
    }
    for id in m.identities() {
        let d = id.variables().len();
        if d > vars.len() {
            return Err(small(d, format!("identity {}", m.display_identity(id))));
        }
    }
    Ok(())
}

/// Computes the weak closure of `m` over `vars`.
pub fn weak_closure(
    m: &MaltsevCondition,
    vars: VariableSet,
) -> Result<EntailmentIndex, EntailmentError> {
    check_large_enough(m, vars)?;
    let arities = m.signature().iter().map(|s| s.arity).collect();
    let universe = TermUniverse::new(vars.len(), arities);
    let mut index = EntailmentIndex {
        condition: m.clone(),
        vars,
        parent: (0..universe.len()).collect(),
        universe,
        merges: 0,
    };
    let seeds: Vec<(usize, usize)> = m
        .identities()
        .iter()
        .map(|id| {
            let id = id.compact();
            (index.position(&id.lhs), index.position(&id.rhs))
        })
        .collect();
    index.saturate(seeds);
    Ok(index)
}

/// Whether the identities of `m` are consistent.
pub fn is_consistent(m: &MaltsevCondition) -> bool {
    weak_closure(m, canonical_variable_set(m, None))
        .expect("canonical variable set is large enough")
        .is_consistent()
}

/// Entailment query against a finished closure.
pub fn entails(index: &EntailmentIndex, phi: &Identity) -> Result<EntailmentVerdict, EntailmentError> {
    index.entails(phi)
}

impl EntailmentIndex {
    fn position(&self, t: &LinearTerm) -> usize {
        self.universe
            .index_of(t)
            .expect("compacted term lies in the universe")
    }

    /// Worklist saturation. Each queued pair is a generating edge of the
    /// partition; closing under substitutions only requires the images of
    /// generating edges, and each successful merge queues the one new edge.
    fn saturate(&mut self, seeds: Vec<(usize, usize)>) {
        let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
        for (a, b) in seeds {
            if union(&mut self.parent, a, b) {
                self.merges += 1;
            }
            queue.push_back((a, b));
        }
        let n = self.vars.len();
        let mut used = Vec::with_capacity(8);
        while let Some((a, b)) = queue.pop_front() {
            let (ta, tb) = (self.universe.term(a), self.universe.term(b));
            used.clear();
            used.extend(ta.occurrences().iter().chain(tb.occurrences()).map(|v| v.0));
            used.sort_unstable();
            used.dedup();
            let universe = &self.universe;
            let parent = &mut self.parent;
            let merges = &mut self.merges;
            for_each_map(used.len(), n, |img| {
                let map = |v: Variable| Variable(img[used.binary_search(&v.0).unwrap()]);
                let ia = universe.index_of(&ta.substitute(map)).unwrap();
                let ib = universe.index_of(&tb.substitute(map)).unwrap();
                if union(parent, ia, ib) {
                    *merges += 1;
                    queue.push_back((ia, ib));
                }
            });
        }
        for i in 0..self.parent.len() {
            let r = find(&mut self.parent, i);
            self.parent[i] = r;
        }
    }

    /// One naive pass over every term and every substitution `X -> X`,
    /// merging `t[g]` with `rep(t)[g]`. Returns the number of merges, which
    /// is zero on a saturated index.
    pub fn full_pass(&mut self) -> usize {
        let n = self.vars.len();
        let mut merged = 0;
        let terms: Vec<LinearTerm> = (0..self.universe.len()).map(|i| self.universe.term(i)).collect();
        let universe = &self.universe;
        let parent = &mut self.parent;
        for_each_map(n, n, |img| {
            for (i, t) in terms.iter().enumerate() {
                let r = find(parent, i);
                if r == i {
                    continue;
                }
                let gi = universe.index_of(&t.substitute(|v| Variable(img[v.0]))).unwrap();
                let gr = universe
                    .index_of(&terms[r].substitute(|v| Variable(img[v.0])))
                    .unwrap();
                if union(parent, gi, gr) {
                    merged += 1;
                }
            }
        });
        for i in 0..self.parent.len() {
            let r = find(&mut self.parent, i);
            self.parent[i] = r;
        }
        self.merges += merged;
        merged
    }

    pub fn condition(&self) -> &MaltsevCondition {
        &self.condition
    }

    pub fn variable_set(&self) -> VariableSet {
        self.vars
    }

    pub fn universe(&self) -> &TermUniverse {
        &self.universe
    }

    /// Total number of successful merges performed so far.
    pub fn merges(&self) -> usize {
        self.merges
    }

    /// Representative (least member index) of the class of term `i`.
    pub fn representative(&self, i: usize) -> usize {
        self.parent[i]
    }

    pub fn same_class(&self, a: usize, b: usize) -> bool {
        self.parent[a] == self.parent[b]
    }

    /// Whether both terms lie in the universe and in the same class.
    pub fn derivable(&self, lhs: &LinearTerm, rhs: &LinearTerm) -> bool {
        match (self.universe.index_of(lhs), self.universe.index_of(rhs)) {
            (Some(a), Some(b)) => self.same_class(a, b),
            _ => false,
        }
    }

    /// Classes sorted by representative; members in index order.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut by_rep: Vec<Vec<usize>> = vec![Vec::new(); self.parent.len()];
        for (i, &r) in self.parent.iter().enumerate() {
            by_rep[r].push(i);
        }
        by_rep.into_iter().filter(|c| !c.is_empty()).collect()
    }

    pub fn is_consistent(&self) -> bool {
        (0..self.vars.len()).all(|v| self.parent[v] == v)
    }

    pub fn entails(&self, phi: &Identity) -> Result<EntailmentVerdict, EntailmentError> {
        let sig = self.condition.signature();
        for t in [&phi.lhs, &phi.rhs] {
            if let LinearTerm::App { symbol, args } = t {
                match sig.get(symbol.0) {
                    Some(s) if s.arity == args.len() => {}
                    _ => {
                        return Err(EntailmentError::TermOutsideUniverse(format!(
                            "symbol #{} applied to {} arguments",
                            symbol.0,
                            args.len()
                        )))
                    }
                }
            }
        }
        let d = phi.variables().len();
        if d > self.vars.len() {
            return Err(EntailmentError::VariableSetTooSmall {
                available: self.vars.len(),
                needed: d,
                reason: format!("query {}", self.condition.display_identity(phi)),
            });
        }
        // renaming variables injectively does not change derivability
        let phi = phi.compact();
        let derivable = self.same_class(self.position(&phi.lhs), self.position(&phi.rhs));
        let inconsistent = !self.is_consistent();
        Ok(EntailmentVerdict {
            derivable,
            inconsistent,
            semantic: derivable || inconsistent,
        })
    }

    pub fn display_term(&self, i: usize) -> String {
        let t = self.universe.term(i);
        self.condition.display_term(&t).to_string()
    }

    /// Line-per-class dump, classes sorted by representative.
    pub fn dump(&self) -> ClassDump<'_> {
        ClassDump { index: self }
    }
}

pub struct ClassDump<'a> {
    index: &'a EntailmentIndex,
}

impl fmt::Display for ClassDump<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for class in self.index.classes() {
            let members: Vec<String> = class.iter().map(|&i| self.index.display_term(i)).collect();
            writeln!(f, "{}", members.join(" "))?;
        }
        Ok(())
    }
}

/// Memo table of closures keyed by condition and variable-set size.
#[derive(Default)]
pub struct ClosureCache {
    map: Mutex<HashMap<(MaltsevCondition, usize), Arc<EntailmentIndex>>>,
}

impl ClosureCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        m: &MaltsevCondition,
        vars: VariableSet,
    ) -> Result<Arc<EntailmentIndex>, EntailmentError> {
        let key = (m.clone(), vars.len());
        if let Some(hit) = self.map.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let index = Arc::new(weak_closure(m, vars)?);
        Ok(Arc::clone(
            self.map.lock().unwrap().entry(key).or_insert(index),
        ))
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

//! Interpretations of strong linear Maltsev conditions in the two-element
//! dual implication algebra `I^d = ({0,1}, →^d)` with `x →^d y = ¬x ∧ y`.
//!
//! The term operations of `I^d` are exactly the boolean functions lying
//! below some projection. A condition has an interpretation there precisely
//! when it is consistent and no symbol entails cube identities, and this
//! module makes that equivalence checkable by brute force.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::algebras::{evaluate, FiniteAlgebra, Operation, TermTree};
use crate::cube::{check_condition_in, CubeError};
use crate::entailment::weak_closure;
use crate::terms::{canonical_variable_set, LinearTerm, MaltsevCondition, SymbolId, Variable};

pub const IMPD: &str = "impd";
pub const MAX_CLONE_ARITY: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterpError {
    #[error("arity {0} is outside the supported range 1..={MAX_CLONE_ARITY}")]
    UnsupportedArity(usize),
    #[error("symbol `{name}` has arity {arity}, outside the supported range 1..={MAX_CLONE_ARITY}")]
    UnsupportedSymbol { name: String, arity: usize },
    #[error(transparent)]
    Cube(#[from] CubeError),
}

/// The algebra `I^d`.
pub fn dual_implication_algebra() -> FiniteAlgebra {
    FiniteAlgebra::new(2, vec![Operation::from_fn(IMPD, 2, 2, |a| (a[0] == 0 && a[1] == 1) as usize)])
        .expect("valid table")
}

pub fn impd(a: TermTree, b: TermTree) -> TermTree {
    TermTree::node(IMPD, vec![a, b])
}

/// `a ∧ b` written as `(a →^d b) →^d b`.
pub fn meet(a: TermTree, b: TermTree) -> TermTree {
    impd(impd(a, b.clone()), b)
}

/// A `k`-ary boolean function. Bit `c` of `table` is the value at the tuple
/// whose binary code (first argument most significant) is `c`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BooleanFunction {
    pub arity: usize,
    pub table: u64,
}

impl BooleanFunction {
    pub fn from_fn(arity: usize, f: impl Fn(&[usize]) -> usize) -> Self {
        let mut table = 0;
        for code in 0..1usize << arity {
            if f(&bits(code, arity)) != 0 {
                table |= 1 << code;
            }
        }
        BooleanFunction { arity, table }
    }

    pub fn projection(arity: usize, i: usize) -> Self {
        Self::from_fn(arity, |a| a[i])
    }

    pub fn apply(self, args: &[usize]) -> usize {
        let code = args.iter().fold(0, |acc, &a| (acc << 1) | a);
        ((self.table >> code) & 1) as usize
    }

    /// Pointwise `self →^d other`.
    pub fn impd(self, other: Self) -> Self {
        BooleanFunction {
            arity: self.arity,
            table: !self.table & other.table,
        }
    }

    /// Truth table in the row-major order used for operation tables.
    pub fn truth_table(self) -> Vec<usize> {
        (0..1usize << self.arity).map(|c| ((self.table >> c) & 1) as usize).collect()
    }

    /// Points where the function is 1, as codes.
    fn support(self) -> impl Iterator<Item = u64> {
        (0..1u64 << self.arity).filter(move |&c| (self.table >> c) & 1 == 1)
    }
}

fn bits(code: usize, arity: usize) -> Vec<usize> {
    (0..arity).map(|i| (code >> (arity - 1 - i)) & 1).collect()
}

/// A clone member with a term over `→^d` producing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanOperationEntry {
    pub function: BooleanFunction,
    pub defining_term: TermTree,
}

impl BooleanOperationEntry {
    pub fn arity(&self) -> usize {
        self.function.arity
    }
}

/// Every `k`-ary term operation of `I^d`, breadth first by composition
/// depth so each function carries one of its shallowest terms. Within a
/// round, the smallest term wins.
pub fn clone_enumerate(k: usize) -> Result<Vec<BooleanOperationEntry>, InterpError> {
    if !(1..=MAX_CLONE_ARITY).contains(&k) {
        return Err(InterpError::UnsupportedArity(k));
    }
    let mut entries: Vec<BooleanOperationEntry> = Vec::new();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    for i in 0..k {
        let f = BooleanFunction::projection(k, i);
        if seen.insert(f.table, entries.len()).is_none() {
            entries.push(BooleanOperationEntry {
                function: f,
                defining_term: TermTree::Leaf(i),
            });
        }
    }
    let mut frontier_start = 0;
    while frontier_start < entries.len() {
        let end = entries.len();
        let mut round: HashMap<u64, (usize, usize, usize)> = HashMap::new();
        let mut order: Vec<u64> = Vec::new();
        let sizes: Vec<usize> = entries.iter().map(|e| e.defining_term.size()).collect();
        for a in 0..end {
            for b in 0..end {
                if a < frontier_start && b < frontier_start {
                    continue;
                }
                let t = entries[a].function.impd(entries[b].function).table;
                if seen.contains_key(&t) {
                    continue;
                }
                let size = sizes[a] + sizes[b] + 1;
                match round.get_mut(&t) {
                    Some(best) if best.0 <= size => {}
                    Some(best) => *best = (size, a, b),
                    None => {
                        round.insert(t, (size, a, b));
                        order.push(t);
                    }
                }
            }
        }
        order.sort_by_key(|t| (round[t].0, *t));
        for t in order {
            let (_, a, b) = round[&t];
            seen.insert(t, entries.len());
            entries.push(BooleanOperationEntry {
                function: BooleanFunction { arity: k, table: t },
                defining_term: impd(entries[a].defining_term.clone(), entries[b].defining_term.clone()),
            });
        }
        frontier_start = end;
    }
    Ok(entries)
}

/// Whether `f` preserves `R_m = {0,1}^m \ {(1,…,1)}`.
///
/// Stack `m` argument tuples of `R_m` as columns: each of the `m` rows is a
/// point of `{0,1}^k`, and the columns avoid all-ones exactly when the rows
/// have bitwise meet 0. So `f` fails iff at most `m` points of its support
/// meet to 0.
pub fn preserves_relation(f: BooleanFunction, m: usize) -> bool {
    let support: Vec<u64> = f.support().collect();
    let mut reachable: std::collections::HashSet<u64> = support.iter().copied().collect();
    let steps = m.min(1 << f.arity);
    for _ in 1..steps {
        let next: Vec<u64> = reachable
            .iter()
            .flat_map(|&r| support.iter().map(move |&p| r & p))
            .collect();
        let before = reachable.len();
        reachable.extend(next);
        if reachable.len() == before {
            break;
        }
    }
    m == 0 || !reachable.contains(&0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interpretation {
    pub assignment: Vec<(SymbolId, String, BooleanOperationEntry)>,
}

impl Interpretation {
    /// `{0,1}` with each symbol of the condition interpreted by its entry.
    pub fn to_algebra(&self) -> FiniteAlgebra {
        let ops = self
            .assignment
            .iter()
            .map(|(_, name, e)| Operation {
                symbol: crate::terms::OperationSymbol::new(name.clone(), e.arity()),
                table: e.function.truth_table(),
            })
            .collect();
        FiniteAlgebra::new(2, ops).expect("boolean tables are valid")
    }

    pub fn entry(&self, name: &str) -> Option<&BooleanOperationEntry> {
        self.assignment.iter().find(|(_, n, _)| n == name).map(|(_, _, e)| e)
    }
}

/// A term over `→^d` with leaves shown as `x, y, z, u, …`.
pub fn render_term(t: &TermTree) -> String {
    match t {
        TermTree::Leaf(i) => Variable(*i).name(),
        TermTree::Node { symbol, children } => {
            let args: Vec<String> = children.iter().map(render_term).collect();
            format!("{symbol}({})", args.join(","))
        }
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (_, name, e) in &self.assignment {
            let vars: Vec<String> = (0..e.arity()).map(|i| Variable(i).name()).collect();
            writeln!(f, "{name}({}) = {}", vars.join(","), render_term(&e.defining_term))?;
        }
        Ok(())
    }
}

struct Compiled {
    vars: usize,
    lhs: LinearTerm,
    rhs: LinearTerm,
    symbols: Vec<usize>,
}

fn eval_bool(t: &LinearTerm, funcs: &[Option<BooleanFunction>], assignment: &[usize]) -> usize {
    match t {
        LinearTerm::Var(v) => assignment[v.0],
        LinearTerm::App { symbol, args } => {
            let f = funcs[symbol.0].expect("assigned");
            let vals: Vec<usize> = args.iter().map(|v| assignment[v.0]).collect();
            f.apply(&vals)
        }
    }
}

fn holds(id: &Compiled, funcs: &[Option<BooleanFunction>]) -> bool {
    (0..1usize << id.vars).all(|code| {
        let a = bits(code, id.vars);
        eval_bool(&id.lhs, funcs, &a) == eval_bool(&id.rhs, funcs, &a)
    })
}

/// Searches for an assignment of a term operation of `I^d` to every symbol
/// of `m` satisfying all identities.
pub fn find_interpretation(m: &MaltsevCondition) -> Result<Option<Interpretation>, InterpError> {
    let sig = m.signature();
    if let Some(s) = sig.iter().find(|s| !(1..=MAX_CLONE_ARITY).contains(&s.arity)) {
        return Err(InterpError::UnsupportedSymbol {
            name: s.name.clone(),
            arity: s.arity,
        });
    }
    let mut clones: HashMap<usize, Vec<BooleanOperationEntry>> = HashMap::new();
    for s in sig {
        if !clones.contains_key(&s.arity) {
            let mut c = clone_enumerate(s.arity)?;
            c.sort_by_key(|e| e.defining_term.size());
            clones.insert(s.arity, c);
        }
    }
    let ids: Vec<Compiled> = m
        .identities()
        .iter()
        .map(|id| {
            let id = id.compact();
            let mut symbols: Vec<usize> = id.symbols().map(|s| s.0).collect();
            symbols.sort_unstable();
            symbols.dedup();
            Compiled {
                vars: id.variables().len(),
                lhs: id.lhs,
                rhs: id.rhs,
                symbols,
            }
        })
        .collect();

    // candidates surviving the identities that mention a single symbol
    let mut candidates: Vec<Vec<&BooleanOperationEntry>> = Vec::with_capacity(sig.len());
    for (h, s) in sig.iter().enumerate() {
        let local: Vec<&Compiled> = ids.iter().filter(|id| id.symbols == [h]).collect();
        let mut funcs = vec![None; sig.len()];
        let list = clones[&s.arity]
            .iter()
            .filter(|e| {
                funcs[h] = Some(e.function);
                local.iter().all(|id| holds(id, &funcs))
            })
            .collect();
        candidates.push(list);
    }

    let participation = |h: usize| ids.iter().filter(|id| id.symbols.contains(&h)).count();
    let mut order: Vec<usize> = (0..sig.len()).collect();
    order.sort_by_key(|&h| (std::cmp::Reverse(participation(h)), candidates[h].len(), h));
    let mut rank = vec![0; sig.len()];
    for (r, &h) in order.iter().enumerate() {
        rank[h] = r;
    }
    // identities with several symbols, checked once their last symbol in
    // search order is assigned
    let mut due: Vec<Vec<&Compiled>> = vec![Vec::new(); sig.len()];
    for id in ids.iter().filter(|id| id.symbols.len() > 1) {
        let last = id.symbols.iter().map(|&h| rank[h]).max().expect("nonempty");
        due[last].push(id);
    }
    // identities without symbols hold only when both sides are one variable
    if ids.iter().any(|id| id.symbols.is_empty() && !holds(id, &[])) {
        return Ok(None);
    }

    fn search(
        depth: usize,
        order: &[usize],
        candidates: &[Vec<&BooleanOperationEntry>],
        due: &[Vec<&Compiled>],
        funcs: &mut Vec<Option<BooleanFunction>>,
        chosen: &mut Vec<usize>,
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let h = order[depth];
        for (c, e) in candidates[h].iter().enumerate() {
            funcs[h] = Some(e.function);
            if due[depth].iter().all(|id| holds(id, funcs)) {
                chosen[h] = c;
                if search(depth + 1, order, candidates, due, funcs, chosen) {
                    return true;
                }
            }
        }
        funcs[h] = None;
        false
    }

    let mut funcs = vec![None; sig.len()];
    let mut chosen = vec![0; sig.len()];
    if !search(0, &order, &candidates, &due, &mut funcs, &mut chosen) {
        return Ok(None);
    }
    Ok(Some(Interpretation {
        assignment: m
            .symbol_ids()
            .map(|h| (h, m.symbol(h).name.clone(), candidates[h.0][chosen[h.0]].clone()))
            .collect(),
    }))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoInterpretation {
    Inconsistent,
    CubeIdentities(String),
    /// Neither obstruction applies yet nothing was found. Never expected.
    Unexplained,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InterpretationReport {
    Found(Interpretation),
    None(NoInterpretation),
}

impl InterpretationReport {
    pub fn found(&self) -> bool {
        matches!(self, InterpretationReport::Found(_))
    }
}

impl fmt::Display for InterpretationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterpretationReport::Found(i) => write!(f, "{i}"),
            InterpretationReport::None(NoInterpretation::Inconsistent) => {
                writeln!(f, "no interpretation (reason: inconsistent)")
            }
            InterpretationReport::None(NoInterpretation::CubeIdentities(h)) => {
                writeln!(f, "no interpretation (reason: cube identities for {h})")
            }
            InterpretationReport::None(NoInterpretation::Unexplained) => {
                writeln!(f, "no interpretation (reason: unexplained)")
            }
        }
    }
}

/// [`find_interpretation`] plus the obstruction explaining a failure.
pub fn interpret(m: &MaltsevCondition) -> Result<InterpretationReport, InterpError> {
    if let Some(i) = find_interpretation(m)? {
        return Ok(InterpretationReport::Found(i));
    }
    let index = weak_closure(m, canonical_variable_set(m, None)).map_err(CubeError::from)?;
    if !index.is_consistent() {
        return Ok(InterpretationReport::None(NoInterpretation::Inconsistent));
    }
    let report = check_condition_in(&index)?;
    Ok(InterpretationReport::None(match report.first_cube_symbol() {
        Some(h) => NoInterpretation::CubeIdentities(h.to_string()),
        None => NoInterpretation::Unexplained,
    }))
}

/// Evaluates every entry's term in `I^d` and compares with its table.
pub fn entry_is_consistent(e: &BooleanOperationEntry) -> bool {
    let a = dual_implication_algebra();
    (0..1usize << e.arity()).all(|code| {
        let args = bits(code, e.arity());
        evaluate(&e.defining_term, &a, &args).ok() == Some(e.function.apply(&args))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebras::satisfies;
    use crate::terms::{hagemann_mitschke_condition, jonsson_condition, parse_condition, union_conditions};

    fn x() -> TermTree {
        TermTree::Leaf(0)
    }
    fn y() -> TermTree {
        TermTree::Leaf(1)
    }
    fn z() -> TermTree {
        TermTree::Leaf(2)
    }

    fn function_of(t: &TermTree, k: usize) -> BooleanFunction {
        let a = dual_implication_algebra();
        BooleanFunction::from_fn(k, |args| evaluate(t, &a, args).unwrap())
    }

    #[test]
    fn operation_table() {
        let a = dual_implication_algebra();
        assert_eq!(a.apply(0, &[0, 1]), 1);
        assert_eq!(a.apply(0, &[1, 1]), 0);
        assert_eq!(a.apply(0, &[0, 0]), 0);
        assert_eq!(a.apply(0, &[1, 0]), 0);
    }

    #[test]
    fn clone_sizes() {
        let sizes: Vec<usize> = (1..=4).map(|k| clone_enumerate(k).unwrap().len()).collect();
        assert_eq!(sizes, [2, 6, 38, 942]);
        assert!(clone_enumerate(0).is_err());
        assert!(clone_enumerate(5).is_err());
    }

    #[test]
    fn clone_contents() {
        let c1 = clone_enumerate(1).unwrap();
        assert!(c1.iter().any(|e| e.function.table == 0));
        let c2 = clone_enumerate(2).unwrap();
        let and = BooleanFunction::from_fn(2, |a| a[0] & a[1]);
        assert!(c2.iter().any(|e| e.function == and));
        assert_eq!(function_of(&meet(x(), y()), 2), and);
        let c3 = clone_enumerate(3).unwrap();
        let d2 = function_of(&impd(impd(x(), y()), z()), 3);
        assert!(c3.iter().any(|e| e.function == d2));
    }

    #[test]
    fn clone_is_the_set_below_projections() {
        for k in 1..=4 {
            let members: std::collections::HashSet<u64> =
                clone_enumerate(k).unwrap().iter().map(|e| e.function.table).collect();
            for table in 0..1u64 << (1 << k) {
                let below = (0..k).any(|i| {
                    let p = BooleanFunction::projection(k, i).table;
                    table & !p == 0
                });
                assert_eq!(members.contains(&table), below, "k={k} table={table:b}");
            }
        }
    }

    #[test]
    fn clone_entries_and_closure() {
        for k in 1..=3 {
            let c = clone_enumerate(k).unwrap();
            assert!(c.iter().all(entry_is_consistent));
            let set: std::collections::HashSet<u64> = c.iter().map(|e| e.function.table).collect();
            for a in &c {
                for b in &c {
                    assert!(set.contains(&a.function.impd(b.function).table));
                }
            }
        }
    }

    /// Literal check: every `k`-tuple of members of `R_m`.
    fn preserves_brute(f: BooleanFunction, m: usize) -> bool {
        let all_ones = (1usize << m) - 1;
        let members: Vec<usize> = (0..1usize << m).filter(|&r| r != all_ones).collect();
        let k = f.arity;
        let total = members.len().pow(k as u32);
        (0..total).all(|mut code| {
            let cols: Vec<usize> = (0..k)
                .map(|_| {
                    let c = members[code % members.len()];
                    code /= members.len();
                    c
                })
                .collect();
            let result = (0..m).fold(0, |acc, j| {
                let args: Vec<usize> = cols.iter().map(|c| (c >> j) & 1).collect();
                acc | (f.apply(&args) << j)
            });
            result != all_ones
        })
    }

    #[test]
    fn preservation_examples() {
        let neg = BooleanFunction::from_fn(1, |a| 1 - a[0]);
        assert!(!preserves_relation(neg, 1));
        let one = BooleanFunction::from_fn(1, |_| 1);
        assert!(!preserves_relation(one, 1));
        for k in 1..=3 {
            for e in clone_enumerate(k).unwrap() {
                for m in 1..=4 {
                    assert!(preserves_relation(e.function, m));
                }
            }
        }
    }

    #[test]
    fn preservation_matches_brute_force() {
        for k in 1..=2 {
            for table in 0..1u64 << (1 << k) {
                let f = BooleanFunction { arity: k, table };
                for m in 1..=4 {
                    assert_eq!(preserves_relation(f, m), preserves_brute(f, m), "k={k} t={table:b} m={m}");
                }
            }
        }
    }

    #[test]
    fn polymorphisms_are_the_clone() {
        // at m = 2^k preservation of R_m singles out the clone
        for k in 1..=3 {
            let members: std::collections::HashSet<u64> =
                clone_enumerate(k).unwrap().iter().map(|e| e.function.table).collect();
            for table in 0..1u64 << (1 << k) {
                let f = BooleanFunction { arity: k, table };
                assert_eq!(preserves_relation(f, 1 << k), members.contains(&table));
            }
        }
    }

    #[test]
    fn known_terms_for_cd3_and_cp3() {
        let cd3 = jonsson_condition(3).unwrap();
        let d1 = impd(meet(impd(y(), x()), impd(z(), x())), x());
        let d2 = impd(impd(x(), y()), z());
        let cp3 = hagemann_mitschke_condition(3).unwrap();
        let p1 = impd(impd(z(), y()), x());
        let p2 = impd(impd(x(), y()), z());
        for (m, terms) in [(cd3, [("d_1", d1), ("d_2", d2)]), (cp3, [("p_1", p1), ("p_2", p2)])] {
            let ops = m
                .signature()
                .iter()
                .map(|s| {
                    let t = match terms.iter().find(|(n, _)| *n == s.name) {
                        Some((_, t)) => t.clone(),
                        None if s.name.ends_with("_0") => x(),
                        None => z(),
                    };
                    Operation {
                        symbol: s.clone(),
                        table: function_of(&t, 3).truth_table(),
                    }
                })
                .collect();
            assert!(satisfies(&FiniteAlgebra::new(2, ops).unwrap(), &m).unwrap().holds());
        }
    }

    #[test]
    fn search_results() {
        for m in [
            jonsson_condition(3).unwrap(),
            hagemann_mitschke_condition(3).unwrap(),
            union_conditions(&[jonsson_condition(3).unwrap(), hagemann_mitschke_condition(3).unwrap()]).unwrap(),
        ] {
            let i = find_interpretation(&m).unwrap().expect("interpretable");
            assert!(satisfies(&i.to_algebra(), &m).unwrap().holds());
            assert!(i.assignment.iter().all(|(_, _, e)| entry_is_consistent(e)));
        }
        let maltsev = parse_condition("signature: p/3\nidentities:\n p(x,y,y) = x\n p(y,y,x) = x\n").unwrap();
        assert_eq!(find_interpretation(&maltsev).unwrap(), None);
        assert_eq!(
            interpret(&maltsev).unwrap().to_string(),
            "no interpretation (reason: cube identities for p)\n"
        );
        let bad = parse_condition("signature: h/2\nidentities:\n h(x,y) = x\n h(x,y) = y\n").unwrap();
        assert_eq!(interpret(&bad).unwrap().to_string(), "no interpretation (reason: inconsistent)\n");
        let wide = parse_condition("signature: h/5\nidentities:\n h(x,x,x,x,x) = x\n").unwrap();
        assert!(find_interpretation(&wide).is_err());
    }

    #[test]
    fn report_lists_terms() {
        let m = parse_condition("signature: h/2\nidentities:\n h(x,x) = x\n").unwrap();
        assert_eq!(interpret(&m).unwrap().to_string(), "h(x,y) = x\n");
    }
}

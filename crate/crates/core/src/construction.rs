//! The extension `A_M` of a finite algebra `A` by a consistent, cube-free
//! strong linear Maltsev condition `M`, and the machinery showing that the
//! extension has the same subpower membership answers as `A`.
//!
//! `A_M` lives on `A ∪ {0}`, with the new element `0` stored as index
//! `n = |A|`. The operations of `A` are extended so that `0` absorbs. A
//! symbol `h` of `M` applied to `ā` looks only at the equality pattern of
//! `ā`: if the condition derives `h(x̄) ≈ x_i` for the canonical variable
//! tuple `x̄` of that pattern, the result is `a_i`, otherwise `0`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::algebras::{
    evaluate, smp_decide, AlgebraError, ClosureConfig, ClosureError, Element, FiniteAlgebra,
    Operation, SmpInstance, TermTree,
};
use crate::cube::{check_condition_in, CubeError, PositionSet};
use crate::entailment::{weak_closure, EntailmentError, EntailmentIndex};
use crate::terms::{
    canonical_variable_set, EqualityPattern, LinearTerm, MaltsevCondition, SymbolId, Variable,
};

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("operation `{0}` occurs both in the algebra and in the condition")]
    SignatureCollision(String),
    #[error("the condition is inconsistent")]
    Inconsistent,
    #[error("the condition entails cube identities for `{0}`")]
    CubeIdentities(String),
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error(transparent)]
    Entailment(#[from] EntailmentError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no common position for `{symbol}`: position sets {}", render_family(.family))]
    EmptyIntersection {
        symbol: String,
        family: Vec<PositionSet>,
    },
}

fn render_family(family: &[PositionSet]) -> String {
    family.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum PatternResult {
    /// Return the argument at this (0-based) position.
    Position(usize),
    Absorb,
}

impl fmt::Display for PatternResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternResult::Position(i) => write!(f, "x{}", i + 1),
            PatternResult::Absorb => f.write_str("0"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternEntry {
    pub pattern: EqualityPattern,
    pub result: PatternResult,
    /// Every position `i` with `h(x̄) ≈ x_i` derivable, ascending.
    pub derivable: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternTable {
    pub symbol: SymbolId,
    pub name: String,
    pub arity: usize,
    pub entries: Vec<PatternEntry>,
    lookup: HashMap<EqualityPattern, usize>,
}

impl PatternTable {
    pub fn entry(&self, pattern: &EqualityPattern) -> Option<&PatternEntry> {
        self.lookup.get(pattern).map(|&i| &self.entries[i])
    }

    pub fn result(&self, pattern: &EqualityPattern) -> PatternResult {
        self.entry(pattern).map_or(PatternResult::Absorb, |e| e.result)
    }
}

pub struct ExtendedAlgebra {
    pub base: FiniteAlgebra,
    pub extended: FiniteAlgebra,
    /// Index of the absorbing element, equal to the base size.
    pub absorbing: Element,
    pub condition: MaltsevCondition,
    pub index: Arc<EntailmentIndex>,
    pub pattern_tables: Vec<PatternTable>,
}

impl ExtendedAlgebra {
    pub fn is_condition_symbol(&self, name: &str) -> bool {
        self.condition.symbol_id(name).is_some()
    }

    /// Comment lines describing the absorbing index and the pattern tables.
    pub fn header_comments(&self) -> Vec<String> {
        let mut out = vec![format!("absorbing element: {}", self.absorbing)];
        for t in &self.pattern_tables {
            let cells: Vec<String> = t
                .entries
                .iter()
                .map(|e| format!("{}->{}", e.pattern, e.result))
                .collect();
            out.push(format!("{}/{}: {}", t.name, t.arity, cells.join(" ")));
        }
        out
    }
}

/// Builds `A_M`, checking that the two signatures are disjoint, that `M` is
/// consistent and that no symbol of `M` entails cube identities.
pub fn extend(a: &FiniteAlgebra, m: &MaltsevCondition) -> Result<ExtendedAlgebra, ConstructionError> {
    check_disjoint(a, m)?;
    let index = Arc::new(weak_closure(m, canonical_variable_set(m, None))?);
    if !index.is_consistent() {
        return Err(ConstructionError::Inconsistent);
    }
    let report = check_condition_in(&index)?;
    if let Some(h) = report.first_cube_symbol() {
        return Err(ConstructionError::CubeIdentities(h.to_string()));
    }
    build(a, m, index)
}

/// [`extend`] without the consistency and cube checks. Meant for
/// demonstrating what breaks when those preconditions fail.
pub fn extend_unchecked(
    a: &FiniteAlgebra,
    m: &MaltsevCondition,
) -> Result<ExtendedAlgebra, ConstructionError> {
    check_disjoint(a, m)?;
    let index = Arc::new(weak_closure(m, canonical_variable_set(m, None))?);
    build(a, m, index)
}

fn check_disjoint(a: &FiniteAlgebra, m: &MaltsevCondition) -> Result<(), ConstructionError> {
    match m.signature().iter().find(|s| a.operation_index(&s.name).is_some()) {
        Some(s) => Err(ConstructionError::SignatureCollision(s.name.clone())),
        None => Ok(()),
    }
}

fn pattern_table(index: &EntailmentIndex, h: SymbolId) -> PatternTable {
    let sym = index.condition().symbol(h);
    let entries: Vec<PatternEntry> = EqualityPattern::all(sym.arity)
        .into_iter()
        .map(|pattern| {
            let xs = pattern.canonical_variables();
            let lhs = LinearTerm::app(h, xs.iter().copied());
            let derivable: Vec<usize> = (0..sym.arity)
                .filter(|&i| index.derivable(&lhs, &LinearTerm::Var(xs[i])))
                .collect();
            let result = derivable
                .first()
                .map_or(PatternResult::Absorb, |&i| PatternResult::Position(i));
            PatternEntry {
                pattern,
                result,
                derivable,
            }
        })
        .collect();
    let lookup = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.pattern.clone(), i))
        .collect();
    PatternTable {
        symbol: h,
        name: sym.name.clone(),
        arity: sym.arity,
        entries,
        lookup,
    }
}

/// Calls `f` on every tuple of `{0..n}^k` in lexicographic order.
fn for_each_tuple(n: usize, k: usize, mut f: impl FnMut(&[Element])) {
    let mut t = vec![0; k];
    loop {
        f(&t);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < n {
                break;
            }
            t[i] = 0;
        }
    }
}

fn build(
    a: &FiniteAlgebra,
    m: &MaltsevCondition,
    index: Arc<EntailmentIndex>,
) -> Result<ExtendedAlgebra, ConstructionError> {
    let n = a.size();
    let size = n + 1;
    let mut ops = Vec::with_capacity(a.operations().len() + m.signature().len());
    for (op, o) in a.operations().iter().enumerate() {
        let mut table = Vec::with_capacity(size.pow(o.symbol.arity as u32));
        for_each_tuple(size, o.symbol.arity, |t| {
            table.push(if t.contains(&n) { n } else { a.apply(op, t) });
        });
        ops.push(Operation {
            symbol: o.symbol.clone(),
            table,
        });
    }
    let pattern_tables: Vec<PatternTable> = m.symbol_ids().map(|h| pattern_table(&index, h)).collect();
    for t in &pattern_tables {
        let mut table = Vec::with_capacity(size.pow(t.arity as u32));
        for_each_tuple(size, t.arity, |args| {
            table.push(match t.result(&EqualityPattern::of(args)) {
                PatternResult::Position(i) => args[i],
                PatternResult::Absorb => n,
            });
        });
        ops.push(Operation {
            symbol: m.symbol(t.symbol).clone(),
            table,
        });
    }
    Ok(ExtendedAlgebra {
        base: a.clone(),
        extended: FiniteAlgebra::new(size, ops)?,
        absorbing: n,
        condition: m.clone(),
        index,
        pattern_tables,
    })
}

/// A pattern at which two different positions are both derivable results,
/// so the table value depends on which one is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditViolation {
    pub symbol: String,
    pub pattern: EqualityPattern,
    pub positions: (usize, usize),
    /// A tuple realizing the pattern where the two positions differ.
    pub tuple: Vec<Element>,
}

impl fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t: Vec<String> = self.tuple.iter().map(|v| v.to_string()).collect();
        write!(
            f,
            "{} at pattern {}: positions {} and {} both derivable, values differ at ({})",
            self.symbol,
            self.pattern,
            self.positions.0 + 1,
            self.positions.1 + 1,
            t.join(",")
        )
    }
}

/// Checks that every derivable result position of every pattern gives the
/// same value: all of them must sit in one block of the pattern. Any
/// injective realization of a pattern is a renaming of the canonical one,
/// so the canonical tuple is enough.
pub fn well_definedness_audit(ext: &ExtendedAlgebra) -> Result<(), AuditViolation> {
    for t in &ext.pattern_tables {
        for e in &t.entries {
            let first = e.pattern.first_occurrences();
            if let Some((&i, &j)) = e
                .derivable
                .iter()
                .zip(e.derivable.iter().skip(1))
                .find(|(&i, &j)| first[i] != first[j])
            {
                return Err(AuditViolation {
                    symbol: t.name.clone(),
                    pattern: e.pattern.clone(),
                    positions: (i, j),
                    tuple: e.pattern.blocks(),
                });
            }
        }
    }
    Ok(())
}

/// Injective maps from `blocks` items into `0..size`, in lexicographic
/// order.
fn injections(blocks: usize, size: usize, mut f: impl FnMut(&[usize]) -> bool) {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], blocks: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == blocks {
            return f(cur);
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                let go = rec(cur, used, blocks, f);
                cur.pop();
                used[v] = false;
                if !go {
                    return false;
                }
            }
        }
        true
    }
    if blocks <= size {
        rec(&mut Vec::new(), &mut vec![false; size], blocks, &mut f);
    }
}

/// Value of the linear term `w` (over the variables `y_1..y_ℓ`, stored as
/// variables `0..ℓ`) at `args` computed from entailment alone: the first
/// `a_j` such that some variable tuple with the equality pattern of `args`
/// derives `w ≈ x_j`, else the absorbing element.
pub fn evaluate_linear_via_pattern(
    ext: &ExtendedAlgebra,
    w: &LinearTerm,
    args: &[Element],
) -> Result<Element, ConstructionError> {
    if let Some(v) = w.occurrences().iter().find(|v| v.0 >= args.len()) {
        return Err(ConstructionError::Precondition(format!(
            "term uses {} but only {} values were given",
            v.name(),
            args.len()
        )));
    }
    let pattern = EqualityPattern::of(args);
    let blocks = pattern.blocks();
    let size = ext.index.variable_set().len();
    if pattern.block_count() > size {
        return Err(ConstructionError::Precondition(format!(
            "{} distinct values exceed the {size} variables of the closure",
            pattern.block_count()
        )));
    }
    let mut value = None;
    injections(pattern.block_count(), size, |map| {
        let xs: Vec<Variable> = blocks.iter().map(|&b| Variable(map[b])).collect();
        let image = w.substitute(|v| xs[v.0]);
        value = (0..args.len())
            .find(|&j| ext.index.derivable(&image, &LinearTerm::Var(xs[j])))
            .map(|j| args[j]);
        value.is_none()
    });
    Ok(value.unwrap_or(ext.absorbing))
}

/// Values of `t` at every coordinate of the generator tuples.
fn values(t: &TermTree, a: &FiniteAlgebra, gens: &[Vec<Element>], m: usize) -> Result<Vec<Element>, AlgebraError> {
    (0..m)
        .map(|j| {
            let column: Vec<Element> = gens.iter().map(|g| g[j]).collect();
            evaluate(t, a, &column)
        })
        .collect()
}

/// Rewrites a term over the signatures of `A` and `M` that sends the
/// generators `gens` to `target` in the extension into a term over the
/// signature of `A` alone with the same value.
///
/// Each symbol of `M` is handled top down. At such a node with children
/// values `c_1..c_k` and value `v`, every coordinate `j` yields the set
/// `B_j` of children agreeing with `v` at `j`; the node is replaced by the
/// least child lying in all of them.
pub fn eliminate_h(
    p: &TermTree,
    ext: &ExtendedAlgebra,
    gens: &[Vec<Element>],
    target: &[Element],
) -> Result<TermTree, ConstructionError> {
    let m = target.len();
    if gens.iter().any(|g| g.len() != m) {
        return Err(AlgebraError::RaggedTuples.into());
    }
    if target.contains(&ext.absorbing) {
        return Err(ConstructionError::Precondition(
            "target contains the absorbing element".into(),
        ));
    }
    let value = values(p, &ext.extended, gens, m)?;
    if value != target {
        return Err(ConstructionError::Precondition(
            "term does not evaluate to the target".into(),
        ));
    }
    eliminate_rec(p, &value, ext, gens, m)
}

fn eliminate_rec(
    p: &TermTree,
    value: &[Element],
    ext: &ExtendedAlgebra,
    gens: &[Vec<Element>],
    m: usize,
) -> Result<TermTree, ConstructionError> {
    let TermTree::Node { symbol, children } = p else {
        return Ok(p.clone());
    };
    let child_values = children
        .iter()
        .map(|c| values(c, &ext.extended, gens, m))
        .collect::<Result<Vec<_>, _>>()?;
    if !ext.is_condition_symbol(symbol) {
        // the absorbing element never appears in `value`, so it cannot
        // appear in any child of an operation of the base algebra
        let children = children
            .iter()
            .zip(&child_values)
            .map(|(c, v)| eliminate_rec(c, v, ext, gens, m))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(TermTree::node(symbol.clone(), children));
    }
    let family: Vec<PositionSet> = (0..m)
        .map(|j| PositionSet::from_positions((0..children.len()).filter(|&i| child_values[i][j] == value[j])))
        .collect();
    let common = family.iter().fold(u32::MAX, |acc, b| acc & b.0);
    let chosen = (0..children.len()).find(|&i| common & (1 << i) != 0);
    match chosen {
        Some(i) => eliminate_rec(&children[i], &child_values[i], ext, gens, m),
        None => Err(ConstructionError::EmptyIntersection {
            symbol: symbol.clone(),
            family,
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionCertificate {
    pub instance: SmpInstance,
    pub answer_base: bool,
    pub answer_extended: bool,
    /// Witness over the base signature obtained from the extension's
    /// witness, present when the extension answers yes.
    pub eliminated_witness: Option<TermTree>,
    /// The eliminated witness evaluates to the target in the base algebra.
    pub witness_verified: bool,
}

impl ReductionCertificate {
    pub fn ok(&self) -> bool {
        self.answer_base == self.answer_extended
            && (!self.answer_extended || self.witness_verified)
    }

    pub fn machine(&self) -> String {
        let yn = |b: bool| if b { "yes" } else { "no" };
        let mut out = format!(
            "base={}\nextended={}\ncertificate={}\n",
            yn(self.answer_base),
            yn(self.answer_extended),
            if self.ok() { "ok" } else { "failed" }
        );
        if let Some(w) = &self.eliminated_witness {
            out.push_str(&format!("witness={w}\n"));
        }
        out
    }
}

impl fmt::Display for ReductionCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        writeln!(
            f,
            "base: {}, extended: {}, certificate {}",
            yn(self.answer_base),
            yn(self.answer_extended),
            if self.ok() { "OK" } else { "FAILED" }
        )?;
        if let Some(w) = &self.eliminated_witness {
            writeln!(f, "witness: {w}")?;
        }
        Ok(())
    }
}

/// Solves the same instance over `A` and over `A_M` and, for a yes answer,
/// turns the extension's witness into one over the base signature.
pub fn reduce_and_certify(
    a: &FiniteAlgebra,
    m: &MaltsevCondition,
    inst: &SmpInstance,
    config: &ClosureConfig,
) -> Result<ReductionCertificate, ConstructionError> {
    let ext = extend(a, m)?;
    certify(&ext, inst, config)
}

/// [`reduce_and_certify`] against an extension that is already built.
pub fn certify(
    ext: &ExtendedAlgebra,
    inst: &SmpInstance,
    config: &ClosureConfig,
) -> Result<ReductionCertificate, ConstructionError> {
    inst.validate(ext.base.size())?;
    let with_witness = config.clone().with_witnesses();
    let (base, extended) = rayon::join(
        || smp_decide(&ext.base, inst, config),
        || smp_decide(&ext.extended, inst, &with_witness),
    );
    let (base, extended) = (base?, extended?);
    let mut eliminated_witness = None;
    let mut witness_verified = false;
    if let Some(w) = &extended.witness {
        let p = eliminate_h(w, ext, &inst.generators, &inst.target)?;
        let direct = values(&p, &ext.base, &inst.generators, inst.m)?;
        witness_verified =
            direct == inst.target && !p.any_symbol(&|s| ext.is_condition_symbol(s));
        eliminated_witness = Some(p);
    }
    Ok(ReductionCertificate {
        instance: inst.clone(),
        answer_base: base.member,
        answer_extended: extended.member,
        eliminated_witness,
        witness_verified,
    })
}

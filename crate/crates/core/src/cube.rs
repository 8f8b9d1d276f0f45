//! Deciding whether a condition entails cube identities for one of its
//! symbols.
//!
//! For a `k`-ary symbol `h` and `B ⊆ {1..k}` write `w^B` for the tuple with
//! `y` at the positions of `B` and `x` elsewhere. A set of cube identities
//! for `h` is a list of rows `h(w^{B_j}) = y` such that no column is all `y`,
//! i.e. the `B_j` have empty intersection. So cube identities are entailed
//! iff the family of all `B` with `h(w^B) = y` entailed is nonempty and has
//! empty intersection: any entailed cube-identity set consists of members of
//! the family, and conversely the rows `w^B` of any subfamily with empty
//! intersection form one.

use std::fmt;

use thiserror::Error;

use crate::entailment::{weak_closure, EntailmentError, EntailmentIndex};
use crate::terms::{canonical_variable_set, CubeLetter, LinearTerm, MaltsevCondition, SymbolId, Variable};

/// Largest arity for which the `2^k` position sets are enumerated.
pub const MAX_CUBE_ARITY: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CubeError {
    #[error("the condition is inconsistent")]
    Inconsistent,
    #[error("symbol `{0}` has arity {1}, above the supported {MAX_CUBE_ARITY}")]
    ArityTooLarge(String, usize),
    #[error(transparent)]
    Entailment(#[from] EntailmentError),
}

/// A set of argument positions, bit `i` standing for position `i` (0-based).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PositionSet(pub u32);

impl PositionSet {
    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn positions(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The row `w^B` of length `k`.
    pub fn row(self, k: usize) -> Vec<CubeLetter> {
        (0..k)
            .map(|i| if self.contains(i) { CubeLetter::Y } else { CubeLetter::X })
            .collect()
    }

    pub fn from_positions(ps: impl IntoIterator<Item = usize>) -> Self {
        PositionSet(ps.into_iter().fold(0, |acc, p| acc | 1 << p))
    }
}

impl fmt::Display for PositionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.positions().map(|p| (p + 1).to_string()).collect();
        write!(f, "{{{}}}", ps.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeReport {
    pub symbol: SymbolId,
    pub name: String,
    pub arity: usize,
    /// Every `B` with `h(w^B) = y` entailed, in increasing bit order.
    pub y_family: Vec<PositionSet>,
    pub entails_cube: bool,
    /// Rows of an entailed set of cube identities, when one exists.
    pub witness: Option<Vec<Vec<CubeLetter>>>,
}

impl CubeReport {
    pub fn witness_strings(&self) -> Vec<String> {
        self.witness
            .iter()
            .flatten()
            .map(|row| row.iter().map(|l| l.as_char()).collect())
            .collect()
    }
}

/// The term `h(w^B)`.
pub fn cube_row_term(h: SymbolId, arity: usize, b: PositionSet) -> LinearTerm {
    LinearTerm::app(h, b.row(arity).into_iter().map(CubeLetter::variable))
}

fn checked_closure(m: &MaltsevCondition) -> Result<EntailmentIndex, CubeError> {
    let index = weak_closure(m, canonical_variable_set(m, None))?;
    if !index.is_consistent() {
        return Err(CubeError::Inconsistent);
    }
    Ok(index)
}

/// Position sets `B` with `h(w^B) = y` derivable in an existing closure.
pub fn y_family_in(index: &EntailmentIndex, h: SymbolId) -> Result<Vec<PositionSet>, CubeError> {
    let sym = index.condition().symbol(h);
    if sym.arity > MAX_CUBE_ARITY {
        return Err(CubeError::ArityTooLarge(sym.name.clone(), sym.arity));
    }
    let y = LinearTerm::Var(Variable::Y);
    Ok((0..1u32 << sym.arity)
        .map(PositionSet)
        .filter(|&b| index.derivable(&cube_row_term(h, sym.arity, b), &y))
        .collect())
}

pub fn y_family(m: &MaltsevCondition, h: SymbolId) -> Result<Vec<PositionSet>, CubeError> {
    y_family_in(&checked_closure(m)?, h)
}

fn intersection(sets: &[PositionSet], full: u32) -> u32 {
    sets.iter().fold(full, |acc, b| acc & b.0)
}

/// Cube decision for `h` against an existing consistent closure.
pub fn entails_cube_in(index: &EntailmentIndex, h: SymbolId) -> Result<CubeReport, CubeError> {
    if !index.is_consistent() {
        return Err(CubeError::Inconsistent);
    }
    let sym = index.condition().symbol(h);
    let family = y_family_in(index, h)?;
    let full = if sym.arity >= 32 { u32::MAX } else { (1u32 << sym.arity) - 1 };
    let entails_cube = !family.is_empty() && intersection(&family, full) == 0;
    let witness = entails_cube.then(|| {
        // greedy removal in family order leaves a subfamily in which every
        // member is needed for the empty intersection
        let mut chosen = family.clone();
        let mut i = 0;
        while i < chosen.len() {
            let mut rest = chosen.clone();
            rest.remove(i);
            if !rest.is_empty() && intersection(&rest, full) == 0 {
                chosen = rest;
            } else {
                i += 1;
            }
        }
        if chosen.len() < 2 {
            chosen.push(chosen[0]);
        }
        chosen.iter().map(|b| b.row(sym.arity)).collect()
    });
    Ok(CubeReport {
        symbol: h,
        name: sym.name.clone(),
        arity: sym.arity,
        y_family: family,
        entails_cube,
        witness,
    })
}

pub fn entails_cube(m: &MaltsevCondition, h: SymbolId) -> Result<CubeReport, CubeError> {
    entails_cube_in(&checked_closure(m)?, h)
}

/// Consistency plus a cube report for every symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionReport {
    pub consistent: bool,
    /// Empty when the condition is inconsistent.
    pub cubes: Vec<CubeReport>,
}

impl ConditionReport {
    /// Consistent and no symbol entails cube identities: the absorbing
    /// extension can be built for this condition.
    pub fn applicable(&self) -> bool {
        self.consistent && self.cubes.iter().all(|c| !c.entails_cube)
    }

    pub fn first_cube_symbol(&self) -> Option<&str> {
        self.cubes
            .iter()
            .find(|c| c.entails_cube)
            .map(|c| c.name.as_str())
    }

    /// Text of the verdict, e.g. `no (cube identities for p_1)`.
    pub fn applicability(&self) -> String {
        if !self.consistent {
            "no (inconsistent)".to_string()
        } else if let Some(h) = self.first_cube_symbol() {
            format!("no (cube identities for {h})")
        } else {
            "yes".to_string()
        }
    }

    /// `key=value` lines.
    pub fn machine(&self) -> String {
        let mut out = format!("consistent={}\n", self.consistent);
        for c in &self.cubes {
            out.push_str(&format!(
                "cube.{}={}\n",
                c.name,
                if c.entails_cube { c.witness_strings().join(",") } else { "none".into() }
            ));
        }
        out.push_str(&format!("applicable={}\n", self.applicable()));
        out
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.consistent {
            let width = self.cubes.iter().map(|c| c.name.len()).max().unwrap_or(6).max(6);
            writeln!(f, "{:<width$}  {:>5}  {:<4}  witness", "symbol", "arity", "cube")?;
            for c in &self.cubes {
                let witness = if c.entails_cube { c.witness_strings().join(" ") } else { "-".into() };
                writeln!(
                    f,
                    "{:<width$}  {:>5}  {:<4}  {}",
                    c.name,
                    c.arity,
                    if c.entails_cube { "yes" } else { "no" },
                    witness
                )?;
            }
        }
        let cube = match (self.consistent, self.first_cube_symbol()) {
            (false, _) => "n/a".to_string(),
            (true, None) => "none".to_string(),
            (true, Some(_)) => {
                let names: Vec<&str> = self
                    .cubes
                    .iter()
                    .filter(|c| c.entails_cube)
                    .map(|c| c.name.as_str())
                    .collect();
                names.join(",")
            }
        };
        writeln!(
            f,
            "consistent: {}; cube: {}; applicable: {}",
            if self.consistent { "yes" } else { "no" },
            cube,
            self.applicability()
        )
    }
}

/// Runs the consistency check and the per-symbol cube decision.
pub fn check_condition(m: &MaltsevCondition) -> Result<ConditionReport, CubeError> {
    let index = weak_closure(m, canonical_variable_set(m, None))?;
    check_condition_in(&index)
}

pub fn check_condition_in(index: &EntailmentIndex) -> Result<ConditionReport, CubeError> {
    if !index.is_consistent() {
        return Ok(ConditionReport {
            consistent: false,
            cubes: Vec::new(),
        });
    }
    let cubes = index
        .condition()
        .symbol_ids()
        .map(|h| entails_cube_in(index, h))
        .collect::<Result<_, _>>()?;
    Ok(ConditionReport {
        consistent: true,
        cubes,
    })
}

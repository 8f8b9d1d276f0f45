//! Subalgebras of finite powers generated by a set of tuples, and the
//! subpower membership decision built on them.
//!
//! The closure is computed semi-naively: round `r` applies every operation
//! only to argument lists containing at least one member found in round
//! `r - 1`, so no application is repeated.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use super::{Element, FiniteAlgebra, TermTree};

pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Dense member tables are used while `n^m` stays below this.
const DENSE_LIMIT: usize = 1 << 22;

#[derive(Clone, Debug)]
pub struct ClosureConfig {
    /// Maximum number of members before giving up.
    pub budget: usize,
    pub record_witnesses: bool,
    /// Worker threads; `1` runs on the calling thread.
    pub threads: usize,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        ClosureConfig {
            budget: DEFAULT_BUDGET,
            record_witnesses: false,
            threads: 1,
        }
    }
}

impl ClosureConfig {
    pub fn with_witnesses(mut self) -> Self {
        self.record_witnesses = true;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosureStats {
    pub members: usize,
    pub rounds: usize,
    pub applications: u64,
}

impl fmt::Display for ClosureStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "members {}, rounds {}, applications {}",
            self.members, self.rounds, self.applications
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClosureError {
    #[error("budget of {budget} members exceeded after {stats}")]
    BudgetExceeded { budget: usize, stats: ClosureStats },
    #[error("malformed input: {0}")]
    Malformed(String),
}

/// How a member entered the closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Generator(usize),
    Apply { op: usize, args: Box<[u32]> },
}

/// `m`, generators `a_1..a_n` and target `b`, all in `A^m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmpInstance {
    pub m: usize,
    pub generators: Vec<Vec<Element>>,
    pub target: Vec<Element>,
}

impl SmpInstance {
    pub fn validate(&self, size: usize) -> Result<(), ClosureError> {
        if self.m == 0 {
            return Err(ClosureError::Malformed("power must be at least 1".into()));
        }
        for (i, t) in self.generators.iter().chain(std::iter::once(&self.target)).enumerate() {
            let what = if i == self.generators.len() {
                "target".to_string()
            } else {
                format!("generator {}", i + 1)
            };
            if t.len() != self.m {
                return Err(ClosureError::Malformed(format!(
                    "{what} has length {}, expected {}",
                    t.len(),
                    self.m
                )));
            }
            if let Some(v) = t.iter().find(|&&v| v >= size) {
                return Err(ClosureError::Malformed(format!(
                    "{what} contains {v}, outside the universe of size {size}"
                )));
            }
        }
        Ok(())
    }
}

enum MemberIndex {
    Dense { slots: Vec<u32>, n: usize },
    Sparse(HashMap<Box<[Element]>, u32>),
}

const ABSENT: u32 = u32::MAX;

impl MemberIndex {
    fn new(n: usize, m: usize) -> Self {
        match n.checked_pow(m as u32) {
            Some(total) if total <= DENSE_LIMIT => MemberIndex::Dense {
                slots: vec![ABSENT; total],
                n,
            },
            _ => MemberIndex::Sparse(HashMap::new()),
        }
    }

    fn get(&self, t: &[Element]) -> Option<u32> {
        match self {
            MemberIndex::Dense { slots, n } => {
                let code = t.iter().fold(0, |acc, &v| acc * n + v);
                let s = slots[code];
                (s != ABSENT).then_some(s)
            }
            MemberIndex::Sparse(map) => map.get(t).copied(),
        }
    }

    /// Inserts if absent; returns whether it was new.
    fn insert(&mut self, t: &[Element], id: u32) -> bool {
        match self {
            MemberIndex::Dense { slots, n } => {
                let code = t.iter().fold(0, |acc, &v| acc * *n + v);
                if slots[code] != ABSENT {
                    return false;
                }
                slots[code] = id;
                true
            }
            MemberIndex::Sparse(map) => {
                if map.contains_key(t) {
                    return false;
                }
                map.insert(t.into(), id);
                true
            }
        }
    }
}

/// The generated subalgebra, members in order of discovery.
pub struct ClosureResult {
    m: usize,
    data: Vec<Element>,
    index: MemberIndex,
    origins: Option<Vec<Origin>>,
    op_names: Vec<String>,
    pub stats: ClosureStats,
    /// Set when the closure stopped early because the target appeared.
    pub target_position: Option<usize>,
}

impl ClosureResult {
    pub fn len(&self) -> usize {
        self.data.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn member(&self, i: usize) -> &[Element] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn members(&self) -> impl Iterator<Item = &[Element]> {
        self.data.chunks(self.m)
    }

    pub fn position(&self, t: &[Element]) -> Option<usize> {
        if t.len() != self.m {
            return None;
        }
        self.index.get(t).map(|i| i as usize)
    }

    pub fn contains(&self, t: &[Element]) -> bool {
        self.position(t).is_some()
    }

    pub fn member_set(&self) -> HashSet<Vec<Element>> {
        self.members().map(|t| t.to_vec()).collect()
    }

    pub fn origin(&self, i: usize) -> Option<&Origin> {
        self.origins.as_ref().map(|o| &o[i])
    }

    /// Term over the generators (leaf `i` = generator `i`) producing member
    /// `i`. Needs witness recording.
    pub fn witness(&self, i: usize) -> Option<TermTree> {
        let origins = self.origins.as_ref()?;
        let mut memo: HashMap<usize, TermTree> = HashMap::new();
        Some(self.build(origins, i, &mut memo))
    }

    fn build(&self, origins: &[Origin], i: usize, memo: &mut HashMap<usize, TermTree>) -> TermTree {
        if let Some(t) = memo.get(&i) {
            return t.clone();
        }
        let t = match &origins[i] {
            Origin::Generator(g) => TermTree::Leaf(*g),
            Origin::Apply { op, args } => TermTree::node(
                self.op_names[*op].clone(),
                args.iter().map(|&a| self.build(origins, a as usize, memo)).collect(),
            ),
        };
        memo.insert(i, t.clone());
        t
    }
}

struct Builder<'a> {
    m: usize,
    config: &'a ClosureConfig,
    data: Vec<Element>,
    index: MemberIndex,
    origins: Option<Vec<Origin>>,
    stats: ClosureStats,
    target: Option<&'a [Element]>,
    found: Option<usize>,
}

impl<'a> Builder<'a> {
    fn len(&self) -> usize {
        self.data.len() / self.m
    }

    fn budget_error(&self) -> ClosureError {
        ClosureError::BudgetExceeded {
            budget: self.config.budget,
            stats: ClosureStats {
                members: self.len(),
                ..self.stats
            },
        }
    }

    /// Adds `t` if new. `false` means stop (target found).
    fn insert(&mut self, t: &[Element], origin: impl FnOnce() -> Origin) -> Result<bool, ClosureError> {
        let id = self.len();
        if !self.index.insert(t, id as u32) {
            return Ok(true);
        }
        if id >= self.config.budget {
            return Err(self.budget_error());
        }
        self.data.extend_from_slice(t);
        if let Some(o) = self.origins.as_mut() {
            o.push(origin());
        }
        if self.target == Some(t) {
            self.found = Some(id);
            return Ok(false);
        }
        Ok(true)
    }
}

/// Odometer over the argument lists of one operation. Each position has its
/// own index range (see the caller for how the frontier is split). The outermost position is
/// fixed to `first`. Calls `emit(result, args)`; stops when it returns false.
#[allow(clippy::too_many_arguments)]
fn scan(
    algebra: &FiniteAlgebra,
    op: usize,
    data: &[Element],
    m: usize,
    ranges: &[(usize, usize)],
    first: usize,
    applications: &mut u64,
    emit: &mut dyn FnMut(&[Element], &[u32]) -> bool,
) -> bool {
    let n = algebra.size();
    let table = &algebra.operations()[op].table;
    let k = ranges.len();
    let mut args: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    args[0] = first;
    let mut prefix = vec![0usize; m];
    let mut result = vec![0usize; m];
    let mut args32 = vec![0u32; k];
    loop {
        // codes of all but the last argument
        for (j, slot) in prefix.iter_mut().enumerate() {
            *slot = args[..k - 1].iter().fold(0, |acc, &a| acc * n + data[a * m + j]);
        }
        let (lo, hi) = ranges[k - 1];
        let lo = if k == 1 { first } else { lo };
        let hi = if k == 1 { first + 1 } else { hi };
        for last in lo..hi {
            let base = last * m;
            for j in 0..m {
                result[j] = table[prefix[j] * n + data[base + j]];
            }
            *applications += 1;
            args[k - 1] = last;
            for (d, &a) in args32.iter_mut().zip(&args) {
                *d = a as u32;
            }
            if !emit(&result, &args32) {
                return false;
            }
        }
        // advance positions k-2 down to 1; position 0 is fixed
        let mut i = k - 1;
        loop {
            if i <= 1 {
                return true;
            }
            i -= 1;
            args[i] += 1;
            if args[i] < ranges[i].1 {
                break;
            }
            args[i] = ranges[i].0;
        }
    }
}

fn run(
    algebra: &FiniteAlgebra,
    m: usize,
    generators: &[Vec<Element>],
    target: Option<&[Element]>,
    config: &ClosureConfig,
) -> Result<ClosureResult, ClosureError> {
    let mut b = Builder {
        m,
        config,
        data: Vec::new(),
        index: MemberIndex::new(algebra.size(), m),
        origins: config.record_witnesses.then(Vec::new),
        stats: ClosureStats::default(),
        target,
        found: None,
    };
    let ops = algebra.operations();

    let mut go = true;
    for (i, g) in generators.iter().enumerate() {
        if go {
            go = b.insert(g, || Origin::Generator(i))?;
        }
    }
    for (op, o) in ops.iter().enumerate() {
        if go && o.symbol.arity == 0 {
            let c = vec![o.table[0]; m];
            b.stats.applications += 1;
            go = b.insert(&c, || Origin::Apply { op, args: Box::new([]) })?;
        }
    }

    let pool = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| ClosureError::Malformed(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut old_end = 0;
    let mut cur_end = b.len();
    while go && old_end < cur_end {
        b.stats.rounds += 1;
        'ops: for (op, o) in ops.iter().enumerate() {
            let k = o.symbol.arity;
            for p in 0..k {
                let ranges: Vec<(usize, usize)> = (0..k)
                    .map(|i| match i.cmp(&p) {
                        std::cmp::Ordering::Less => (0, old_end),
                        std::cmp::Ordering::Equal => (old_end, cur_end),
                        std::cmp::Ordering::Greater => (0, cur_end),
                    })
                    .collect();
                if ranges.iter().any(|r| r.0 >= r.1) {
                    continue;
                }
                let (lo, hi) = ranges[0];
                match &pool {
                    None => {
                        // new members go to a side buffer so `data` stays
                        // borrowed immutably during the scan
                        let mut pending: Vec<Element> = Vec::new();
                        let mut pending_origins: Vec<Origin> = Vec::new();
                        let mut failure: Option<ClosureError> = None;
                        let mut apps = 0u64;
                        let base_len = b.len();
                        {
                            let Builder {
                                data,
                                index,
                                origins,
                                target,
                                found,
                                ..
                            } = &mut b;
                            let record = origins.is_some();
                            let mut emit = |t: &[Element], args: &[u32]| -> bool {
                                let id = base_len + pending.len() / m;
                                if !index.insert(t, id as u32) {
                                    return true;
                                }
                                if id >= config.budget {
                                    failure = Some(ClosureError::BudgetExceeded {
                                        budget: config.budget,
                                        stats: ClosureStats::default(),
                                    });
                                    return false;
                                }
                                pending.extend_from_slice(t);
                                if record {
                                    pending_origins.push(Origin::Apply { op, args: args.into() });
                                }
                                if *target == Some(t) {
                                    *found = Some(id);
                                    return false;
                                }
                                true
                            };
                            for first in lo..hi {
                                if !scan(algebra, op, data, m, &ranges, first, &mut apps, &mut emit) {
                                    break;
                                }
                            }
                        }
                        b.stats.applications += apps;
                        b.data.extend_from_slice(&pending);
                        if let Some(o) = b.origins.as_mut() {
                            o.extend(pending_origins);
                        }
                        if failure.is_some() {
                            return Err(b.budget_error());
                        }
                        if b.found.is_some() {
                            go = false;
                            break 'ops;
                        }
                    }
                    Some(pool) => {
                        let data = &b.data;
                        let index = &b.index;
                        // contiguous blocks of outer indices keep the merge
                        // order equal to the sequential scan order
                        let step = ((hi - lo) / (config.threads * 4)).max(1);
                        let blocks: Vec<(usize, usize)> =
                            (lo..hi).step_by(step).map(|s| (s, (s + step).min(hi))).collect();
                        let chunks: Vec<(u64, Vec<(Vec<Element>, Box<[u32]>)>)> = pool.install(|| {
                            blocks
                                .into_par_iter()
                                .map(|(start, end)| {
                                    let mut seen: HashSet<Vec<Element>> = HashSet::new();
                                    let mut out = Vec::new();
                                    let mut apps = 0u64;
                                    let mut emit = |t: &[Element], args: &[u32]| -> bool {
                                        if index.get(t).is_none() && !seen.contains(t) {
                                            seen.insert(t.to_vec());
                                            out.push((t.to_vec(), args.into()));
                                        }
                                        true
                                    };
                                    for first in start..end {
                                        scan(algebra, op, data, m, &ranges, first, &mut apps, &mut emit);
                                    }
                                    (apps, out)
                                })
                                .collect()
                        });
                        for (apps, candidates) in chunks {
                            b.stats.applications += apps;
                            if !go {
                                continue;
                            }
                            for (t, args) in candidates {
                                if !b.insert(&t, || Origin::Apply { op, args })? {
                                    go = false;
                                    break;
                                }
                            }
                        }
                        if !go {
                            break 'ops;
                        }
                    }
                }
            }
        }
        old_end = cur_end;
        cur_end = b.len();
    }

    let op_names = ops.iter().map(|o| o.symbol.name.clone()).collect();
    b.stats.members = b.len();
    Ok(ClosureResult {
        m,
        data: b.data,
        index: b.index,
        origins: b.origins,
        op_names,
        stats: b.stats,
        target_position: b.found,
    })
}

/// The subalgebra of `A^m` generated by `generators`.
pub fn generate_subpower(
    algebra: &FiniteAlgebra,
    m: usize,
    generators: &[Vec<Element>],
    config: &ClosureConfig,
) -> Result<ClosureResult, ClosureError> {
    SmpInstance {
        m,
        generators: generators.to_vec(),
        target: vec![0; m],
    }
    .validate(algebra.size())?;
    run(algebra, m, generators, None, config)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmpAnswer {
    pub member: bool,
    /// Term over the generators evaluating to the target (when requested).
    pub witness: Option<TermTree>,
    pub stats: ClosureStats,
}

/// Decides whether the target lies in the generated subalgebra. Stops as
/// soon as the target appears.
pub fn smp_decide(
    algebra: &FiniteAlgebra,
    inst: &SmpInstance,
    config: &ClosureConfig,
) -> Result<SmpAnswer, ClosureError> {
    inst.validate(algebra.size())?;
    let closure = run(algebra, inst.m, &inst.generators, Some(&inst.target), config)?;
    let position = closure
        .target_position
        .or_else(|| closure.position(&inst.target));
    Ok(SmpAnswer {
        member: position.is_some(),
        witness: position.and_then(|p| closure.witness(p)),
        stats: closure.stats,
    })
}

//! Seeded generators for small random test objects. The same seed always
//! produces the same object.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebras::{FiniteAlgebra, Operation, SmpInstance};
use crate::terms::{Identity, LinearTerm, MaltsevCondition, OperationSymbol, SymbolId, Variable};

#[derive(Clone, Debug)]
pub struct ConditionShape {
    pub symbols: RangeInclusive<usize>,
    pub arity: RangeInclusive<usize>,
    pub identities: RangeInclusive<usize>,
    /// Variables are drawn from the first `variables` canonical names.
    pub variables: usize,
}

impl Default for ConditionShape {
    fn default() -> Self {
        ConditionShape {
            symbols: 1..=2,
            arity: 2..=3,
            identities: 1..=4,
            variables: 3,
        }
    }
}

/// Symbols are named `h1`, `h2`, … so they never clash with the operation
/// names of [`random_algebra`].
pub fn random_condition(seed: u64, shape: &ConditionShape) -> MaltsevCondition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(shape.symbols.clone()).max(1);
    let signature: Vec<OperationSymbol> = (0..count)
        .map(|i| OperationSymbol::new(format!("h{}", i + 1), rng.gen_range(shape.arity.clone())))
        .collect();
    let vars = shape.variables.max(1);
    let app = |rng: &mut ChaCha8Rng| {
        let h = rng.gen_range(0..count);
        LinearTerm::app(SymbolId(h), (0..signature[h].arity).map(|_| Variable(rng.gen_range(0..vars))))
    };
    let identities = (0..rng.gen_range(shape.identities.clone()))
        .map(|_| {
            let lhs = app(&mut rng);
            let rhs = if rng.gen_bool(0.6) {
                // mostly a variable of the left side
                let occ = lhs.occurrences();
                match occ.choose(&mut rng) {
                    Some(&v) if rng.gen_bool(0.8) => LinearTerm::Var(v),
                    _ => LinearTerm::Var(Variable(rng.gen_range(0..vars))),
                }
            } else {
                app(&mut rng)
            };
            Identity::new(lhs, rhs)
        })
        .collect();
    MaltsevCondition::new(signature, identities).expect("generated condition is well formed")
}

#[derive(Clone, Debug)]
pub struct AlgebraShape {
    pub size: RangeInclusive<usize>,
    pub operations: RangeInclusive<usize>,
    pub arity: RangeInclusive<usize>,
}

impl Default for AlgebraShape {
    fn default() -> Self {
        AlgebraShape {
            size: 1..=3,
            operations: 0..=2,
            arity: 0..=2,
        }
    }
}

/// Operations are named `f`, `g`, `f2`, `f3`, … with uniformly random
/// tables.
pub fn random_algebra(seed: u64, shape: &AlgebraShape) -> FiniteAlgebra {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(shape.size.clone()).max(1);
    let ops = (0..rng.gen_range(shape.operations.clone()))
        .map(|i| {
            let name = match i {
                0 => "f".to_string(),
                1 => "g".to_string(),
                _ => format!("f{i}"),
            };
            let k = rng.gen_range(shape.arity.clone());
            Operation {
                symbol: OperationSymbol::new(name, k),
                table: (0..n.pow(k as u32)).map(|_| rng.gen_range(0..n)).collect(),
            }
        })
        .collect();
    FiniteAlgebra::new(n, ops).expect("generated tables are in range")
}

/// An instance of `m`-tuples with `generators` random generators over a
/// universe of `size` elements.
pub fn random_instance(seed: u64, size: usize, m: usize, generators: usize) -> SmpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tuple = |rng: &mut ChaCha8Rng| (0..m).map(|_| rng.gen_range(0..size)).collect::<Vec<_>>();
    let generators = (0..generators).map(|_| tuple(&mut rng)).collect();
    SmpInstance {
        m,
        generators,
        target: tuple(&mut rng),
    }
}

//! Fixed workloads shared by the benchmarks.

use maltsev::random::{random_algebra, random_instance, AlgebraShape};
use maltsev::terms::{hagemann_mitschke_condition, jonsson_condition, union_conditions};
use maltsev::{FiniteAlgebra, MaltsevCondition, SmpInstance};

/// A random binary operation on three elements.
pub fn groupoid(seed: u64) -> FiniteAlgebra {
    random_algebra(
        seed,
        &AlgebraShape {
            size: 3..=3,
            operations: 1..=1,
            arity: 2..=2,
        },
    )
}

/// Two random generators in `A^m` for a three-element `A`.
pub fn two_generators(seed: u64, m: usize) -> SmpInstance {
    random_instance(seed, 3, m, 2)
}

/// Jónsson and Hagemann-Mitschke terms of length 3 together.
pub fn cd3_cp3() -> MaltsevCondition {
    union_conditions(&[jonsson_condition(3).unwrap(), hagemann_mitschke_condition(3).unwrap()]).unwrap()
}

//! Strong linear Maltsev conditions and the subpower membership problem.
//!
//! Entailment between linear identities is decided through the weak closure
//! of a condition. On top of that sit a cube-identity detector and the
//! absorbing extension `A_M` of a finite algebra by a cube-free condition.
//! Subpower membership is solved by semi-naive closure. A separate module
//! searches for interpretations in the two-element dual implication algebra.

pub mod algebras;
pub mod construction;
pub mod cube;
pub mod entailment;
pub mod interp;
pub mod random;
pub mod terms;

pub use algebras::{
    evaluate, generate_subpower, parse_algebra, parse_instance, render_algebra, render_instance,
    satisfies, smp_decide, ClosureConfig, ClosureError, Element, FiniteAlgebra, Operation,
    Satisfaction, SmpAnswer, SmpInstance, TermTree,
};
pub use construction::{
    eliminate_h, evaluate_linear_via_pattern, extend, reduce_and_certify, well_definedness_audit,
    ConstructionError, ExtendedAlgebra, ReductionCertificate,
};
pub use cube::{check_condition, entails_cube, y_family, ConditionReport, CubeReport, PositionSet};
pub use entailment::{is_consistent, weak_closure, EntailmentIndex, EntailmentVerdict};
pub use interp::{dual_implication_algebra, find_interpretation, interpret, Interpretation};
pub use terms::{
    parse_condition, EqualityPattern, Identity, LinearTerm, MaltsevCondition, OperationSymbol,
    SymbolId, Variable,
};

//! Higher-order quantum programs with costs: parsing, linear typing,
//! probabilistic execution, translation into a cost-structure language,
//! denotational evaluation, and refinement-type bound checking.

pub mod corpus;
pub mod cost;
pub mod cs;
pub mod decls;
pub mod linalg;
pub mod pars;
pub mod qet;
pub mod refinement;
pub mod soundness;
pub mod source;
pub mod syntax;
pub mod typecheck;

/// Double-precision state vector.
pub type QState = linalg::QState<f64>;
pub type Unitary = linalg::Unitary<f64>;
pub type Complex = num_complex::Complex<f64>;
pub type ExtReal = cost::ExtReal<f64>;
/// `(ℝ^{+∞}, +)` over `f64`.
pub type RPlus = cost::RealsPlus<f64>;
/// `([0,1], +_f)` over `f64`.
pub type UnitForgetful = cost::Forgetful<cost::UnitInterval<f64>>;

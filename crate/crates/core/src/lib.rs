//! Numerical toolkit for weighted Fock spaces `F²_φ` on the complex plane.
//!
//! Functions are represented by coefficient vectors in the truncated
//! orthonormal monomial basis and operators by dense matrices in that basis.

pub mod approximation;
pub mod error;
pub mod fock;
pub mod frames;
pub mod linalg;
pub mod localization;
pub mod operators;
pub mod par;
pub mod quadrature;
pub mod symbol;
pub mod translations;
pub mod weight;

pub use error::{FockError, Result};
pub use fock::{FockModel, KernelValue};
pub use linalg::{CoeffVec, OpMatrix, C64};
pub use operators::{DiscreteMeasure, MeasureRef};
pub use quadrature::QuadSpec;
pub use symbol::{Expr, Indicator, Symbol};
pub use weight::{make_weight, MomentTable, Weight, WeightKind};

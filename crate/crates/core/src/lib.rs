//! Step-2 Carnot groups given by structure constants: group law and endpoint
//! map, abnormal-curve classification, and numerical dimension estimates for
//! the abnormal set.
//!
//! Everything is generic over [`Scalar`]; [`Rational`] gives exact ranks and
//! subspaces, `f64` is used for sampling and optimization.

pub mod algebra;
pub mod constructions;
pub mod error;
pub mod group;
pub mod linalg;
pub mod scalar;
pub mod variety;

pub use algebra::{AlgebraElement, Ambient, StratifiedAlgebra, Subspace, Violation};
pub use error::{Error, Result};
pub use group::{Classification, Control, GroupElement, Segment};
pub use scalar::Scalar;

/// Exact scalar.
pub type Rational = num_rational::BigRational;

pub type ExactAlgebra = StratifiedAlgebra<Rational>;
pub type FloatAlgebra = StratifiedAlgebra<f64>;
pub type ExactControl = Control<Rational>;
pub type FloatControl = Control<f64>;
pub type ExactSubspace = Subspace<Rational>;
pub type FloatSubspace = Subspace<f64>;

pub mod algebra;
pub mod carnot;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod expr;
pub mod group;
pub mod linalg;
pub mod maps;
pub mod path;
pub mod quadrature;
pub mod sampling;
pub mod scalar;
pub mod shear;
pub mod vector;

pub use algebra::{validate_algebra, BracketEntry, GradedAlgebra, Subspace, ValidationReport};
pub use error::{Error, Result};
pub use scalar::{q, qi, Scalar, Q};
pub use vector::{MatF, MatQ, Matrix, VecF, VecQ, Vector};

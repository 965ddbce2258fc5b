//! Numerical differential geometry of deformation algebras.
//!
//! Builds deformation tensors `A = ∇̄ − ∇` between pairs of linear
//! connections, evaluates the pointwise conditions that make `(M, g, A)` a
//! formal or weak Frobenius structure, and supplies autoparallel dynamics
//! tools for probing whether a symmetric connection is metric.

pub mod catalog;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod frobenius;
pub mod liegroup;
pub mod manifold;
pub mod scenario;
pub mod serial;

pub use error::{GeomError, Result};

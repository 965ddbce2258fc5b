//! Single-chart differential geometry: sampled charts, tensor fields,
//! metrics, connections and the usual derived objects.

mod calculus;
mod chart;
mod connection;
mod field;
mod metric;
mod tensor;

pub use calculus::{
    covariant_derivative_02, covariant_derivative_11, curvature, differential, exterior_derivative_1form,
    exterior_derivative_2form, flat, raise_first, ric_operator, ricci, sharp,
};
pub use chart::Chart;
pub use connection::{compatibility_residual, deformation, levi_civita, torsion, Connection};
pub use field::{
    fd_jets, fd_jets_from_first, flat_index, invert_jets, ComponentSource, Order, TensorField, Valence, FD_STEP,
};
pub use metric::{Metric, Signature, COND_LIMIT};
pub use tensor::{Tensor3, Tensor4};

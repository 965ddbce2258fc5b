//! Constructors and specialized residuals for the catalog of deformation
//! tensors: subgeodesic and conformal changes, hypersurfaces, self-adjoint
//! operators, Golab connections, Kähler and Hermitian examples, cross
//! products and Ricci-type operators.

mod cross;
mod golab;
mod hermitian;
mod hypersurface;
mod selfadjoint;
mod subgeodesic;

pub use cross::{cross_product, cross_product_table};
pub use golab::{golab, lyra, residual_3_3, validate_epsilon_structure, validate_lambda_hermitian, Golab};
pub use hermitian::{
    chern_bismut, circular_asymmetry, kahler_q_a, residual_3_19, residual_3_25, validate_almost_complex, ChernBismut,
    Which,
};
pub use hypersurface::{hypersurface_forms, Hypersurface};
pub use selfadjoint::{
    einstein_2d, nabla_j_a, recurrent_j, residual_2_9, residual_4_1, residual_4_2, ricci_codazzi_residual,
    selfadjoint_pair, Einstein2D, NablaJ, Recurrent, SelfAdjointPair,
};
pub use subgeodesic::{conformal, projective_a, residual_2_2, subgeodesic_a, Conformal};

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::manifold::{Chart, Tensor3, TensorField, Valence};

pub(crate) fn matrix_at(t: &TensorField, p: &[f64]) -> Result<DMatrix<f64>> {
    let n = t.dim();
    Ok(DMatrix::from_row_slice(n, n, &t.values(p)?))
}

pub(crate) fn vector_at(t: &TensorField, p: &[f64]) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(t.values(p)?))
}

pub(crate) fn tensor3_at(t: &TensorField, p: &[f64]) -> Result<Tensor3> {
    Tensor3::from_vec(t.dim(), t.values(p)?)
}

/// Max-abs difference of two equally shaped fields at `p`.
pub fn field_distance(a: &TensorField, b: &TensorField, p: &[f64]) -> Result<f64> {
    let (x, y) = (a.values(p)?, b.values(p)?);
    Ok(x.iter()
        .zip(&y)
        .fold(0.0, |m, (u, v)| crate::frobenius::nan_max(m, (u - v).abs())))
}

pub(crate) fn expect(t: &TensorField, v: Valence, what: &str) -> Result<()> {
    if t.valence() != v {
        return Err(GeomError::InvalidArgument(format!(
            "{what} must be a {v} field, got {}",
            t.valence()
        )));
    }
    Ok(())
}

/// Runs `check` at every sample point, stopping at the first failure.
pub(crate) fn at_samples(chart: &Chart, mut check: impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
    chart.points().iter().try_for_each(|p| check(p))
}

use thiserror::Error;

use crate::expr::ExprError;

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("metric is singular at {}", fmt_point(.0))]
    SingularMetric(Vec<f64>),
    #[error("metric is not positive definite at {}", fmt_point(.0))]
    NotPositiveDefinite(Vec<f64>),
    #[error("fields live on different charts (dimensions {0} and {1})")]
    ChartMismatch(usize, usize),
    #[error("component count {got} does not match valence (expected {expected})")]
    ComponentCount { expected: usize, got: usize },
    #[error("input is not symmetric: {0}")]
    NotSymmetric(String),
    #[error("immersion Jacobian has rank < n at {}", fmt_point(.0))]
    DegenerateImmersion(Vec<f64>),
    #[error("second fundamental form is degenerate at {}", fmt_point(.0))]
    DegenerateSecondForm(Vec<f64>),
    #[error("operator is not self-adjoint at {}", fmt_point(.0))]
    NotSelfAdjoint(Vec<f64>),
    #[error("operator is not positive at {}", fmt_point(.0))]
    NotPositive(Vec<f64>),
    #[error("J^2 != -I at {}", fmt_point(.0))]
    NotAlmostComplex(Vec<f64>),
    #[error("metric is not Hermitian with respect to J at {}", fmt_point(.0))]
    NotHermitian(Vec<f64>),
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
    #[error("unsupported dimension {0}")]
    UnsupportedDim(usize),
    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),
    #[error("non-finite state at t = {0}")]
    NonFiniteState(f64),
    #[error("basis yields a rank-deficient collocation matrix: {0}")]
    RankDeficientBasis(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

use nalgebra::DMatrix;

use super::chart::Chart;
use super::field::{Order, TensorField, Valence};
use crate::error::{GeomError, Result};
use crate::expr::Jet2;

/// Largest condition number accepted for indefinite metrics.
pub const COND_LIMIT: f64 = 1e12;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signature {
    /// Positive definite; Cholesky must succeed at every sample.
    Riemannian,
    /// Invertible with condition number at most [`COND_LIMIT`].
    Indefinite,
}

/// A symmetric (0,2) field validated on the sample points of a chart.
#[derive(Debug, Clone)]
pub struct Metric {
    field: TensorField,
    signature: Signature,
    chart: Chart,
}

impl Metric {
    pub fn riemannian(field: TensorField, chart: &Chart) -> Result<Self> {
        Metric::new(field, chart, Signature::Riemannian)
    }

    pub fn indefinite(field: TensorField, chart: &Chart) -> Result<Self> {
        Metric::new(field, chart, Signature::Indefinite)
    }

    /// Metric from a matrix of component expressions. Mirror entries must be
    /// numerically equal at every sample point.
    pub fn from_exprs<S: AsRef<str>>(rows: &[Vec<S>], chart: &Chart, signature: Signature) -> Result<Self> {
        let n = chart.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(GeomError::ComponentCount {
                expected: n * n,
                got: rows.iter().map(Vec::len).sum(),
            });
        }
        let flat: Vec<&str> = rows.iter().flatten().map(AsRef::as_ref).collect();
        let field = TensorField::from_exprs(Valence::BILINEAR, n, &flat)?;
        Metric::new(field, chart, signature)
    }

    pub fn new(field: TensorField, chart: &Chart, signature: Signature) -> Result<Self> {
        if field.valence() != Valence::BILINEAR {
            return Err(GeomError::InvalidArgument(format!(
                "a metric has valence (0,2), got {}",
                field.valence()
            )));
        }
        if field.dim() != chart.dim() {
            return Err(GeomError::ChartMismatch(chart.dim(), field.dim()));
        }
        let metric = Metric {
            field,
            signature,
            chart: chart.clone(),
        };
        for p in chart.points() {
            metric.validate_at(&p)?;
        }
        Ok(metric)
    }

    fn validate_at(&self, p: &[f64]) -> Result<()> {
        let g = self.raw_matrix(p)?;
        let scale = g.amax().max(1.0);
        if (&g - g.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(GeomError::NotSymmetric(format!(
                "metric components at {p:?} differ from their transposes"
            )));
        }
        match self.signature {
            Signature::Riemannian => {
                if g.clone().cholesky().is_none() {
                    return Err(GeomError::NotPositiveDefinite(p.to_vec()));
                }
            }
            Signature::Indefinite => {
                let sv = g.singular_values();
                let (hi, lo) = (sv.max(), sv.min());
                if !(lo > 0.0) || hi / lo > COND_LIMIT {
                    return Err(GeomError::SingularMetric(p.to_vec()));
                }
            }
        }
        Ok(())
    }

    fn raw_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        Ok(DMatrix::from_row_slice(n, n, &self.field.values(p)?))
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn field(&self) -> &TensorField {
        &self.field
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Symmetrized component matrix at `p`.
    pub fn matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.raw_matrix(p)?;
        Ok((&g + g.transpose()) * 0.5)
    }

    pub fn inverse(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.matrix(p)?;
        let inv = match self.signature {
            Signature::Riemannian => g.cholesky().map(|c| c.inverse()),
            Signature::Indefinite => g.try_inverse(),
        };
        inv.ok_or_else(|| GeomError::SingularMetric(p.to_vec()))
    }

    pub fn jets(&self, p: &[f64], order: Order) -> Result<Vec<Jet2>> {
        self.field.jets(p, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart2() -> Chart {
        Chart::cube(2, -1.0, 1.0, 32, 0).unwrap()
    }

    #[test]
    fn rejects_indefinite_as_riemannian() {
        let rows = vec![vec!["1", "0"], vec!["0", "-1"]];
        assert!(matches!(
            Metric::from_exprs(&rows, &chart2(), Signature::Riemannian),
            Err(GeomError::NotPositiveDefinite(_))
        ));
        assert!(Metric::from_exprs(&rows, &chart2(), Signature::Indefinite).is_ok());
    }

    #[test]
    fn rejects_asymmetric_components() {
        let rows = vec![vec!["1", "x1"], vec!["0", "1"]];
        assert!(matches!(
            Metric::from_exprs(&rows, &chart2(), Signature::Riemannian),
            Err(GeomError::NotSymmetric(_))
        ));
    }

    #[test]
    fn degenerate_indefinite_metric_fails() {
        let rows = vec![vec!["x1", "0"], vec!["0", "-1"]];
        let chart = Chart::cube(2, -1.0, 1.0, 64, 0).unwrap();
        let near = Chart::new(vec![(-1e-13, 1e-13), (0.0, 1.0)], 4, 0, 0.05).unwrap();
        assert!(matches!(
            Metric::from_exprs(&rows, &near, Signature::Indefinite),
            Err(GeomError::SingularMetric(_))
        ));
        assert!(matches!(
            Metric::from_exprs(&rows, &chart, Signature::Riemannian),
            Err(GeomError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn inverse_is_inverse() {
        let rows = vec![vec!["2 + x1^2", "x1*x2"], vec!["x1*x2", "3"]];
        let g = Metric::from_exprs(&rows, &chart2(), Signature::Riemannian).unwrap();
        let p = [0.3, -0.4];
        let prod = g.matrix(&p).unwrap() * g.inverse(&p).unwrap();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-14);
    }
}

use nalgebra::DMatrix;

use super::{at_samples, expect, field_distance, matrix_at};
use crate::error::{GeomError, Result};
use crate::expr::{sum_jets, Jet2};
use crate::frobenius::nan_max;
use crate::manifold::{
    compatibility_residual, levi_civita, sharp, torsion, Chart, Connection, Metric, TensorField, Valence,
};

/// `max |θ_i S_jk + θ_j S_ik - θ_k (S_ij + S_ji)|` over index triples.
pub fn residual_3_3(theta: &[f64], s: &DMatrix<f64>) -> f64 {
    let n = theta.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r = theta[i] * s[(j, k)] + theta[j] * s[(i, k)] - theta[k] * (s[(i, j)] + s[(j, i)]);
                worst = nan_max(worst, r.abs());
            }
        }
    }
    worst
}

/// The metric connection `∇̄ = ∇ + A` with `A(X,Y) = θ(Y)F(X) - S(X,Y)P`,
/// `S(X,Y) = g(FX,Y)` and `P = θ^#`.
#[derive(Debug, Clone)]
pub struct Golab {
    pub g: Metric,
    pub theta: TensorField,
    pub f: TensorField,
    pub s: TensorField,
    pub p: TensorField,
    pub a: TensorField,
    pub connection: Connection,
}

pub fn golab(g: &Metric, theta: &TensorField, f: &TensorField) -> Result<Golab> {
    expect(theta, Valence::COVECTOR, "θ")?;
    expect(f, Valence::ENDO, "F")?;
    let n = g.dim();
    let s = TensorField::algebraic(Valence::BILINEAR, n, vec![f.clone(), g.field().clone()], move |x| {
        let d = x[0][0].dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let terms: Vec<Jet2> = (0..n).map(|m| &x[0][m * n + i] * &x[1][m * n + j]).collect();
                out.push(sum_jets(d, &terms));
            }
        }
        Ok(out)
    })?;
    let p = sharp(theta, g)?;
    let inputs = vec![theta.clone(), f.clone(), s.clone(), p.clone()];
    let a = TensorField::algebraic(Valence::ALGEBRA, n, inputs, move |x| {
        let (th, ff, ss, pp) = (&x[0], &x[1], &x[2], &x[3]);
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out.push(&th[j] * &ff[k * n + i] - &ss[i * n + j] * &pp[k]);
                }
            }
        }
        Ok(out)
    })?;
    let connection = levi_civita(g)?.shifted(&a)?;
    Ok(Golab {
        g: g.clone(),
        theta: theta.clone(),
        f: f.clone(),
        s,
        p,
        a,
        connection,
    })
}

/// The Lyra connection, `F = identity`.
pub fn lyra(g: &Metric, theta: &TensorField) -> Result<Golab> {
    let n = g.dim();
    let id = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    golab(g, theta, &TensorField::constant(Valence::ENDO, n, id)?)
}

impl Golab {
    /// The prescribed torsion `T(X,Y) = θ(Y)F(X) - θ(X)F(Y)`.
    pub fn torsion_target(&self) -> Result<TensorField> {
        let n = self.g.dim();
        TensorField::algebraic(
            Valence::ALGEBRA,
            n,
            vec![self.theta.clone(), self.f.clone()],
            move |x| {
                let (th, ff) = (&x[0], &x[1]);
                let mut out = Vec::with_capacity(n * n * n);
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            out.push(&th[j] * &ff[k * n + i] - &th[i] * &ff[k * n + j]);
                        }
                    }
                }
                Ok(out)
            },
        )
    }

    /// Max-abs difference between the connection's torsion and the target.
    pub fn torsion_residual(&self, target: &TensorField, p: &[f64]) -> Result<f64> {
        field_distance(&torsion(&self.connection), target, p)
    }

    pub fn metric_residual(&self, p: &[f64]) -> Result<f64> {
        compatibility_residual(&self.connection, &self.g, p)
    }

    /// Max-abs of `S - S^T`; the torsion matches the target only when zero.
    pub fn s_asymmetry(&self, p: &[f64]) -> Result<f64> {
        let s = matrix_at(&self.s, p)?;
        Ok((&s - s.transpose()).amax())
    }

    pub fn residual_3_3(&self, p: &[f64]) -> Result<f64> {
        Ok(residual_3_3(&self.theta.values(p)?, &matrix_at(&self.s, p)?))
    }
}

/// Rejects `F` unless `F² = ε I` to 1e-8 at every sample point.
pub fn validate_epsilon_structure(f: &TensorField, epsilon: f64, chart: &Chart) -> Result<()> {
    expect(f, Valence::ENDO, "F")?;
    at_samples(chart, |p| {
        let m = matrix_at(f, p)?;
        let n = m.nrows();
        let r = (&m * &m - DMatrix::<f64>::identity(n, n) * epsilon).amax();
        if r > 1e-8 {
            return Err(GeomError::InvalidStructure(format!(
                "F^2 differs from {epsilon}·I by {r:e} at {p:?}"
            )));
        }
        Ok(())
    })
}

/// Rejects `g` unless `g(FX,FY) = λ g(X,Y)` to 1e-8 at every sample point.
pub fn validate_lambda_hermitian(g: &Metric, f: &TensorField, lambda: f64) -> Result<()> {
    at_samples(g.chart(), |p| {
        let m = matrix_at(f, p)?;
        let gm = g.matrix(p)?;
        let r = (m.transpose() * &gm * &m - &gm * lambda).amax();
        if r > 1e-8 {
            return Err(GeomError::InvalidStructure(format!(
                "g(F·,F·) differs from {lambda}·g by {r:e} at {p:?}"
            )));
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::tensor3_at;
    use crate::manifold::Signature;

    fn euclid() -> Metric {
        let chart = Chart::cube(2, -1.0, 1.0, 8, 0).unwrap();
        Metric::from_exprs(&[vec!["1", "0"], vec!["0", "1"]], &chart, Signature::Riemannian).unwrap()
    }

    #[test]
    fn lyra_hand_values() {
        let g = euclid();
        let theta = TensorField::constant(Valence::COVECTOR, 2, vec![1.0, 0.0]).unwrap();
        let l = lyra(&g, &theta).unwrap();
        let p = [0.2, 0.1];
        let a = tensor3_at(&l.a, &p).unwrap();
        // A(e2,e1) = e2, A(e1,e2) = 0, A(e1,e1) = 0, A(e2,e2) = -e1
        assert_eq!((a[(0, 1, 0)], a[(1, 1, 0)]), (0.0, 1.0));
        assert_eq!((a[(0, 0, 1)], a[(1, 0, 1)]), (0.0, 0.0));
        assert_eq!((a[(0, 0, 0)], a[(1, 0, 0)]), (0.0, 0.0));
        assert_eq!((a[(0, 1, 1)], a[(1, 1, 1)]), (-1.0, 0.0));
        let t = tensor3_at(&torsion(&l.connection), &p).unwrap();
        assert_eq!((t[(0, 0, 1)], t[(1, 0, 1)]), (0.0, -1.0));
        // Triple (e1,e2,e2) contributes 1; the maximum, 2, sits at (e2,e2,e1).
        let s = DMatrix::<f64>::identity(2, 2);
        let th = [1.0, 0.0];
        let at = |i: usize, j: usize, k: usize| th[i] * s[(j, k)] + th[j] * s[(i, k)] - th[k] * (s[(i, j)] + s[(j, i)]);
        assert_eq!(at(0, 1, 1), 1.0);
        assert_eq!(at(1, 1, 0), -2.0);
        assert_eq!(l.residual_3_3(&p).unwrap(), 2.0);
        assert!(l.metric_residual(&p).unwrap() < 1e-15);
    }

    #[test]
    fn epsilon_and_hermitian_validation() {
        let g = euclid();
        let j = TensorField::constant(Valence::ENDO, 2, vec![0.0, -1.0, 1.0, 0.0]).unwrap();
        assert!(validate_epsilon_structure(&j, -1.0, g.chart()).is_ok());
        assert!(validate_epsilon_structure(&j, 1.0, g.chart()).is_err());
        assert!(validate_lambda_hermitian(&g, &j, 1.0).is_ok());
        assert!(validate_lambda_hermitian(&g, &j, -1.0).is_err());
    }
}

use nalgebra::DMatrix;

use super::{at_samples, expect, matrix_at, tensor3_at, vector_at};
use crate::error::{GeomError, Result};
use crate::expr::{sum_jets, Jet2};
use crate::frobenius::nan_max;
use crate::manifold::{
    covariant_derivative_02, covariant_derivative_11, deformation, differential, levi_civita, ricci, Metric, Signature,
    TensorField, Valence,
};

/// `max |g(Je_i, e_j) - g(e_i, Je_j)|` at `p`.
pub fn residual_4_1(g: &Metric, j: &TensorField, p: &[f64]) -> Result<f64> {
    let gm = g.matrix(p)?;
    let jm = matrix_at(j, p)?;
    Ok((jm.transpose() * &gm - &gm * &jm).amax())
}

/// `max |(∇J)^k_ij - (∇J)^k_ji|` at `p`.
pub fn residual_4_2(nabla_j: &TensorField, p: &[f64]) -> Result<f64> {
    let d = tensor3_at(nabla_j, p)?;
    let n = d.dim();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                worst = nan_max(worst, (d[(k, i, j)] - d[(k, j, i)]).abs());
            }
        }
    }
    Ok(worst)
}

/// `max |ω_i g_jk - ω_k g_ji|` over index triples.
pub fn residual_2_9(omega: &[f64], g: &DMatrix<f64>) -> f64 {
    let n = omega.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = nan_max(worst, (omega[i] * g[(j, k)] - omega[k] * g[(j, i)]).abs());
            }
        }
    }
    worst
}

/// `g̃(X,Y) = g(X,JY)` for a positive g-self-adjoint `J`, with
/// `A = LC(g̃) - LC(g)`.
#[derive(Debug, Clone)]
pub struct SelfAdjointPair {
    pub g: Metric,
    pub j: TensorField,
    pub g_tilde: Metric,
    pub a: TensorField,
    /// `∇J` for the Levi-Civita connection of `g`.
    pub nabla_j: TensorField,
}

pub fn selfadjoint_pair(g: &Metric, j: &TensorField) -> Result<SelfAdjointPair> {
    expect(j, Valence::ENDO, "J")?;
    let n = g.dim();
    at_samples(g.chart(), |p| {
        if residual_4_1(g, j, p)? > 1e-10 {
            return Err(GeomError::NotSelfAdjoint(p.to_vec()));
        }
        Ok(())
    })?;
    let product = TensorField::algebraic(Valence::BILINEAR, n, vec![g.field().clone(), j.clone()], move |x| {
        let d = x[0][0].dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for jj in 0..n {
                let terms: Vec<Jet2> = (0..n).map(|k| &x[0][i * n + k] * &x[1][k * n + jj]).collect();
                out.push(sum_jets(d, &terms));
            }
        }
        Ok(out)
    })?;
    let g_tilde = Metric::new(product, g.chart(), Signature::Riemannian).map_err(|e| match e {
        GeomError::NotPositiveDefinite(p) | GeomError::SingularMetric(p) => GeomError::NotPositive(p),
        other => other,
    })?;
    let lc = levi_civita(g)?;
    let a = deformation(&lc, &levi_civita(&g_tilde)?)?;
    let nabla_j = covariant_derivative_11(&lc, j)?;
    Ok(SelfAdjointPair {
        g: g.clone(),
        j: j.clone(),
        g_tilde,
        a,
        nabla_j,
    })
}

impl SelfAdjointPair {
    /// `max |g(Y,(∇_X J)Z - (∇_Z J)X) - g(X,(∇_Z J)Y) + g(Z,(∇_X J)Y)|` over
    /// basis triples `(X,Y,Z) = (e_i,e_j,e_k)`.
    pub fn residual_2_8(&self, p: &[f64]) -> Result<f64> {
        let gm = self.g.matrix(p)?;
        let d = tensor3_at(&self.nabla_j, p)?;
        let n = gm.nrows();
        let low = |a: usize, m_i: usize, m_j: usize| (0..n).map(|m| gm[(a, m)] * d[(m, m_i, m_j)]).sum::<f64>();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let r = low(j, i, k) - low(j, k, i) - low(i, k, j) + low(k, i, j);
                    worst = nan_max(worst, r.abs());
                }
            }
        }
        Ok(worst)
    }
}

/// `J = e^φ J₀` with `∇J₀ = 0`, recurrent with `ω = dφ`.
#[derive(Debug, Clone)]
pub struct Recurrent {
    pub pair: SelfAdjointPair,
    pub omega: TensorField,
}

pub fn recurrent_j(g: &Metric, j0: &TensorField, phi: &TensorField) -> Result<Recurrent> {
    expect(j0, Valence::ENDO, "J₀")?;
    expect(phi, Valence::SCALAR, "φ")?;
    let j = j0.mul_scalar(&TensorField::algebraic(
        Valence::SCALAR,
        g.dim(),
        vec![phi.clone()],
        |x| Ok(vec![x[0][0].exp()]),
    )?)?;
    let pair = selfadjoint_pair(g, &j)?;
    Ok(Recurrent {
        pair,
        omega: differential(phi)?,
    })
}

impl Recurrent {
    /// `max |(∇J)^k_ij - ω_i J^k_j|`, zero when `J` is recurrent.
    pub fn recurrence_residual(&self, p: &[f64]) -> Result<f64> {
        let d = tensor3_at(&self.pair.nabla_j, p)?;
        let w = vector_at(&self.omega, p)?;
        let j = matrix_at(&self.pair.j, p)?;
        let n = w.len();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for jj in 0..n {
                    worst = nan_max(worst, (d[(k, i, jj)] - w[i] * j[(k, jj)]).abs());
                }
            }
        }
        Ok(worst)
    }

    pub fn residual_2_9(&self, p: &[f64]) -> Result<f64> {
        Ok(residual_2_9(
            vector_at(&self.omega, p)?.as_slice(),
            &self.pair.g.matrix(p)?,
        ))
    }
}

/// `A(X,Y) = (∇_X J)Y` for the Levi-Civita connection of `g`.
#[derive(Debug, Clone)]
pub struct NablaJ {
    pub g: Metric,
    pub j: TensorField,
    pub a: TensorField,
}

pub fn nabla_j_a(g: &Metric, j: &TensorField) -> Result<NablaJ> {
    expect(j, Valence::ENDO, "J")?;
    let a = covariant_derivative_11(&levi_civita(g)?, j)?;
    Ok(NablaJ {
        g: g.clone(),
        j: j.clone(),
        a,
    })
}

impl NablaJ {
    pub fn residual_4_1(&self, p: &[f64]) -> Result<f64> {
        residual_4_1(&self.g, &self.j, p)
    }

    pub fn residual_4_2(&self, p: &[f64]) -> Result<f64> {
        residual_4_2(&self.a, p)
    }
}

/// Returns `p ↦ max |(∇R)_ijk - (∇R)_jik|` for the Ricci tensor of `g`.
pub fn ricci_codazzi_residual(g: &Metric) -> Result<impl Fn(&[f64]) -> Result<f64>> {
    let lc = levi_civita(g)?;
    let nabla_r = covariant_derivative_02(&lc, &ricci(&lc))?;
    Ok(move |p: &[f64]| {
        let d = tensor3_at(&nabla_r, p)?;
        let n = d.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = nan_max(worst, (d[(i, j, k)] - d[(j, i, k)]).abs());
                }
            }
        }
        Ok(worst)
    })
}

/// A nondegenerate Ricci tensor used as a second metric, `A = LC(R) - LC(g)`.
#[derive(Debug, Clone)]
pub struct Einstein2D {
    pub g: Metric,
    pub r: Metric,
    pub a: TensorField,
}

pub fn einstein_2d(g: &Metric) -> Result<Einstein2D> {
    let lc = levi_civita(g)?;
    let r = Metric::new(ricci(&lc), g.chart(), Signature::Indefinite)?;
    let a = deformation(&lc, &levi_civita(&r)?)?;
    Ok(Einstein2D { g: g.clone(), r, a })
}

impl Einstein2D {
    /// `λ = tr(g^{-1} R) / n`.
    pub fn lambda(&self, p: &[f64]) -> Result<f64> {
        let m = self.g.inverse(p)? * self.r.matrix(p)?;
        Ok(m.trace() / self.g.dim() as f64)
    }

    /// `max |R - λ g|` at `p`.
    pub fn einstein_residual(&self, p: &[f64]) -> Result<f64> {
        let lambda = self.lambda(p)?;
        Ok((self.r.matrix(p)? - self.g.matrix(p)? * lambda).amax())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Chart;

    fn flat(n: usize) -> Metric {
        let chart = Chart::cube(n, -1.0, 1.0, 12, 0).unwrap();
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { "1".into() } else { "0".into() }).collect())
            .collect();
        Metric::from_exprs(&rows, &chart, Signature::Riemannian).unwrap()
    }

    #[test]
    fn residual_2_9_hand_values() {
        let g = DMatrix::identity(2, 2);
        assert_eq!(residual_2_9(&[1.0, 0.0], &g), 1.0);
        assert_eq!(residual_2_9(&[0.0, 0.0], &g), 0.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0, 5.0]));
        // ω supported on index 1: max over i ≠ j of |ω_i| g_jj = 0.5 * 5
        assert_eq!(residual_2_9(&[0.0, 0.5, 0.0], &d), 2.5);
    }

    #[test]
    fn identity_and_scaled_identity_are_trivial() {
        let g = flat(2);
        for c in ["1", "3"] {
            let j = TensorField::from_exprs(Valence::ENDO, 2, &[c, "0", "0", c]).unwrap();
            let pair = selfadjoint_pair(&g, &j).unwrap();
            for p in g.chart().points() {
                assert!(pair.residual_2_8(&p).unwrap() < 1e-12);
                assert!(pair.a.values(&p).unwrap().iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn scalar_multiple_of_identity() {
        let g = flat(2);
        let j = TensorField::from_exprs(Valence::ENDO, 2, &["exp(x1*x2)", "0", "0", "exp(x1*x2)"]).unwrap();
        let nj = nabla_j_a(&g, &j).unwrap();
        let p = [0.3f64, -0.5];
        let f = (p[0] * p[1]).exp();
        let d = tensor3_at(&nj.a, &p).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for jj in 0..2 {
                    let df = if i == 0 { p[1] * f } else { p[0] * f };
                    let expected = if k == jj { df } else { 0.0 };
                    assert!((d[(k, i, jj)] - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_non_self_adjoint_and_non_positive() {
        let g = flat(2);
        let skew = TensorField::from_exprs(Valence::ENDO, 2, &["1", "1", "0", "1"]).unwrap();
        assert!(matches!(selfadjoint_pair(&g, &skew), Err(GeomError::NotSelfAdjoint(_))));
        let neg = TensorField::from_exprs(Valence::ENDO, 2, &["-1", "0", "0", "1"]).unwrap();
        assert!(matches!(selfadjoint_pair(&g, &neg), Err(GeomError::NotPositive(_))));
    }

    #[test]
    fn recurrent_scaling_of_identity() {
        let g = flat(2);
        let j0 = TensorField::from_exprs(Valence::ENDO, 2, &["1", "0", "0", "1"]).unwrap();
        let phi = TensorField::scalar_expr(2, "x1").unwrap();
        let r = recurrent_j(&g, &j0, &phi).unwrap();
        for p in g.chart().points() {
            assert!(r.recurrence_residual(&p).unwrap() < 1e-12);
            assert!((r.residual_2_9(&p).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}

use nalgebra::DMatrix;

use super::expect;
use crate::error::Result;
use crate::expr::Jet2;
use crate::manifold::{deformation, differential, levi_civita, sharp, Connection, Metric, TensorField, Valence};

/// `A^k_ij = θ_i δ^k_j + θ_j δ^k_i + g_ij P^k`.
pub fn subgeodesic_a(theta: &TensorField, p_vec: &TensorField, g: &Metric) -> Result<TensorField> {
    expect(theta, Valence::COVECTOR, "θ")?;
    expect(p_vec, Valence::VECTOR, "P")?;
    let n = g.dim();
    let inputs = vec![theta.clone(), p_vec.clone(), g.field().clone()];
    TensorField::algebraic(Valence::ALGEBRA, n, inputs, move |x| {
        let (th, pv, gg) = (&x[0], &x[1], &x[2]);
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut a = &gg[i * n + j] * &pv[k];
                    if k == j {
                        a = &a + &th[i];
                    }
                    if k == i {
                        a = &a + &th[j];
                    }
                    out.push(a);
                }
            }
        }
        Ok(out)
    })
}

/// The projective change `A^k_ij = θ_i δ^k_j + θ_j δ^k_i`.
pub fn projective_a(theta: &TensorField) -> Result<TensorField> {
    expect(theta, Valence::COVECTOR, "θ")?;
    let n = theta.dim();
    TensorField::algebraic(Valence::ALGEBRA, n, vec![theta.clone()], move |x| {
        let th = &x[0];
        let zero = Jet2::constant(th[0].dim(), 0.0);
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut a = zero.clone();
                    if k == j {
                        a = &a + &th[i];
                    }
                    if k == i {
                        a = &a + &th[j];
                    }
                    out.push(a);
                }
            }
        }
        Ok(out)
    })
}

/// `max |θ_i g_jk + ψ_k g_ji - θ_k g_ji - ψ_i g_jk|` over index triples.
pub fn residual_2_2(theta: &[f64], psi: &[f64], g: &DMatrix<f64>) -> f64 {
    let n = theta.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r = theta[i] * g[(j, k)] + psi[k] * g[(j, i)] - theta[k] * g[(j, i)] - psi[i] * g[(j, k)];
                worst = crate::frobenius::nan_max(worst, r.abs());
            }
        }
    }
    worst
}

/// The conformal change `ḡ = e^{2u} g`, a subgeodesic correspondence with
/// `θ = du` and `P = -grad u`.
#[derive(Debug, Clone)]
pub struct Conformal {
    pub g: Metric,
    pub g_bar: Metric,
    pub theta: TensorField,
    pub p: TensorField,
    pub a: TensorField,
}

impl Conformal {
    /// The deformation as a difference of Levi-Civita connections.
    pub fn connection_difference(&self) -> Result<TensorField> {
        let lc: Connection = levi_civita(&self.g)?;
        let lc_bar = levi_civita(&self.g_bar)?;
        deformation(&lc, &lc_bar)
    }
}

pub fn conformal(g: &Metric, u: &TensorField) -> Result<Conformal> {
    expect(u, Valence::SCALAR, "u")?;
    let n = g.dim();
    let scaled = TensorField::algebraic(Valence::BILINEAR, n, vec![g.field().clone(), u.clone()], |x| {
        let w = x[1][0].scale(2.0).exp();
        Ok(x[0].iter().map(|gij| gij * &w).collect())
    })?;
    let g_bar = Metric::new(scaled, g.chart(), g.signature())?;
    let theta = differential(u)?;
    let p = sharp(&theta, g)?.scale(-1.0);
    let a = subgeodesic_a(&theta, &p, g)?;
    Ok(Conformal {
        g: g.clone(),
        g_bar,
        theta,
        p,
        a,
    })
}

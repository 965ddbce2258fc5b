use nalgebra::DMatrix;

use super::{at_samples, expect, matrix_at, tensor3_at};
use crate::error::{GeomError, Result};
use crate::expr::{sum_jets, Jet2};
use crate::frobenius::nan_max;
use crate::manifold::{exterior_derivative_2form, Chart, Metric, Tensor3, TensorField, Valence};

/// Rejects `J` unless `J² = -I` to 1e-8 at every sample point.
pub fn validate_almost_complex(j: &TensorField, chart: &Chart) -> Result<()> {
    expect(j, Valence::ENDO, "J")?;
    at_samples(chart, |p| {
        let m = matrix_at(j, p)?;
        let n = m.nrows();
        if (&m * &m + DMatrix::<f64>::identity(n, n)).amax() > 1e-8 {
            return Err(GeomError::NotAlmostComplex(p.to_vec()));
        }
        Ok(())
    })
}

/// `A^k_ij = ½ (Q^k_ij - J^k_l Q^l_im J^m_j)`.
pub fn kahler_q_a(j: &TensorField, q: &TensorField, chart: &Chart) -> Result<TensorField> {
    expect(q, Valence::ALGEBRA, "Q")?;
    validate_almost_complex(j, chart)?;
    let n = j.dim();
    TensorField::algebraic(Valence::ALGEBRA, n, vec![j.clone(), q.clone()], move |x| {
        let (jj, qq) = (&x[0], &x[1]);
        let d = jj[0].dim();
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for jx in 0..n {
                    let mut terms = Vec::with_capacity(n * n);
                    for l in 0..n {
                        for m in 0..n {
                            terms.push(&(&jj[k * n + l] * &qq[(l * n + i) * n + m]) * &jj[m * n + jx]);
                        }
                    }
                    out.push((&qq[(k * n + i) * n + jx] - &sum_jets(d, &terms)).scale(0.5));
                }
            }
        }
        Ok(out)
    })
}

/// `max |gQ(e_i,e_j)e_k - gQ(e_j,e_k)e_i - gQ(e_j,Je_k)Je_i + gQ(e_i,Je_j)Je_k|`,
/// where `gQ(X,Y)Z = g(Q(X,Y),Z)`.
pub fn residual_3_19(g: &DMatrix<f64>, j: &DMatrix<f64>, q: &Tensor3) -> f64 {
    let n = g.nrows();
    let low = Tensor3::from_fn(n, |a, b, c| (0..n).map(|l| q[(l, a, b)] * g[(l, c)]).sum());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for jj in 0..n {
            for k in 0..n {
                let mut t3 = 0.0;
                let mut t4 = 0.0;
                for m in 0..n {
                    for a in 0..n {
                        t3 += j[(m, k)] * j[(a, i)] * low[(jj, m, a)];
                        t4 += j[(m, jj)] * j[(a, k)] * low[(i, m, a)];
                    }
                }
                let r = low[(i, jj, k)] - low[(jj, k, i)] - t3 + t4;
                worst = nan_max(worst, r.abs());
            }
        }
    }
    worst
}

/// `max |T_ijk - T_jki|`.
pub fn circular_asymmetry(t: &Tensor3) -> f64 {
    let n = t.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = nan_max(worst, (t[(i, j, k)] - t[(j, k, i)]).abs());
            }
        }
    }
    worst
}

/// Difference of the two sides of the circular-sum identity for `δ ⊗ Ω`,
/// evaluated term by term as written.
pub fn residual_3_25(delta: &[f64], omega: &DMatrix<f64>) -> f64 {
    let n = delta.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = delta[i] * omega[(j, k)] + delta[j] * omega[(k, i)] + delta[k] * omega[(i, j)];
                let rhs = delta[j] * omega[(k, i)] + delta[k] * omega[(i, j)] + delta[i] * omega[(j, k)];
                worst = nan_max(worst, (lhs - rhs).abs());
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Chern,
    Bismut,
}

/// Chern and Bismut deformations of a Hermitian structure `(g, J)`.
#[derive(Debug, Clone)]
pub struct ChernBismut {
    pub g: Metric,
    pub j: TensorField,
    /// `Ω_ij = g_im J^m_j`.
    pub omega: TensorField,
    pub d_omega: TensorField,
    pub a_chern: TensorField,
    pub a_bismut: TensorField,
}

pub fn chern_bismut(g: &Metric, j: &TensorField) -> Result<ChernBismut> {
    validate_almost_complex(j, g.chart())?;
    at_samples(g.chart(), |p| {
        let m = matrix_at(j, p)?;
        let gm = g.matrix(p)?;
        if (m.transpose() * &gm * &m - &gm).amax() > 1e-8 {
            return Err(GeomError::NotHermitian(p.to_vec()));
        }
        Ok(())
    })?;
    let n = g.dim();
    let omega = TensorField::algebraic(Valence::BILINEAR, n, vec![g.field().clone(), j.clone()], move |x| {
        let d = x[0][0].dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for jj in 0..n {
                let terms: Vec<Jet2> = (0..n).map(|m| &x[0][i * n + m] * &x[1][m * n + jj]).collect();
                out.push(sum_jets(d, &terms));
            }
        }
        Ok(out)
    })?;
    let d_omega = exterior_derivative_2form(&omega)?;
    let a_chern = deformation_from_d_omega(g, j, &d_omega, Which::Chern);
    let a_bismut = deformation_from_d_omega(g, j, &d_omega, Which::Bismut);
    Ok(ChernBismut {
        g: g.clone(),
        j: j.clone(),
        omega,
        d_omega,
        a_chern,
        a_bismut,
    })
}

/// `T_ijk = Σ J^a_i J^b_j J^c_k dΩ_abc`.
fn jjj(j: &DMatrix<f64>, d: &Tensor3) -> Tensor3 {
    let n = j.nrows();
    // Contract one slot at a time.
    let t1 = Tensor3::from_fn(n, |i, b, c| (0..n).map(|a| j[(a, i)] * d[(a, b, c)]).sum());
    let t2 = Tensor3::from_fn(n, |i, jj, c| (0..n).map(|b| j[(b, jj)] * t1[(i, b, c)]).sum());
    Tensor3::from_fn(n, |i, jj, k| (0..n).map(|c| j[(c, k)] * t2[(i, jj, c)]).sum())
}

/// `T_ijk = Σ J^a_i dΩ_ajk`.
fn j_first(j: &DMatrix<f64>, d: &Tensor3) -> Tensor3 {
    let n = j.nrows();
    Tensor3::from_fn(n, |i, jj, k| (0..n).map(|a| j[(a, i)] * d[(a, jj, k)]).sum())
}

fn deformation_from_d_omega(g: &Metric, j: &TensorField, d_omega: &TensorField, which: Which) -> TensorField {
    let n = g.dim();
    let (g, j, d_omega) = (g.clone(), j.clone(), d_omega.clone());
    TensorField::derived(Valence::ALGEBRA, n, move |p| {
        let jm = matrix_at(&j, p)?;
        let d = tensor3_at(&d_omega, p)?;
        let lowered = match which {
            Which::Chern => j_first(&jm, &d).map(|x| 0.5 * x),
            Which::Bismut => jjj(&jm, &d).map(|x| -0.5 * x),
        };
        let ginv = g.inverse(p)?;
        let a = Tensor3::from_fn(n, |l, i, jj| (0..n).map(|k| ginv[(l, k)] * lowered[(i, jj, k)]).sum());
        Ok(a.into_vec())
    })
}

impl ChernBismut {
    pub fn a(&self, which: Which) -> &TensorField {
        match which {
            Which::Chern => &self.a_chern,
            Which::Bismut => &self.a_bismut,
        }
    }

    /// `max |dΩ(Je_i,e_j,e_k) - dΩ(Je_j,e_k,e_i)|`.
    pub fn residual_3_22(&self, p: &[f64]) -> Result<f64> {
        let t = j_first(&matrix_at(&self.j, p)?, &tensor3_at(&self.d_omega, p)?);
        Ok(circular_asymmetry(&t))
    }

    /// Circular asymmetry of `dΩ(J·,J·,J·)`.
    pub fn residual_3_23(&self, p: &[f64]) -> Result<f64> {
        Ok(circular_asymmetry(&self.jjj_d_omega(p)?))
    }

    pub fn jjj_d_omega(&self, p: &[f64]) -> Result<Tensor3> {
        Ok(jjj(&matrix_at(&self.j, p)?, &tensor3_at(&self.d_omega, p)?))
    }

    /// `max |dΩ_ijk - (θ_i Ω_jk - θ_j Ω_ik + θ_k Ω_ij)|` for a candidate `θ`.
    pub fn lck_residual(&self, theta: &TensorField, p: &[f64]) -> Result<f64> {
        expect(theta, Valence::COVECTOR, "θ")?;
        let th = theta.values(p)?;
        let w = matrix_at(&self.omega, p)?;
        let d = tensor3_at(&self.d_omega, p)?;
        let n = th.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let wedge = th[i] * w[(j, k)] - th[j] * w[(i, k)] + th[k] * w[(i, j)];
                    worst = nan_max(worst, (d[(i, j, k)] - wedge).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Both sides of the LCK Chern criterion with `δ = d*Ω` supplied as a
    /// 1-form, evaluated as written; returns the max-abs difference.
    pub fn residual_3_24(&self, delta: &TensorField, p: &[f64]) -> Result<f64> {
        expect(delta, Valence::COVECTOR, "d*Ω")?;
        let dl = delta.values(p)?;
        let jm = matrix_at(&self.j, p)?;
        let g = self.g.matrix(p)?;
        let w = matrix_at(&self.omega, p)?;
        let n = dl.len();
        let dj: Vec<f64> = (0..n).map(|b| (0..n).map(|a| dl[a] * jm[(a, b)]).sum()).collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = dl[i] * w[(j, k)] + dj[j] * g[(k, i)] - dj[k] * g[(i, j)];
                    let rhs = dl[j] * w[(k, i)] + dj[k] * g[(i, j)] - dj[i] * g[(j, k)];
                    worst = nan_max(worst, (lhs - rhs).abs());
                }
            }
        }
        Ok(worst)
    }

    pub fn residual_3_25(&self, delta: &TensorField, p: &[f64]) -> Result<f64> {
        Ok(residual_3_25(&delta.values(p)?, &matrix_at(&self.omega, p)?))
    }
}

//! Covariant derivatives, curvature, musical isomorphisms and exterior
//! derivatives in coordinates.

use std::sync::Arc;

use super::connection::Connection;
use super::field::{fd_jets_from_first, flat_index, invert_jets, ComponentSource, Order, TensorField, Valence};
use super::metric::Metric;
use crate::error::{GeomError, Result};
use crate::expr::{sum_jets, Jet2};

fn expect_valence(t: &TensorField, v: Valence) -> Result<()> {
    if t.valence() != v {
        return Err(GeomError::InvalidArgument(format!(
            "expected a {v} field, got {}",
            t.valence()
        )));
    }
    Ok(())
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(GeomError::ChartMismatch(a, b));
    }
    Ok(())
}

/// `(∇S)_ijk = ∂_i S_jk - Γ^l_ij S_lk - Γ^l_ik S_jl`.
pub fn covariant_derivative_02(c: &Connection, s: &TensorField) -> Result<TensorField> {
    expect_valence(s, Valence::BILINEAR)?;
    same_dim(c.dim(), s.dim())?;
    let n = c.dim();
    let (c, s) = (c.clone(), s.clone());
    Ok(TensorField::derived(Valence::TRILINEAR, n, move |p| {
        let sj = s.jets(p, Order::First)?;
        let gm = c.coefficients(p)?;
        let mut out = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = sj[j * n + k].partial(i);
                    for l in 0..n {
                        v -= gm[(l, i, j)] * sj[l * n + k].value() + gm[(l, i, k)] * sj[j * n + l].value();
                    }
                    out.push(v);
                }
            }
        }
        Ok(out)
    }))
}

/// `(∇J)^k_ij = ∂_i J^k_j + Γ^k_il J^l_j - Γ^l_ij J^k_l`, stored at `(k, i, j)`.
pub fn covariant_derivative_11(c: &Connection, j_field: &TensorField) -> Result<TensorField> {
    expect_valence(j_field, Valence::ENDO)?;
    same_dim(c.dim(), j_field.dim())?;
    let n = c.dim();
    let (c, jf) = (c.clone(), j_field.clone());
    Ok(TensorField::derived(Valence::ALGEBRA, n, move |p| {
        let jj = jf.jets(p, Order::First)?;
        let gm = c.coefficients(p)?;
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = jj[k * n + j].partial(i);
                    for l in 0..n {
                        v += gm[(k, i, l)] * jj[l * n + j].value() - gm[(l, i, j)] * jj[k * n + l].value();
                    }
                    out.push(v);
                }
            }
        }
        Ok(out)
    }))
}

/// `R^l_kij = ∂_i Γ^l_jk - ∂_j Γ^l_ik + Γ^l_im Γ^m_jk - Γ^l_jm Γ^m_ik`, stored
/// at `(l, k, i, j)`.
pub fn curvature(c: &Connection) -> TensorField {
    let n = c.dim();
    let c = c.clone();
    TensorField::derived(Valence::CURVATURE, n, move |p| {
        let gj = c.jets(p, Order::First)?;
        let g = |a: usize, b: usize, d: usize| &gj[(a * n + b) * n + d];
        let mut out = Vec::with_capacity(n.pow(4));
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut v = g(l, j, k).partial(i) - g(l, i, k).partial(j);
                        for m in 0..n {
                            v += g(l, i, m).value() * g(m, j, k).value() - g(l, j, m).value() * g(m, i, k).value();
                        }
                        out.push(v);
                    }
                }
            }
        }
        Ok(out)
    })
}

/// `R_jk = R^i_jik`; equals `g` on the unit sphere.
pub fn ricci(c: &Connection) -> TensorField {
    let n = c.dim();
    let r = curvature(c);
    TensorField::derived(Valence::BILINEAR, n, move |p| {
        let rv = r.values(p)?;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                out.push((0..n).map(|i| rv[flat_index(n, &[i, j, i, k])]).sum());
            }
        }
        Ok(out)
    })
}

fn matmul_jets(a: &[Jet2], b: &[Jet2], n: usize, d: usize) -> Vec<Jet2> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let terms: Vec<Jet2> = (0..n).map(|k| &a[i * n + k] * &b[k * n + j]).collect();
            out.push(sum_jets(d, &terms));
        }
    }
    out
}

/// `ric^i_j = g^{ik} R_kj`.
pub fn ric_operator(g: &Metric, r: &TensorField) -> Result<TensorField> {
    expect_valence(r, Valence::BILINEAR)?;
    same_dim(g.dim(), r.dim())?;
    raise_first(g, r)
}

/// `(g^{-1} S)^i_j = g^{ik} S_kj` for a (0,2) field `S`.
pub fn raise_first(g: &Metric, s: &TensorField) -> Result<TensorField> {
    let n = g.dim();
    TensorField::algebraic(Valence::ENDO, n, vec![g.field().clone(), s.clone()], move |x| {
        let inv = invert_jets(&x[0], n, &[])?;
        Ok(matmul_jets(&inv, &x[1], n, x[0][0].dim()))
    })
}

/// `θ^k = g^{kl} θ_l`.
pub fn sharp(theta: &TensorField, g: &Metric) -> Result<TensorField> {
    expect_valence(theta, Valence::COVECTOR)?;
    same_dim(g.dim(), theta.dim())?;
    let n = g.dim();
    TensorField::algebraic(Valence::VECTOR, n, vec![g.field().clone(), theta.clone()], move |x| {
        let inv = invert_jets(&x[0], n, &[])?;
        let d = x[0][0].dim();
        Ok((0..n)
            .map(|k| {
                let terms: Vec<Jet2> = (0..n).map(|l| &inv[k * n + l] * &x[1][l]).collect();
                sum_jets(d, &terms)
            })
            .collect())
    })
}

/// `X_k = g_kl X^l`.
pub fn flat(x: &TensorField, g: &Metric) -> Result<TensorField> {
    expect_valence(x, Valence::VECTOR)?;
    same_dim(g.dim(), x.dim())?;
    let n = g.dim();
    TensorField::algebraic(Valence::COVECTOR, n, vec![g.field().clone(), x.clone()], move |x| {
        let d = x[0][0].dim();
        Ok((0..n)
            .map(|k| {
                let terms: Vec<Jet2> = (0..n).map(|l| &x[0][k * n + l] * &x[1][l]).collect();
                sum_jets(d, &terms)
            })
            .collect())
    })
}

/// Coordinate partials `∂_i u` of a scalar field, with exact first jets.
struct DifferentialSource {
    u: TensorField,
}

impl DifferentialSource {
    fn first(&self, p: &[f64]) -> Result<Vec<Jet2>> {
        let u = &self.u.jets(p, Order::Second)?[0];
        let n = p.len();
        Ok((0..n)
            .map(|i| Jet2::from_parts(u.partial(i), (0..n).map(|j| u.hessian(i, j)).collect(), |_, _| 0.0))
            .collect())
    }
}

impl ComponentSource for DifferentialSource {
    fn dim(&self) -> usize {
        self.u.dim()
    }
    fn len(&self) -> usize {
        self.u.dim()
    }
    fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.u.jets(p, Order::First)?[0].gradient().to_vec())
    }
    fn jets(&self, p: &[f64], order: Order) -> Result<Vec<Jet2>> {
        match order {
            Order::Value => Ok(self
                .values(p)?
                .into_iter()
                .map(|v| Jet2::constant(p.len(), v))
                .collect()),
            Order::First => self.first(p),
            Order::Second => fd_jets_from_first(p, &|q| self.first(q)),
        }
    }
}

/// `du` for a scalar field `u`.
pub fn differential(u: &TensorField) -> Result<TensorField> {
    expect_valence(u, Valence::SCALAR)?;
    TensorField::from_source(Valence::COVECTOR, Arc::new(DifferentialSource { u: u.clone() }))
}

/// `(dα)_ij = ∂_i α_j - ∂_j α_i`.
pub fn exterior_derivative_1form(alpha: &TensorField) -> Result<TensorField> {
    expect_valence(alpha, Valence::COVECTOR)?;
    let n = alpha.dim();
    let alpha = alpha.clone();
    Ok(TensorField::derived(Valence::BILINEAR, n, move |p| {
        let a = alpha.jets(p, Order::First)?;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(a[j].partial(i) - a[i].partial(j));
            }
        }
        Ok(out)
    }))
}

/// `(dΩ)_ijk = ∂_i Ω_jk - ∂_j Ω_ik + ∂_k Ω_ij` for an antisymmetric `Ω`.
pub fn exterior_derivative_2form(omega: &TensorField) -> Result<TensorField> {
    expect_valence(omega, Valence::BILINEAR)?;
    let n = omega.dim();
    let omega = omega.clone();
    Ok(TensorField::derived(Valence::TRILINEAR, n, move |p| {
        let w = omega.jets(p, Order::First)?;
        let d = |m: usize, a: usize, b: usize| w[a * n + b].partial(m);
        let mut out = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out.push(d(i, j, k) - d(j, i, k) + d(k, i, j));
                }
            }
        }
        Ok(out)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{levi_civita, Chart, Signature};

    fn unit_sphere() -> Metric {
        let chart = Chart::new(vec![(0.2, 2.9), (0.0, 6.0)], 24, 5, 0.05).unwrap();
        Metric::from_exprs(&[vec!["1", "0"], vec!["0", "sin(x1)^2"]], &chart, Signature::Riemannian).unwrap()
    }

    #[test]
    fn sphere_ricci_is_metric() {
        let g = unit_sphere();
        let ric = ricci(&levi_civita(&g).unwrap());
        for p in g.chart().points() {
            let r = ric.values(&p).unwrap();
            let gv = g.field().values(&p).unwrap();
            for (a, b) in r.iter().zip(&gv) {
                assert!((a - b).abs() < 1e-6, "{r:?} vs {gv:?}");
            }
        }
    }

    #[test]
    fn sharp_of_dx1_for_warped_metric() {
        let chart = Chart::cube(2, -1.0, 1.0, 8, 0).unwrap();
        let g = Metric::from_exprs(&[vec!["1 + x2^2", "0"], vec!["0", "1"]], &chart, Signature::Riemannian).unwrap();
        let dx1 = TensorField::constant(Valence::COVECTOR, 2, vec![1.0, 0.0]).unwrap();
        let s = sharp(&dx1, &g).unwrap();
        for p in chart.points() {
            let v = s.values(&p).unwrap();
            assert!((v[0] - 1.0 / (1.0 + p[1] * p[1])).abs() < 1e-15);
            assert_eq!(v[1], 0.0);
        }
    }

    #[test]
    fn d_squared_vanishes() {
        let alpha = TensorField::from_exprs(Valence::COVECTOR, 3, &["x2*x3^2", "sin(x1*x3)", "exp(x2)*x1"]).unwrap();
        let omega = exterior_derivative_1form(&alpha).unwrap();
        let dd = exterior_derivative_2form(&omega).unwrap();
        for v in dd.values(&[0.3, -0.2, 0.7]).unwrap() {
            assert!(v.abs() < 1e-7);
        }
    }

    #[test]
    fn differential_has_exact_first_jets() {
        let u = TensorField::scalar_expr(2, "x1^3*x2").unwrap();
        let du = differential(&u).unwrap();
        let j = du.jets(&[2.0, 3.0], Order::First).unwrap();
        assert_eq!(j[0].value(), 36.0);
        assert_eq!(j[0].gradient(), &[36.0, 12.0]);
        assert_eq!(j[1].gradient(), &[12.0, 0.0]);
    }
}

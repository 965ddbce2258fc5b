use std::sync::Arc;

use nalgebra::DMatrix;

use super::field::{fd_jets_from_first, invert_jets, ComponentSource, Order, TensorField, Valence};
use super::metric::Metric;
use super::tensor::Tensor3;
use crate::error::{GeomError, Result};
use crate::expr::{sum_jets, Jet2};

/// Coefficients `Γ^k_ij` stored as a (1,2)-shaped array of scalar fields,
/// index order `(k, i, j)`. They are not tensorial; only differences are.
#[derive(Debug, Clone)]
pub struct Connection {
    coeffs: TensorField,
    symmetric: bool,
}

impl Connection {
    /// A connection with arbitrary coefficients.
    pub fn general(coeffs: TensorField) -> Result<Self> {
        if coeffs.valence() != Valence::ALGEBRA {
            return Err(GeomError::InvalidArgument(format!(
                "connection coefficients need (1,2) shape, got {}",
                coeffs.valence()
            )));
        }
        Ok(Connection {
            coeffs,
            symmetric: false,
        })
    }

    /// A symmetric connection: `Γ^k_ji` is read from the slot `Γ^k_ij`, `i <= j`.
    pub fn symmetric(coeffs: TensorField) -> Result<Self> {
        let n = coeffs.dim();
        let base = Connection::general(coeffs)?;
        let mirrored = TensorField::algebraic(Valence::ALGEBRA, n, vec![base.coeffs], move |x| {
            let g = &x[0];
            let mut out = Vec::with_capacity(n * n * n);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = if i <= j { (i, j) } else { (j, i) };
                        out.push(g[(k * n + a) * n + b].clone());
                    }
                }
            }
            Ok(out)
        })?;
        Ok(Connection {
            coeffs: mirrored,
            symmetric: true,
        })
    }

    pub fn from_exprs<S: AsRef<str>>(dim: usize, exprs: &[S], symmetric: bool) -> Result<Self> {
        let field = TensorField::from_exprs(Valence::ALGEBRA, dim, exprs)?;
        if symmetric {
            Connection::symmetric(field)
        } else {
            Connection::general(field)
        }
    }

    /// The flat connection of the coordinates, `Γ = 0`.
    pub fn flat(dim: usize) -> Self {
        Connection {
            coeffs: TensorField::zero(Valence::ALGEBRA, dim),
            symmetric: true,
        }
    }

    /// `base + A` for a (1,2) field `A`.
    pub fn shifted(&self, a: &TensorField) -> Result<Self> {
        Connection::general(self.coeffs.add(a)?)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn field(&self) -> &TensorField {
        &self.coeffs
    }

    pub fn coefficients(&self, p: &[f64]) -> Result<Tensor3> {
        Tensor3::from_vec(self.dim(), self.coeffs.values(p)?)
    }

    pub fn jets(&self, p: &[f64], order: Order) -> Result<Vec<Jet2>> {
        self.coeffs.jets(p, order)
    }
}

struct LeviCivitaSource {
    metric: Metric,
}

impl LeviCivitaSource {
    fn christoffel(&self, p: &[f64]) -> Result<Vec<f64>> {
        let n = self.metric.dim();
        let g = self.metric.jets(p, Order::First)?;
        let ginv = self.metric.inverse(p)?;
        let dg = |m: usize, a: usize, b: usize| g[a * n + b].partial(m);
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let s: f64 = (0..n)
                        .map(|l| ginv[(k, l)] * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j)))
                        .sum();
                    out.push(0.5 * s);
                }
            }
        }
        Ok(out)
    }

    /// Values and exact gradients of `Γ`, from the Hessian of `g`.
    fn christoffel_first(&self, p: &[f64]) -> Result<Vec<Jet2>> {
        let n = self.metric.dim();
        let g = self.metric.jets(p, Order::Second)?;
        let ginv = invert_jets(&g, n, p)?;
        // ∂_m g_ab as a function: value and gradient are exact, Hessian unused.
        let dg = |m: usize, a: usize, b: usize| {
            let jet = &g[a * n + b];
            Jet2::from_parts(jet.partial(m), (0..n).map(|r| jet.hessian(m, r)).collect(), |_, _| 0.0)
        };
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let terms: Vec<Jet2> = (0..n)
                        .map(|l| &ginv[k * n + l] * &(&(&dg(i, j, l) + &dg(j, i, l)) - &dg(l, i, j)))
                        .collect();
                    let s = sum_jets(n, &terms).scale(0.5);
                    out.push(Jet2::from_parts(s.value(), s.gradient().to_vec(), |_, _| 0.0));
                }
            }
        }
        Ok(out)
    }
}

impl ComponentSource for LeviCivitaSource {
    fn dim(&self) -> usize {
        self.metric.dim()
    }
    fn len(&self) -> usize {
        self.metric.dim().pow(3)
    }
    fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.christoffel(p)
    }
    fn jets(&self, p: &[f64], order: Order) -> Result<Vec<Jet2>> {
        match order {
            Order::Value => Ok(self
                .christoffel(p)?
                .into_iter()
                .map(|v| Jet2::constant(p.len(), v))
                .collect()),
            Order::First => self.christoffel_first(p),
            Order::Second => fd_jets_from_first(p, &|q| self.christoffel_first(q)),
        }
    }
}

/// Levi-Civita connection of `g`, checked for metricity on the chart samples.
pub fn levi_civita(g: &Metric) -> Result<Connection> {
    let coeffs = TensorField::from_source(Valence::ALGEBRA, Arc::new(LeviCivitaSource { metric: g.clone() }))?;
    let c = Connection {
        coeffs,
        symmetric: true,
    };
    for p in g.chart().points() {
        let scale = 1.0
            + g.jets(&p, Order::First)?
                .iter()
                .fold(0.0f64, |m, j| j.gradient().iter().fold(m, |m, d| m.max(d.abs())));
        let r = compatibility_residual(&c, g, &p)?;
        if r > 1e-9 * scale {
            return Err(GeomError::InvalidStructure(format!(
                "Levi-Civita self-test failed at {p:?}: residual {r:e}"
            )));
        }
    }
    Ok(c)
}

/// `A = Γ_other - Γ_base`.
pub fn deformation(base: &Connection, other: &Connection) -> Result<TensorField> {
    if base.dim() != other.dim() {
        return Err(GeomError::ChartMismatch(base.dim(), other.dim()));
    }
    other.coeffs.sub(&base.coeffs)
}

/// `T^k_ij = Γ^k_ij - Γ^k_ji`.
pub fn torsion(c: &Connection) -> TensorField {
    let n = c.dim();
    TensorField::algebraic(Valence::ALGEBRA, n, vec![c.coeffs.clone()], move |x| {
        let g = &x[0];
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out.push(&g[(k * n + i) * n + j] - &g[(k * n + j) * n + i]);
                }
            }
        }
        Ok(out)
    })
    .expect("shape preserved")
}

/// `max |∂_k g_ij - Γ^l_ki g_lj - Γ^l_kj g_il|` at `p`.
pub fn compatibility_residual(c: &Connection, g: &Metric, p: &[f64]) -> Result<f64> {
    if c.dim() != g.dim() {
        return Err(GeomError::ChartMismatch(c.dim(), g.dim()));
    }
    let n = c.dim();
    let gj = g.jets(p, Order::First)?;
    let gm = DMatrix::from_fn(n, n, |i, j| gj[i * n + j].value());
    let gamma = c.coefficients(p)?;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut r = gj[i * n + j].partial(k);
                for l in 0..n {
                    r -= gamma[(l, k, i)] * gm[(l, j)] + gamma[(l, k, j)] * gm[(i, l)];
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Chart, Signature};

    fn sphere() -> Metric {
        let chart = Chart::new(vec![(0.2, 2.9), (0.0, 6.0)], 40, 1, 0.05).unwrap();
        Metric::from_exprs(&[vec!["1", "0"], vec!["0", "sin(x1)^2"]], &chart, Signature::Riemannian).unwrap()
    }

    #[test]
    fn sphere_christoffels() {
        let g = sphere();
        let c = levi_civita(&g).unwrap();
        for p in g.chart().points() {
            let gm = c.coefficients(&p).unwrap();
            let (s, co) = p[0].sin_cos();
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let expected = match (k, i, j) {
                            (0, 1, 1) => -s * co,
                            (1, 0, 1) | (1, 1, 0) => co / s,
                            _ => 0.0,
                        };
                        assert!((gm[(k, i, j)] - expected).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_christoffel_gradient_matches_differences() {
        let g = sphere();
        let c = levi_civita(&g).unwrap();
        let p = [1.1, 0.4];
        let exact = c.jets(&p, Order::First).unwrap();
        let fd = super::super::field::fd_jets(&p, Order::First, &|q| c.field().values(q)).unwrap();
        for (e, a) in exact.iter().zip(&fd) {
            for i in 0..2 {
                assert!((e.partial(i) - a.partial(i)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn torsion_of_random_connection_is_antisymmetric() {
        let exprs: Vec<String> = (0..8)
            .map(|k| format!("{}*x1 + x2^{}", k as f64 - 3.5, k % 3 + 1))
            .collect();
        let c = Connection::from_exprs(2, &exprs, false).unwrap();
        let t = torsion(&c);
        let p = [0.3, 0.8];
        let v = Tensor3::from_vec(2, t.values(&p).unwrap()).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(v[(k, i, j)], -v[(k, j, i)]);
                }
            }
        }
    }

    #[test]
    fn symmetric_constructor_mirrors_upper_slots() {
        let exprs = ["0", "x1", "99", "0", "0", "0", "0", "x2"];
        let c = Connection::from_exprs(2, &exprs, true).unwrap();
        let g = c.coefficients(&[2.0, 3.0]).unwrap();
        assert_eq!(g[(0, 1, 0)], 2.0);
        assert_eq!(torsion(&c).values(&[2.0, 3.0]).unwrap(), vec![0.0; 8]);
    }
}

//! Least-squares search for polynomial first integrals along trajectories.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{OdeSystem, Trajectory};
use crate::error::{GeomError, Result};

/// Monomials `Π y[vars[i]]^e[i]` over selected state components.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    pub vars: Vec<usize>,
    pub exponents: Vec<Vec<u32>>,
}

impl MonomialBasis {
    /// All non-constant monomials of total degree `1..=degree`, graded and
    /// then lexicographic.
    pub fn total_degree(vars: &[usize], degree: u32) -> Self {
        let k = vars.len();
        let mut exponents = Vec::new();
        for d in 1..=degree {
            let mut cur = vec![0u32; k];
            compositions(d, 0, &mut cur, &mut exponents);
        }
        MonomialBasis {
            vars: vars.to_vec(),
            exponents,
        }
    }

    pub fn with_extra(mut self, extra: &[Vec<u32>]) -> Self {
        for e in extra {
            if !self.exponents.contains(e) {
                self.exponents.push(e.clone());
            }
        }
        self
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn index_of(&self, e: &[u32]) -> Option<usize> {
        self.exponents.iter().position(|x| x == e)
    }

    /// Human-readable monomial, e.g. `x2^2*v1`.
    pub fn describe(&self, idx: usize, names: &[String]) -> String {
        let parts: Vec<String> = self.exponents[idx]
            .iter()
            .zip(&self.vars)
            .filter(|(e, _)| **e > 0)
            .map(|(e, v)| match e {
                1 => names[*v].clone(),
                _ => format!("{}^{e}", names[*v]),
            })
            .collect();
        parts.join("*")
    }

    /// Coefficient vector of a polynomial given as `(exponent, coefficient)`.
    pub fn vector(&self, terms: &[(Vec<u32>, f64)]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        for (e, c) in terms {
            let i = self
                .index_of(e)
                .ok_or_else(|| GeomError::InvalidArgument(format!("monomial {e:?} is not in the basis")))?;
            out[i] += c;
        }
        Ok(out)
    }

    fn validate(&self, state_dim: usize) -> Result<()> {
        if self.is_empty() {
            return Err(GeomError::RankDeficientBasis("empty basis".into()));
        }
        if let Some(v) = self.vars.iter().find(|v| **v >= state_dim) {
            return Err(GeomError::InvalidArgument(format!(
                "basis variable {v} outside a {state_dim}-dimensional state"
            )));
        }
        for e in &self.exponents {
            if e.len() != self.vars.len() {
                return Err(GeomError::InvalidArgument("exponent length mismatch".into()));
            }
            if e.iter().all(|x| *x == 0) {
                return Err(GeomError::RankDeficientBasis(
                    "the constant monomial has a vanishing time derivative".into(),
                ));
            }
            // Lower set: every divisor is present, so the Legendre
            // reparametrisation spans the same space.
            for i in 0..e.len() {
                if e[i] > 0 {
                    let mut d = e.clone();
                    d[i] -= 1;
                    if d.iter().any(|x| *x > 0) && self.index_of(&d).is_none() {
                        return Err(GeomError::InvalidArgument(format!(
                            "basis is not closed under division: {d:?} missing"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn compositions(rest: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == cur.len() {
        cur[pos] = rest;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    if cur.is_empty() {
        return;
    }
    for k in (0..=rest).rev() {
        cur[pos] = k;
        compositions(rest - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralFit {
    /// Best integral in monomial coordinates, unit Euclidean norm.
    pub coefficients: Vec<f64>,
    /// `σ_min / σ_max` of the conditioned derivative matrix.
    pub normalized_residual: f64,
    /// Singular values divided by the largest, ascending.
    pub spectrum: Vec<f64>,
    /// Monomial coefficient vectors spanning the numerical kernel.
    pub kernel: Vec<Vec<f64>>,
    pub rows: usize,
}

impl IntegralFit {
    /// `‖P t‖ / ‖t‖` with `P` the orthogonal projector onto the kernel span.
    pub fn kernel_cosine(&self, target: &[f64]) -> f64 {
        let norm = target.iter().map(|x| x * x).sum::<f64>().sqrt();
        if self.kernel.is_empty() || norm == 0.0 {
            return 0.0;
        }
        let n = target.len();
        let k = DMatrix::from_fn(n, self.kernel.len(), |i, j| self.kernel[j][i]);
        let q = k.qr().q();
        let t = DVector::from_column_slice(target);
        (q.transpose() * t).norm() / norm
    }
}

/// Legendre polynomials and their derivatives at `t`, degrees `0..=d`.
fn legendre(d: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![1.0; d + 1];
    let mut dp = vec![0.0; d + 1];
    if d >= 1 {
        p[1] = t;
        dp[1] = 1.0;
    }
    for k in 1..d {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
    }
    (p, dp)
}

/// Power-basis coefficients of `P_k(a x + b)` in `x`.
fn legendre_in_x(k: usize, a: f64, b: f64) -> Vec<f64> {
    // P_k in powers of t via the recurrence.
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 1.0];
    let pk = match k {
        0 => prev.clone(),
        _ => {
            for j in 1..k {
                let jf = j as f64;
                let mut next = vec![0.0; j + 2];
                for (i, c) in cur.iter().enumerate() {
                    next[i + 1] += (2.0 * jf + 1.0) * c / (jf + 1.0);
                }
                for (i, c) in prev.iter().enumerate() {
                    next[i] -= jf * c / (jf + 1.0);
                }
                prev = std::mem::replace(&mut cur, next);
            }
            cur
        }
    };
    // Substitute t = a x + b.
    let mut out = vec![0.0; pk.len()];
    let mut power = vec![1.0];
    for c in &pk {
        for (i, q) in power.iter().enumerate() {
            out[i] += c * q;
        }
        let mut next = vec![0.0; power.len() + 1];
        for (i, q) in power.iter().enumerate() {
            next[i] += b * q;
            next[i + 1] += a * q;
        }
        power = next;
    }
    out
}

/// Fits `Σ c_e y^e` with `d/dt Σ c_e y^e ≈ 0` on every recorded state.
///
/// Each variable is mapped affinely onto `[-1, 1]` over the data and the
/// basis is replaced by products of Legendre polynomials before the SVD;
/// columns are scaled to unit norm. Directions with
/// `σ / σ_max ≤ kernel_tol` form the reported kernel.
pub fn fit_first_integral(
    sys: &OdeSystem,
    trajectories: &[Trajectory],
    basis: &MonomialBasis,
    kernel_tol: f64,
) -> Result<IntegralFit> {
    basis.validate(sys.dim())?;
    let states: Vec<&Vec<f64>> = trajectories.iter().flat_map(|t| &t.states).collect();
    let m = basis.len();
    if states.len() < m {
        return Err(GeomError::RankDeficientBasis(format!(
            "{} samples for {m} basis functions",
            states.len()
        )));
    }
    let k = basis.vars.len();
    let max_deg: Vec<usize> = (0..k)
        .map(|i| basis.exponents.iter().map(|e| e[i] as usize).max().unwrap_or(0))
        .collect();
    // t = a x + b
    let affine: Vec<(f64, f64)> = basis
        .vars
        .iter()
        .map(|&v| {
            let lo = states.iter().map(|y| y[v]).fold(f64::INFINITY, f64::min);
            let hi = states.iter().map(|y| y[v]).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
                (1.0, -0.5 * (lo + hi))
            } else {
                (2.0 / (hi - lo), -(lo + hi) / (hi - lo))
            }
        })
        .collect();

    let mut mat = DMatrix::zeros(states.len(), m);
    for (r, y) in states.iter().enumerate() {
        let ydot = sys.rhs(y)?;
        let tables: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
            .map(|i| {
                let (a, b) = affine[i];
                legendre(max_deg[i], a * y[basis.vars[i]] + b)
            })
            .collect();
        for (c, e) in basis.exponents.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..k {
                if e[i] == 0 {
                    continue;
                }
                let mut term = tables[i].1[e[i] as usize] * affine[i].0 * ydot[basis.vars[i]];
                for j in 0..k {
                    if j != i {
                        term *= tables[j].0[e[j] as usize];
                    }
                }
                acc += term;
            }
            mat[(r, c)] = acc;
        }
    }
    let norms: Vec<f64> = (0..m).map(|c| mat.column(c).norm()).collect();
    for (c, n) in norms.iter().enumerate() {
        if *n > 0.0 {
            mat.column_mut(c).scale_mut(1.0 / n);
        }
    }

    let r = mat.qr().r();
    let svd = r.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(GeomError::RankDeficientBasis(
            "every basis function is constant along the data".into(),
        ));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));

    let conversion = legendre_to_monomial(basis, &affine);
    let to_monomial = |row: usize| -> Vec<f64> {
        let ell: Vec<f64> = (0..m)
            .map(|c| {
                let w = vt[(row, c)];
                if norms[c] > 0.0 {
                    w / norms[c]
                } else {
                    w
                }
            })
            .collect();
        let mono = &conversion * DVector::from_vec(ell);
        let n = mono.norm();
        let mut v: Vec<f64> = mono.iter().map(|x| x / n).collect();
        // Deterministic sign: largest component positive.
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };

    let spectrum: Vec<f64> = order.iter().map(|i| svd.singular_values[*i] / smax).collect();
    let kernel = order
        .iter()
        .zip(&spectrum)
        .filter(|(_, s)| **s <= kernel_tol)
        .map(|(i, _)| to_monomial(*i))
        .collect();
    Ok(IntegralFit {
        coefficients: to_monomial(order[0]),
        normalized_residual: spectrum[0],
        spectrum,
        kernel,
        rows: states.len(),
    })
}

/// Matrix taking Legendre-product coefficients to monomial coefficients,
/// dropping the constant term.
fn legendre_to_monomial(basis: &MonomialBasis, affine: &[(f64, f64)]) -> DMatrix<f64> {
    let m = basis.len();
    let mut out = DMatrix::zeros(m, m);
    for (c, e) in basis.exponents.iter().enumerate() {
        let factors: Vec<Vec<f64>> = e
            .iter()
            .zip(affine)
            .map(|(d, (a, b))| legendre_in_x(*d as usize, *a, *b))
            .collect();
        let mut poly: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        poly.insert(vec![0; e.len()], 1.0);
        for (i, f) in factors.iter().enumerate() {
            let mut next = BTreeMap::new();
            for (mono, coef) in &poly {
                for (p, fc) in f.iter().enumerate() {
                    if *fc == 0.0 {
                        continue;
                    }
                    let mut key = mono.clone();
                    key[i] += p as u32;
                    *next.entry(key).or_insert(0.0) += coef * fc;
                }
            }
            poly = next;
        }
        for (mono, coef) in poly {
            if let Some(r) = basis.index_of(&mono) {
                out[(r, c)] += coef;
            }
        }
    }
    out
}

//! Invariant connections on a Lie group, expressed in a frame of
//! left-invariant fields with constant structure constants.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::frobenius::{classify_pointwise, commutativity_residual_raw, Classification, Classified, PointwiseData};
use crate::manifold::Tensor3;

/// Tolerance for all frame computations; everything is constant arithmetic.
pub const LIE_TOL: f64 = 1e-12;

/// Structure constants `[E_i, E_j] = c^k_ij E_k` with an inner product `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    c: Tensor3,
    h: DMatrix<f64>,
}

impl LieAlgebra {
    pub fn new(c: Tensor3, h: DMatrix<f64>) -> Result<Self> {
        let n = c.dim();
        if h.nrows() != n || h.ncols() != n {
            return Err(GeomError::InvalidAlgebra(format!("inner product must be {n}x{n}")));
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if c[(k, i, j)] != -c[(k, j, i)] {
                        return Err(GeomError::InvalidAlgebra(format!(
                            "c^{k}_{i}{j} is not antisymmetric (0-based indices)"
                        )));
                    }
                }
            }
        }
        let jacobi = jacobi_residual(&c);
        if jacobi > LIE_TOL * (1.0 + c.max_abs().powi(2)) {
            return Err(GeomError::InvalidAlgebra(format!(
                "Jacobi identity fails by {jacobi:e}"
            )));
        }
        if (&h - h.transpose()).amax() > 0.0 || h.clone().cholesky().is_none() {
            return Err(GeomError::InvalidAlgebra(
                "inner product must be symmetric positive definite".into(),
            ));
        }
        Ok(LieAlgebra { c, h })
    }

    /// Completes sparse entries `(i, j, k, value)`, meaning `c^k_ij = value`
    /// with `i < j` (0-based), by antisymmetry. `h` defaults to the identity.
    pub fn from_brackets(n: usize, entries: &[(usize, usize, usize, f64)], h: Option<DMatrix<f64>>) -> Result<Self> {
        let mut c = Tensor3::zeros(n);
        for &(i, j, k, v) in entries {
            if i >= j || j >= n || k >= n {
                return Err(GeomError::InvalidAlgebra(format!(
                    "bracket entry ({i}, {j}, {k}) needs i < j < {n} and k < {n}"
                )));
            }
            c[(k, i, j)] = v;
            c[(k, j, i)] = -v;
        }
        LieAlgebra::new(c, h.unwrap_or_else(|| DMatrix::identity(n, n)))
    }

    pub fn abelian(n: usize) -> Self {
        LieAlgebra::from_brackets(n, &[], None).expect("valid")
    }

    /// `so(3)` with `c^k_ij = ε_ijk`.
    pub fn so3() -> Self {
        LieAlgebra::from_brackets(3, &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (0, 2, 1, -1.0)], None).expect("valid")
    }

    /// The affine algebra `[E1, E2] = E2`.
    pub fn affine2d() -> Self {
        LieAlgebra::from_brackets(2, &[(0, 1, 1, 1.0)], None).expect("valid")
    }

    /// The Heisenberg algebra `[E1, E2] = E3`.
    pub fn heisenberg() -> Self {
        LieAlgebra::from_brackets(3, &[(0, 1, 2, 1.0)], None).expect("valid")
    }

    /// The same algebra in the frame `F_a = Σ_k M_ka E_k`.
    pub fn change_basis(&self, m: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim();
        let minv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| GeomError::InvalidAlgebra("basis change is singular".into()))?;
        let mut c = Tensor3::zeros(n);
        for d in 0..n {
            for a in 0..n {
                for b in a + 1..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                s += minv[(d, k)] * self.c[(k, i, j)] * m[(i, a)] * m[(j, b)];
                            }
                        }
                    }
                    c[(d, a, b)] = s;
                    c[(d, b, a)] = -s;
                }
            }
        }
        let h = m.transpose() * &self.h * m;
        LieAlgebra::new(c, (&h + h.transpose()) * 0.5)
    }

    pub fn scaled(&self, s: f64) -> Self {
        LieAlgebra {
            c: self.c.map(|x| s * x),
            h: self.h.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    pub fn structure(&self) -> &Tensor3 {
        &self.c
    }

    pub fn inner_product(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn is_abelian(&self) -> bool {
        self.c.max_abs() == 0.0
    }

    /// `c_ijk = h([E_i,E_j],E_k)`.
    pub fn lowered(&self) -> Tensor3 {
        let n = self.dim();
        Tensor3::from_fn(n, |i, j, k| (0..n).map(|m| self.c[(m, i, j)] * self.h[(m, k)]).sum())
    }

    /// Raises the last slot: `T^m_ij = h^{mk} L_ijk`.
    fn raise(&self, low: &Tensor3) -> Tensor3 {
        let n = self.dim();
        let hinv = self.h.clone().cholesky().expect("validated").inverse();
        Tensor3::from_fn(n, |m, i, j| (0..n).map(|k| hinv[(m, k)] * low[(i, j, k)]).sum())
    }
}

/// `max_{i,j,k,l} |Σ_m (c^m_ij c^l_mk + c^m_jk c^l_mi + c^m_ki c^l_mj)|`.
pub fn jacobi_residual(c: &Tensor3) -> f64 {
    let n = c.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let s: f64 = (0..n)
                        .map(|m| {
                            c[(m, i, j)] * c[(l, m, k)] + c[(m, j, k)] * c[(l, m, i)] + c[(m, k, i)] * c[(l, m, j)]
                        })
                        .sum();
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}

/// Frame coefficients of the three Cartan–Schouten connections.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanSchouten {
    /// `∇̄`, coefficients 0.
    pub minus: Tensor3,
    /// `∇⁺`, coefficients `c`.
    pub plus: Tensor3,
    /// `∇°`, coefficients `½c`.
    pub zero: Tensor3,
}

pub fn cartan_schouten(l: &LieAlgebra) -> CartanSchouten {
    CartanSchouten {
        minus: Tensor3::zeros(l.dim()),
        plus: l.c.clone(),
        zero: l.c.map(|x| 0.5 * x),
    }
}

/// Frame torsion `T^k_ij = Γ^k_ij - Γ^k_ji - c^k_ij`.
pub fn frame_torsion(gamma: &Tensor3, l: &LieAlgebra) -> Tensor3 {
    Tensor3::from_fn(l.dim(), |k, i, j| gamma[(k, i, j)] - gamma[(k, j, i)] - l.c[(k, i, j)])
}

/// Levi-Civita coefficients of `h` from the Koszul formula,
/// `2h(∇_{E_i}E_j, E_k) = c_ijk - c_jki + c_kij`.
pub fn levi_civita_frame(l: &LieAlgebra) -> Tensor3 {
    let c = l.lowered();
    let low = Tensor3::from_fn(l.dim(), |i, j, k| 0.5 * (c[(i, j, k)] - c[(j, k, i)] + c[(k, i, j)]));
    l.raise(&low)
}

/// The six deformation tensors between the Cartan–Schouten connections and
/// the Levi-Civita connection.
#[derive(Debug, Clone, PartialEq)]
pub struct SixDeformations {
    /// `∇⁺ - ∇̄`
    pub a: Tensor3,
    /// `∇⁺ - ∇°`
    pub a_plus: Tensor3,
    /// `∇̄ - ∇°`
    pub a_bar: Tensor3,
    /// `∇° - ∇`
    pub a_prime: Tensor3,
    /// `∇⁺ - ∇`
    pub a_plus_prime: Tensor3,
    /// `∇̄ - ∇`
    pub a_bar_prime: Tensor3,
}

impl SixDeformations {
    pub fn named(&self) -> [(&'static str, &Tensor3); 6] {
        [
            ("A", &self.a),
            ("A+", &self.a_plus),
            ("A_bar", &self.a_bar),
            ("A'", &self.a_prime),
            ("A+'", &self.a_plus_prime),
            ("A_bar'", &self.a_bar_prime),
        ]
    }
}

pub fn six_deformations(l: &LieAlgebra) -> SixDeformations {
    let cs = cartan_schouten(l);
    let lc = levi_civita_frame(l);
    let sub = |x: &Tensor3, y: &Tensor3| x.zip_with(y, |a, b| a - b);
    SixDeformations {
        a: sub(&cs.plus, &cs.minus),
        a_plus: sub(&cs.plus, &cs.zero),
        a_bar: sub(&cs.minus, &cs.zero),
        a_prime: sub(&cs.zero, &lc),
        a_plus_prime: sub(&cs.plus, &lc),
        a_bar_prime: sub(&cs.minus, &lc),
    }
}

/// The closed forms for the deformation tensors, as stated with the
/// frame brackets. Lines 2-4 give `2h(T(E_i,E_j),E_k)` and are raised here.
#[derive(Debug, Clone, PartialEq)]
pub struct PrintedForms {
    /// `A = [·,·]`, `A⁺ = ½[·,·]`, `Ā = -½[·,·]`.
    pub a: Tensor3,
    pub a_plus: Tensor3,
    pub a_bar: Tensor3,
    /// `h(E_j,[E_i,E_k]) - h(E_k,[E_i,E_j]) + h(E_i,[E_j,E_k])`
    pub a_bar_prime: Tensor3,
    /// `h(E_i,[E_j,E_k]) + h(E_j,[E_i,E_k]) + h(E_k,[E_i,E_j])`
    pub a_plus_prime: Tensor3,
    /// `h(E_i,[E_j,E_k]) + h(E_j,[E_k,E_i])`
    pub a_prime: Tensor3,
}

pub fn printed_forms(l: &LieAlgebra) -> PrintedForms {
    let n = l.dim();
    let c = l.lowered();
    let half = |f: &dyn Fn(usize, usize, usize) -> f64| l.raise(&Tensor3::from_fn(n, |i, j, k| 0.5 * f(i, j, k)));
    PrintedForms {
        a: l.c.clone(),
        a_plus: l.c.map(|x| 0.5 * x),
        a_bar: l.c.map(|x| -0.5 * x),
        a_bar_prime: half(&|i, j, k| c[(i, k, j)] - c[(i, j, k)] + c[(j, k, i)]),
        a_plus_prime: half(&|i, j, k| c[(j, k, i)] + c[(i, k, j)] + c[(i, j, k)]),
        a_prime: half(&|i, j, k| c[(j, k, i)] + c[(k, i, j)]),
    }
}

/// Max-abs differences between the closed forms and the direct differences,
/// one value per line of the identity (line 1 covers `A`, `A⁺`, `Ā`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrintedDeviation {
    pub line1: f64,
    pub line2: f64,
    pub line3: f64,
    pub line4: f64,
}

pub fn printed_deviation(l: &LieAlgebra) -> PrintedDeviation {
    let six = six_deformations(l);
    let pf = printed_forms(l);
    let d = |x: &Tensor3, y: &Tensor3| x.zip_with(y, |a, b| a - b).max_abs();
    PrintedDeviation {
        line1: d(&six.a, &pf.a)
            .max(d(&six.a_plus, &pf.a_plus))
            .max(d(&six.a_bar, &pf.a_bar)),
        line2: d(&six.a_bar_prime, &pf.a_bar_prime),
        line3: d(&six.a_plus_prime, &pf.a_plus_prime),
        line4: d(&six.a_prime, &pf.a_prime),
    }
}

/// `max |h(E_i,[E_j,E_k]) - h(E_j,[E_k,E_i])|`.
pub fn orthogonality_residual_raw(l: &LieAlgebra) -> f64 {
    let c = l.lowered();
    let n = l.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((c[(j, k, i)] - c[(k, i, j)]).abs());
            }
        }
    }
    worst
}

/// The raw residual divided by `1 + maxabs(h) * maxabs(c)`, the same
/// scaling as the Frobenius residuals.
pub fn orthogonality_residual(l: &LieAlgebra) -> f64 {
    orthogonality_residual_raw(l) / (1.0 + l.h.amax() * l.c.max_abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LieVerdicts {
    pub tensors: Vec<(String, Classified)>,
    pub orthogonality_residual: f64,
    /// All six are at least weak exactly when the algebra is orthogonal.
    pub equivalence_holds: bool,
    /// Commutativity of `A`, `A⁺`, `Ā`, `Ā'` agrees with `c = 0`.
    pub commutativity_chain_holds: bool,
}

pub fn weak_frobenius_verdicts(l: &LieAlgebra, tol: f64) -> LieVerdicts {
    let six = six_deformations(l);
    let tensors: Vec<(String, Classified)> = six
        .named()
        .iter()
        .map(|(name, t)| {
            let d = PointwiseData::new(l.h.clone(), (*t).clone()).expect("validated inner product");
            (name.to_string(), classify_pointwise(&d, tol))
        })
        .collect();
    let orth = orthogonality_residual(l);
    let all_weak = tensors.iter().all(|(_, c)| c.classification != Classification::None);
    let abelian = l.c.max_abs() <= tol;
    let chain = [&six.a, &six.a_plus, &six.a_bar, &six.a_bar_prime].iter().all(|t| {
        let d = PointwiseData::new(l.h.clone(), (*t).clone()).expect("validated inner product");
        (commutativity_residual_raw(&d) <= tol) == abelian
    });
    LieVerdicts {
        tensors,
        orthogonality_residual: orth,
        equivalence_holds: all_weak == (orth <= tol),
        commutativity_chain_holds: chain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(i: usize, j: usize, k: usize) -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    }

    #[test]
    fn so3_matches_epsilon() {
        let l = LieAlgebra::so3();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(l.structure()[(k, i, j)], eps(i, j, k));
                }
            }
        }
        assert_eq!(orthogonality_residual(&l), 0.0);
    }

    #[test]
    fn torsions_are_exact() {
        for l in [LieAlgebra::so3(), LieAlgebra::affine2d(), LieAlgebra::heisenberg()] {
            let cs = cartan_schouten(&l);
            let c = l.structure();
            assert_eq!(
                frame_torsion(&cs.minus, &l),
                c.map(|x| -2.0 * x).zip_with(c, |a, b| a + b)
            );
            assert_eq!(frame_torsion(&cs.plus, &l), *c);
            assert_eq!(frame_torsion(&cs.zero, &l).max_abs(), 0.0);
        }
    }

    #[test]
    fn so3_levi_civita_is_half_bracket() {
        let l = LieAlgebra::so3();
        let six = six_deformations(&l);
        assert_eq!(six.a_prime.max_abs(), 0.0);
        let dev = printed_deviation(&l);
        assert_eq!((dev.line1, dev.line2, dev.line3), (0.0, 0.0, 0.0));
        assert!(dev.line4 > 0.5);
    }

    #[test]
    fn affine_orthogonality_hand_value() {
        let l = LieAlgebra::affine2d();
        assert_eq!(l.structure()[(1, 0, 1)], 1.0);
        assert_eq!(l.structure()[(1, 1, 0)], -1.0);
        // Triple (2,1,2) gives |1 - 0| = 1; the maximum is at (2,2,1).
        let c = l.lowered();
        assert_eq!(c[(0, 1, 1)] - c[(1, 1, 0)], 1.0);
        assert_eq!(orthogonality_residual_raw(&l), 2.0);
        assert_eq!(orthogonality_residual(&l), 1.0);
        let v = weak_frobenius_verdicts(&l, LIE_TOL);
        assert!(v.equivalence_holds);
        assert!(v.tensors.iter().any(|(_, c)| c.classification == Classification::None));
    }

    #[test]
    fn rejects_jacobi_violation() {
        // [E1,E2] = E3, [E2,E3] = E3 violates Jacobi.
        let err = LieAlgebra::from_brackets(3, &[(0, 1, 2, 1.0), (1, 2, 2, 1.0), (0, 2, 0, 1.0)], None);
        assert!(matches!(err, Err(GeomError::InvalidAlgebra(_))));
    }

    #[test]
    fn basis_change_preserves_brackets() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.2, 1.0, 0.3, 0.0, -0.4, 2.0]);
        let l = LieAlgebra::so3().change_basis(&m).unwrap();
        assert!(jacobi_residual(l.structure()) < 1e-12);
        // Orthogonality is basis independent when h transforms along.
        assert!(orthogonality_residual(&l) < 1e-12);
    }
}

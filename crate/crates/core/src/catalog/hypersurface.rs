use nalgebra::{DMatrix, DVector};

use super::{expect, matrix_at, tensor3_at};
use crate::error::{GeomError, Result};
use crate::expr::{sum_jets, Jet2};
use crate::manifold::{
    covariant_derivative_02, deformation, differential, levi_civita, Chart, Metric, Order, Signature, Tensor3,
    TensorField, Valence,
};

/// A hypersurface `f: U ⊂ R^n -> R^{n+1}` with its fundamental forms.
#[derive(Debug, Clone)]
pub struct Hypersurface {
    pub chart: Chart,
    /// Induced metric `g_ij = <∂_i f, ∂_j f>`.
    pub g: Metric,
    /// Second fundamental form `b_ij = <∂_i ∂_j f, N>`.
    pub b: TensorField,
    components: Vec<TensorField>,
    differentials: Vec<TensorField>,
}

fn jacobian(differentials: &[TensorField], p: &[f64]) -> Result<DMatrix<f64>> {
    let n = p.len();
    let mut jac = DMatrix::zeros(n + 1, n);
    for (a, df) in differentials.iter().enumerate() {
        for (i, v) in df.values(p)?.into_iter().enumerate() {
            jac[(a, i)] = v;
        }
    }
    Ok(jac)
}

/// Unit normal with `det[∂_1 f ... ∂_n f N] > 0`, from the cofactors of
/// the Jacobian.
fn unit_normal(jac: &DMatrix<f64>, p: &[f64]) -> Result<DVector<f64>> {
    let n = jac.ncols();
    let mut normal = DVector::zeros(n + 1);
    for a in 0..=n {
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n + 1, n)).copy_from(jac);
        m[(a, n)] = 1.0;
        normal[a] = m.determinant();
    }
    let scale = jac.amax().max(1.0).powi(n as i32);
    let len = normal.norm();
    if !(len > 1e-10 * scale) {
        return Err(GeomError::DegenerateImmersion(p.to_vec()));
    }
    Ok(normal / len)
}

/// Builds `g` and `b` for the immersion with components `exprs` (n + 1
/// expressions in the n chart coordinates).
pub fn hypersurface_forms<S: AsRef<str>>(exprs: &[S], chart: &Chart) -> Result<Hypersurface> {
    let n = chart.dim();
    if exprs.len() != n + 1 {
        return Err(GeomError::ComponentCount {
            expected: n + 1,
            got: exprs.len(),
        });
    }
    let components = exprs
        .iter()
        .map(|e| TensorField::scalar_expr(n, e.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let differentials = components.iter().map(differential).collect::<Result<Vec<_>>>()?;
    for p in chart.points() {
        unit_normal(&jacobian(&differentials, &p)?, &p)?;
    }
    let g_field = TensorField::algebraic(Valence::BILINEAR, n, differentials.clone(), move |x| {
        let d = x[0][0].dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let terms: Vec<Jet2> = x.iter().map(|df| &df[i] * &df[j]).collect();
                out.push(sum_jets(d, &terms));
            }
        }
        Ok(out)
    })?;
    let g = Metric::riemannian(g_field, chart)?;
    let (comps, diffs) = (components.clone(), differentials.clone());
    let b = TensorField::derived(Valence::BILINEAR, n, move |p| {
        let normal = unit_normal(&jacobian(&diffs, p)?, p)?;
        let mut out = vec![0.0; n * n];
        for (a, f) in comps.iter().enumerate() {
            let h = &f.jets(p, Order::Second)?[0];
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += h.hessian(i, j) * normal[a];
                }
            }
        }
        Ok(out)
    });
    Ok(Hypersurface {
        chart: chart.clone(),
        g,
        b,
        components,
        differentials,
    })
}

impl Hypersurface {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn components(&self) -> &[TensorField] {
        &self.components
    }

    pub fn normal(&self, p: &[f64]) -> Result<DVector<f64>> {
        unit_normal(&jacobian(&self.differentials, p)?, p)
    }

    /// `b` as an invertible (possibly indefinite) metric.
    pub fn second_form_metric(&self) -> Result<Metric> {
        Metric::new(self.b.clone(), &self.chart, Signature::Indefinite).map_err(|e| match e {
            GeomError::SingularMetric(p) => GeomError::DegenerateSecondForm(p),
            other => other,
        })
    }

    /// Mean of the eigenvalues of `g^{-1} b`; for an umbilic hypersurface
    /// this is the `σ` in `b = σ g`.
    pub fn umbilic_factor(&self, p: &[f64]) -> Result<f64> {
        let s = self.g.inverse(p)? * matrix_at(&self.b, p)?;
        Ok(s.trace() / self.dim() as f64)
    }

    /// Max-abs of `b - σ g` at `p`, with `σ` from [`Self::umbilic_factor`].
    pub fn umbilic_residual(&self, p: &[f64]) -> Result<f64> {
        let sigma = self.umbilic_factor(p)?;
        Ok((matrix_at(&self.b, p)? - self.g.matrix(p)? * sigma).amax())
    }

    /// `(∇b)_ijk` for the Levi-Civita connection of `g`.
    pub fn nabla_b(&self) -> Result<TensorField> {
        covariant_derivative_02(&levi_civita(&self.g)?, &self.b)
    }

    /// `A^l_ij = s (b^{-1})^{lk} (∇b)_ijk` with `s = 1/2`, the sign that agrees
    /// with `LC(b) - LC(g)` under Codazzi.
    pub fn a_field(&self) -> Result<TensorField> {
        self.a_with_factor(0.5)
    }

    /// The same contraction with factor `-1/2`.
    pub fn a_printed(&self) -> Result<TensorField> {
        self.a_with_factor(-0.5)
    }

    fn a_with_factor(&self, s: f64) -> Result<TensorField> {
        let b_metric = self.second_form_metric()?;
        let nb = self.nabla_b()?;
        let n = self.dim();
        Ok(TensorField::derived(Valence::ALGEBRA, n, move |p| {
            let binv = b_metric
                .inverse(p)
                .map_err(|_| GeomError::DegenerateSecondForm(p.to_vec()))?;
            let d = tensor3_at(&nb, p)?;
            let a = Tensor3::from_fn(n, |l, i, j| {
                s * (0..n).map(|k| binv[(l, k)] * d[(i, j, k)]).sum::<f64>()
            });
            Ok(a.into_vec())
        }))
    }

    /// `LC(b) - LC(g)`, the deformation computed from connections.
    pub fn a_connection_difference(&self) -> Result<TensorField> {
        let b_metric = self.second_form_metric()?;
        deformation(&levi_civita(&self.g)?, &levi_civita(&b_metric)?)
    }

    /// `max |(∇b)_ijk - (∇b)_jki|` at `p`.
    pub fn codazzi_residual(&self, nabla_b: &TensorField, p: &[f64]) -> Result<f64> {
        expect(nabla_b, Valence::TRILINEAR, "∇b")?;
        let d = tensor3_at(nabla_b, p)?;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = crate::frobenius::nan_max(worst, (d[(i, j, k)] - d[(j, k, i)]).abs());
                }
            }
        }
        Ok(worst)
    }

    /// The shape operator `J = g^{-1} b`.
    pub fn shape_operator(&self) -> Result<TensorField> {
        let g = self.g.clone();
        let b = self.b.clone();
        let n = self.dim();
        Ok(TensorField::derived(Valence::ENDO, n, move |p| {
            let j = g.inverse(p)? * matrix_at(&b, p)?;
            Ok(j.transpose().as_slice().to_vec())
        }))
    }
}

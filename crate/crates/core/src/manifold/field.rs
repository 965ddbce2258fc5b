//! Tensor fields over a chart.
//!
//! A field is a row-major array of `n^(r+s)` scalar component functions,
//! upper indices first. Components come from a [`ComponentSource`], which
//! evaluates values and, on request, second-order jets. Expression and
//! algebraic sources differentiate exactly; derived sources fall back on
//! central differences with step [`FD_STEP`].

use std::fmt;
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::expr::{CompiledExpr, Jet2};

/// Step for central finite differences.
pub const FD_STEP: f64 = 1e-4;

/// Which derivatives a jet evaluation must carry. Entries beyond the
/// requested order are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Valence {
    pub upper: usize,
    pub lower: usize,
}

impl Valence {
    pub const SCALAR: Valence = Valence::new(0, 0);
    pub const VECTOR: Valence = Valence::new(1, 0);
    pub const COVECTOR: Valence = Valence::new(0, 1);
    pub const ENDO: Valence = Valence::new(1, 1);
    pub const BILINEAR: Valence = Valence::new(0, 2);
    pub const ALGEBRA: Valence = Valence::new(1, 2);
    pub const TRILINEAR: Valence = Valence::new(0, 3);
    pub const CURVATURE: Valence = Valence::new(1, 3);

    pub const fn new(upper: usize, lower: usize) -> Self {
        Valence { upper, lower }
    }

    pub fn rank(self) -> usize {
        self.upper + self.lower
    }

    pub fn len(self, dim: usize) -> usize {
        dim.pow(self.rank() as u32)
    }
}

impl fmt::Display for Valence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.upper, self.lower)
    }
}

pub trait ComponentSource: Send + Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn values(&self, p: &[f64]) -> Result<Vec<f64>>;

    fn jets(&self, p: &[f64], order: Order) -> Result<Vec<Jet2>> {
        fd_jets(p, order, &|q| self.values(q))
    }
}

/// Jets of a vector-valued function by central differences of its values.
pub fn fd_jets(p: &[f64], order: Order, f: &dyn Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<Jet2>> {
    let n = p.len();
    let h = FD_STEP;
    let f0 = f(p)?;
    if order == Order::Value {
        return Ok(f0.into_iter().map(|v| Jet2::constant(n, v)).collect());
    }
    let shifted = |moves: &[(usize, f64)]| {
        let mut q = p.to_vec();
        for (i, s) in moves {
            q[*i] += s * h;
        }
        f(&q)
    };
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for i in 0..n {
        plus.push(shifted(&[(i, 1.0)])?);
        minus.push(shifted(&[(i, -1.0)])?);
    }
    let mut mixed = vec![vec![Vec::new(); n]; n];
    if order == Order::Second {
        for i in 0..n {
            for j in i + 1..n {
                let pp = shifted(&[(i, 1.0), (j, 1.0)])?;
                let pm = shifted(&[(i, 1.0), (j, -1.0)])?;
                let mp = shifted(&[(i, -1.0), (j, 1.0)])?;
                let mm = shifted(&[(i, -1.0), (j, -1.0)])?;
                mixed[i][j] = (0..f0.len())
                    .map(|c| (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * h * h))
                    .collect();
            }
        }
    }
    Ok((0..f0.len())
        .map(|c| {
            let grad = (0..n).map(|i| (plus[i][c] - minus[i][c]) / (2.0 * h)).collect();
            Jet2::from_parts(f0[c], grad, |i, j| match order {
                Order::Second if i == j => (plus[i][c] - 2.0 * f0[c] + minus[i][c]) / (h * h),
                Order::Second => mixed[i][j][c],
                _ => 0.0,
            })
        })
        .collect())
}

/// Second-order jets from exact first-order jets, differencing the gradients.
pub fn fd_jets_from_first(p: &[f64], first: &dyn Fn(&[f64]) -> Result<Vec<Jet2>>) -> Result<Vec<Jet2>> {
    let n = p.len();
    let h = FD_STEP;
    let center = first(p)?;
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for j in 0..n {
        let mut q = p.to_vec();
        q[j] += h;
        plus.push(first(&q)?);
        q[j] -= 2.0 * h;
        minus.push(first(&q)?);
    }
    Ok(center
        .iter()
        .enumerate()
        .map(|(c, jet)| {
            let d = |i: usize, j: usize| (plus[j][c].partial(i) - minus[j][c].partial(i)) / (2.0 * h);
            Jet2::from_parts(jet.value(), jet.gradient().to_vec(), |i, j| 0.5 * (d(i, j) + d(j, i)))
        })
        .collect())
}

struct ExprSource {
    dim: usize,
    exprs: Vec<CompiledExpr>,
}

impl ComponentSource for ExprSource {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.exprs.len()
    }
    fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.exprs.iter().map(|e| Ok(e.eval(p)?)).collect()
    }
    fn jets(&self, p: &[f64], order: Order) -> Result<Vec<Jet2>> {
        if order == Order::Value {
            return Ok(self
                .values(p)?
                .into_iter()
                .map(|v| Jet2::constant(self.dim, v))
                .collect());
        }
        self.exprs.iter().map(|e| Ok(e.eval_jet2(p)?)).collect()
    }
}

struct ConstSource {
    dim: usize,
    values: Vec<f64>,
}

impl ComponentSource for ConstSource {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.values.len()
    }
    fn values(&self, _p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.values.clone())
    }
    fn jets(&self, _p: &[f64], _order: Order) -> Result<Vec<Jet2>> {
        Ok(self.values.iter().map(|v| Jet2::constant(self.dim, *v)).collect())
    }
}

type JetMap = dyn Fn(&[Vec<Jet2>]) -> Result<Vec<Jet2>> + Send + Sync;
type ValueMap = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// Pointwise algebraic combination of other fields, so jets compose exactly.
struct AlgebraicSource {
    dim: usize,
    len: usize,
    inputs: Vec<TensorField>,
    f: Arc<JetMap>,
}

impl ComponentSource for AlgebraicSource {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.len
    }
    fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jets(p, Order::Value)?.iter().map(Jet2::value).collect())
    }
    fn jets(&self, p: &[f64], order: Order) -> Result<Vec<Jet2>> {
        let inputs = self
            .inputs
            .iter()
            .map(|t| t.jets(p, order))
            .collect::<Result<Vec<_>>>()?;
        let out = (self.f)(&inputs)?;
        if out.len() != self.len {
            return Err(GeomError::ComponentCount {
                expected: self.len,
                got: out.len(),
            });
        }
        Ok(out)
    }
}

/// Values from an arbitrary pointwise rule; jets by central differences.
struct DerivedSource {
    dim: usize,
    len: usize,
    f: Arc<ValueMap>,
}

impl ComponentSource for DerivedSource {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.len
    }
    fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        let out = (self.f)(p)?;
        if out.len() != self.len {
            return Err(GeomError::ComponentCount {
                expected: self.len,
                got: out.len(),
            });
        }
        Ok(out)
    }
}

/// Row-major index of a multi-index in an `n`-dimensional tensor.
pub fn flat_index(n: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, i| acc * n + i)
}

#[derive(Clone)]
pub struct TensorField {
    valence: Valence,
    src: Arc<dyn ComponentSource>,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorField")
            .field("valence", &self.valence)
            .field("dim", &self.dim())
            .finish_non_exhaustive()
    }
}

impl TensorField {
    pub fn from_source(valence: Valence, src: Arc<dyn ComponentSource>) -> Result<Self> {
        let expected = valence.len(src.dim());
        if src.len() != expected {
            return Err(GeomError::ComponentCount {
                expected,
                got: src.len(),
            });
        }
        Ok(TensorField { valence, src })
    }

    pub fn from_compiled(valence: Valence, dim: usize, exprs: Vec<CompiledExpr>) -> Result<Self> {
        if exprs.iter().any(|e| e.slots() != dim) {
            return Err(GeomError::InvalidArgument(
                "component expressions must be over the chart coordinates".into(),
            ));
        }
        TensorField::from_source(valence, Arc::new(ExprSource { dim, exprs }))
    }

    /// Components given as expression strings in row-major order.
    pub fn from_exprs<S: AsRef<str>>(valence: Valence, dim: usize, exprs: &[S]) -> Result<Self> {
        let compiled = exprs
            .iter()
            .map(|s| CompiledExpr::parse(s.as_ref(), dim))
            .collect::<Result<Vec<_>, _>>()?;
        TensorField::from_compiled(valence, dim, compiled)
    }

    pub fn constant(valence: Valence, dim: usize, values: Vec<f64>) -> Result<Self> {
        TensorField::from_source(valence, Arc::new(ConstSource { dim, values }))
    }

    pub fn zero(valence: Valence, dim: usize) -> Self {
        TensorField::constant(valence, dim, vec![0.0; valence.len(dim)]).expect("length matches")
    }

    pub fn scalar_expr(dim: usize, text: &str) -> Result<Self> {
        TensorField::from_exprs(Valence::SCALAR, dim, &[text])
    }

    /// Pointwise combination of `inputs` through jet arithmetic.
    pub fn algebraic(
        valence: Valence,
        dim: usize,
        inputs: Vec<TensorField>,
        f: impl Fn(&[Vec<Jet2>]) -> Result<Vec<Jet2>> + Send + Sync + 'static,
    ) -> Result<Self> {
        if let Some(t) = inputs.iter().find(|t| t.dim() != dim) {
            return Err(GeomError::ChartMismatch(dim, t.dim()));
        }
        TensorField::from_source(
            valence,
            Arc::new(AlgebraicSource {
                dim,
                len: valence.len(dim),
                inputs,
                f: Arc::new(f),
            }),
        )
    }

    /// Field defined by pointwise values only; derivatives by finite differences.
    pub fn derived(
        valence: Valence,
        dim: usize,
        f: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        TensorField {
            valence,
            src: Arc::new(DerivedSource {
                dim,
                len: valence.len(dim),
                f: Arc::new(f),
            }),
        }
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn dim(&self) -> usize {
        self.src.dim()
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source(&self) -> &Arc<dyn ComponentSource> {
        &self.src
    }

    pub fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_point(p)?;
        self.src.values(p)
    }

    pub fn jets(&self, p: &[f64], order: Order) -> Result<Vec<Jet2>> {
        self.check_point(p)?;
        self.src.jets(p, order)
    }

    /// Component at a multi-index (upper indices first).
    pub fn component(&self, p: &[f64], idx: &[usize]) -> Result<f64> {
        Ok(self.values(p)?[flat_index(self.dim(), idx)])
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(GeomError::ChartMismatch(self.dim(), p.len()));
        }
        Ok(())
    }

    fn same_shape(&self, other: &TensorField) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(GeomError::ChartMismatch(self.dim(), other.dim()));
        }
        if self.valence != other.valence {
            return Err(GeomError::InvalidArgument(format!(
                "valence {} does not match {}",
                self.valence, other.valence
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        self.same_shape(other)?;
        TensorField::algebraic(self.valence, self.dim(), vec![self.clone(), other.clone()], |x| {
            Ok(x[0].iter().zip(&x[1]).map(|(a, b)| a + b).collect())
        })
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.same_shape(other)?;
        TensorField::algebraic(self.valence, self.dim(), vec![self.clone(), other.clone()], |x| {
            Ok(x[0].iter().zip(&x[1]).map(|(a, b)| a - b).collect())
        })
    }

    pub fn scale(&self, c: f64) -> TensorField {
        TensorField::algebraic(self.valence, self.dim(), vec![self.clone()], move |x| {
            Ok(x[0].iter().map(|a| a.scale(c)).collect())
        })
        .expect("shape preserved")
    }

    /// Multiplies every component by a scalar field.
    pub fn mul_scalar(&self, f: &TensorField) -> Result<TensorField> {
        if f.valence != Valence::SCALAR {
            return Err(GeomError::InvalidArgument("multiplier must be a scalar field".into()));
        }
        if f.dim() != self.dim() {
            return Err(GeomError::ChartMismatch(self.dim(), f.dim()));
        }
        TensorField::algebraic(self.valence, self.dim(), vec![self.clone(), f.clone()], |x| {
            Ok(x[0].iter().map(|a| a * &x[1][0]).collect())
        })
    }

    /// Maximum of `|T_..ij.. - T_..ji..|` over the last two slots at `p`.
    pub fn lower_asymmetry(&self, p: &[f64]) -> Result<f64> {
        let n = self.dim();
        if self.valence.lower < 2 {
            return Ok(0.0);
        }
        let v = self.values(p)?;
        let mut worst: f64 = 0.0;
        for chunk in v.chunks(n * n) {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((chunk[i * n + j] - chunk[j * n + i]).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Inverse of an `n x n` matrix of jets by Gauss–Jordan elimination with
/// partial pivoting. `at` names the point in the error.
pub fn invert_jets(m: &[Jet2], n: usize, at: &[f64]) -> Result<Vec<Jet2>> {
    let d = m.first().map_or(0, Jet2::dim);
    let mut a: Vec<Jet2> = m.to_vec();
    let mut inv: Vec<Jet2> = (0..n * n)
        .map(|k| Jet2::constant(d, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    let scale = m.iter().fold(0.0f64, |s, x| s.max(x.value().abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].value().abs().total_cmp(&a[s * n + col].value().abs()))
            .expect("non-empty range");
        if a[pivot * n + col].value().abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(GeomError::SingularMetric(at.to_vec()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let r = a[col * n + col].recip();
        for k in 0..n {
            a[col * n + k] = &a[col * n + k] * &r;
            inv[col * n + k] = &inv[col * n + k] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row * n + col].clone();
            for k in 0..n {
                let da = &factor * &a[col * n + k];
                let di = &factor * &inv[col * n + k];
                a[row * n + k] = &a[row * n + k] - &da;
                inv[row * n + k] = &inv[row * n + k] - &di;
            }
        }
    }
    Ok(inv)
}

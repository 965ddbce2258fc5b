//! Searching a finite-dimensional family of metrics for one that is parallel
//! with respect to a given connection.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::CompiledExpr;
use crate::manifold::{Chart, Connection, Tensor3};

/// One free coefficient: `g_ij` (and `g_ji`) gains `c · basis(x)`.
#[derive(Debug, Clone)]
pub struct AnsatzTerm {
    pub i: usize,
    pub j: usize,
    pub basis: CompiledExpr,
}

/// `g(c) = Σ_a c_a B_a`, where each `B_a` has one symmetric entry pair.
#[derive(Debug, Clone)]
pub struct MetricAnsatz {
    dim: usize,
    terms: Vec<AnsatzTerm>,
}

impl MetricAnsatz {
    pub fn new(dim: usize, terms: Vec<AnsatzTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(GeomError::InvalidArgument("empty metric ansatz".into()));
        }
        for t in &terms {
            if t.i > t.j || t.j >= dim {
                return Err(GeomError::InvalidArgument(format!(
                    "ansatz entry ({}, {}) must satisfy i <= j < {dim}",
                    t.i, t.j
                )));
            }
            if t.basis.slots() != dim {
                return Err(GeomError::ChartMismatch(dim, t.basis.slots()));
            }
        }
        Ok(MetricAnsatz { dim, terms })
    }

    /// Every entry `g_ij`, `i <= j`, a polynomial of degree `<= degree` in
    /// the listed coordinates (0-based), constants included.
    pub fn polynomial(dim: usize, vars: &[usize], degree: u32) -> Result<Self> {
        let mut monomials = vec![String::from("1")];
        let mut frontier = vec![(Vec::<usize>::new(), 0usize)];
        for _ in 0..degree {
            let mut next = Vec::new();
            for (factors, start) in &frontier {
                for (pos, v) in vars.iter().enumerate().skip(*start) {
                    let mut f = factors.clone();
                    f.push(*v);
                    monomials.push(f.iter().map(|k| format!("x{}", k + 1)).collect::<Vec<_>>().join("*"));
                    next.push((f, pos));
                }
            }
            frontier = next;
        }
        let mut terms = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                for m in &monomials {
                    terms.push(AnsatzTerm {
                        i,
                        j,
                        basis: CompiledExpr::parse(m, dim)?,
                    });
                }
            }
        }
        MetricAnsatz::new(dim, terms)
    }

    pub fn constant(dim: usize) -> Result<Self> {
        MetricAnsatz::polynomial(dim, &[], 0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[AnsatzTerm] {
        &self.terms
    }

    pub fn metric_at(&self, c: &[f64], p: &[f64]) -> Result<DMatrix<f64>> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for (t, ca) in self.terms.iter().zip(c) {
            let b = ca * t.basis.eval(p)?;
            g[(t.i, t.j)] += b;
            if t.i != t.j {
                g[(t.j, t.i)] += b;
            }
        }
        Ok(g)
    }

    /// Coefficients reproducing the identity with constant basis functions,
    /// if the ansatz contains them.
    pub fn identity_pattern(&self) -> Option<Vec<f64>> {
        let mut c = vec![0.0; self.len()];
        for d in 0..self.dim {
            let k = self.terms.iter().position(|t| {
                t.i == d && t.j == d && t.basis.is_constant() && t.basis.eval(&vec![0.0; self.dim]).ok() == Some(1.0)
            })?;
            c[k] = 1.0;
        }
        Some(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// A positive definite member of the nullspace was found.
    Kernel,
    /// Barrier minimisation over `{c : g(c) ⪰ I}`.
    Barrier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricFit {
    pub coefficients: Vec<f64>,
    /// `RMS(M c) / min_p λ_min(g_p(c))`.
    pub residual: f64,
    /// Certified lower bound on the residual over `{g ⪰ I}` (barrier only).
    pub residual_lower_bound: Option<f64>,
    /// `σ_min / σ_max` of the compatibility matrix.
    pub sigma_ratio: f64,
    pub kernel_dim: usize,
    pub positive_definite: bool,
    pub method: FitMethod,
    pub rows: usize,
}

struct System {
    m: DMatrix<f64>,
    /// Per sample point, per coefficient: the basis matrix `B_a(p)`.
    blocks: Vec<Vec<DMatrix<f64>>>,
}

fn assemble(conn: &Connection, ansatz: &MetricAnsatz, points: &[Vec<f64>]) -> Result<System> {
    let n = ansatz.dim();
    let na = ansatz.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut m = DMatrix::zeros(points.len() * n * pairs.len(), na);
    let mut blocks = Vec::with_capacity(points.len());
    for (pi, p) in points.iter().enumerate() {
        let gamma: Tensor3 = conn.coefficients(p)?;
        let mut bp = Vec::with_capacity(na);
        for (a, t) in ansatz.terms().iter().enumerate() {
            let jet = t.basis.eval_jet2(p)?;
            let mut b = DMatrix::zeros(n, n);
            b[(t.i, t.j)] = jet.value();
            b[(t.j, t.i)] = jet.value();
            for k in 0..n {
                for (q, &(i, j)) in pairs.iter().enumerate() {
                    let mut db = 0.0;
                    if (i, j) == (t.i, t.j) {
                        db = jet.partial(k);
                    }
                    let mut conn_term = 0.0;
                    for l in 0..n {
                        conn_term += gamma[(l, k, i)] * b[(l, j)] + gamma[(l, k, j)] * b[(i, l)];
                    }
                    m[((pi * n + k) * pairs.len() + q, a)] = db - conn_term;
                }
            }
            bp.push(b);
        }
        blocks.push(bp);
    }
    Ok(System { m, blocks })
}

fn metric(blocks: &[DMatrix<f64>], c: &[f64]) -> DMatrix<f64> {
    let n = blocks[0].nrows();
    blocks
        .iter()
        .zip(c)
        .fold(DMatrix::zeros(n, n), |acc, (b, ca)| acc + b * *ca)
}

fn min_eig(g: &DMatrix<f64>) -> f64 {
    g.clone().symmetric_eigen().eigenvalues.min()
}

fn rms(m: &DMatrix<f64>, c: &[f64]) -> f64 {
    let r = m * DVector::from_column_slice(c);
    r.norm() / (m.nrows() as f64).sqrt()
}

/// Fits the ansatz to `∇g = 0` at the chart samples.
///
/// The compatibility equations are linear in the coefficients. A positive
/// definite element of the numerical nullspace is used when one exists;
/// otherwise the normalised residual is minimised over `g(c) ⪰ I` with a
/// log-barrier Newton method, which also yields a lower bound.
pub fn metric_ansatz_fit(conn: &Connection, ansatz: &MetricAnsatz, chart: &Chart) -> Result<MetricFit> {
    if conn.dim() != ansatz.dim() || chart.dim() != ansatz.dim() {
        return Err(GeomError::ChartMismatch(conn.dim(), ansatz.dim()));
    }
    let points = chart.points();
    let sys = assemble(conn, ansatz, &points)?;
    let na = ansatz.len();
    if sys.m.nrows() < na {
        return Err(GeomError::RankDeficientBasis(format!(
            "{} equations for {na} coefficients; raise the sample count",
            sys.m.nrows()
        )));
    }
    let svd = sys.m.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("requested");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let sigma_ratio = if smax > 0.0 { sv.min() / smax } else { 0.0 };

    let kernel: Vec<DVector<f64>> = (0..sv.len())
        .filter(|i| sv[*i] <= 1e-10 * smax.max(1.0))
        .map(|i| vt.row(i).transpose())
        .collect();
    let kernel_dim = kernel.len();

    let worst_eig = |c: &[f64]| -> f64 {
        sys.blocks
            .iter()
            .map(|b| min_eig(&metric(b, c)))
            .fold(f64::INFINITY, f64::min)
    };

    // Candidates from the kernel: each basis vector with both signs, plus
    // the projection of the identity pattern.
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for v in &kernel {
        candidates.push(v.iter().copied().collect());
        candidates.push(v.iter().map(|x| -x).collect());
    }
    if let Some(id) = ansatz.identity_pattern() {
        if !kernel.is_empty() {
            let idv = DVector::from_vec(id);
            let proj = kernel.iter().fold(DVector::zeros(na), |acc, v| acc + v * v.dot(&idv));
            candidates.push(proj.iter().copied().collect());
        }
    }
    let best = candidates
        .into_iter()
        .filter(|c| c.iter().any(|x| *x != 0.0))
        .map(|c| {
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c: Vec<f64> = c.iter().map(|x| x / norm).collect();
            let e = worst_eig(&c);
            (c, e)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((c, lam)) = best {
        if lam > 0.0 {
            return Ok(MetricFit {
                residual: rms(&sys.m, &c) / lam,
                coefficients: c,
                residual_lower_bound: None,
                sigma_ratio,
                kernel_dim,
                positive_definite: true,
                method: FitMethod::Kernel,
                rows: sys.m.nrows(),
            });
        }
    }

    let id = ansatz.identity_pattern().ok_or_else(|| {
        GeomError::InvalidArgument("ansatz lacks constant diagonal terms for the barrier start".into())
    })?;
    let (c, f, gap) = barrier(&sys, id.iter().map(|x| 2.0 * x).collect())?;
    let lam = worst_eig(&c);
    Ok(MetricFit {
        residual: rms(&sys.m, &c) / lam,
        residual_lower_bound: Some((f - gap).max(0.0).sqrt()),
        coefficients: c,
        sigma_ratio,
        kernel_dim,
        positive_definite: lam > 0.0,
        method: FitMethod::Barrier,
        rows: sys.m.nrows(),
    })
}

/// Upper bound on the metric during the barrier search. Without it a
/// degenerate parallel tensor lets the barrier run off to infinity.
pub const BARRIER_CEILING: f64 = 1e6;

/// Minimises `f(c) = ‖M c‖² / R` subject to `I ≺ g_p(c) ≺ κ I` at every
/// sample. Returns the minimiser, `f` there and the duality gap bound.
fn barrier(sys: &System, c0: Vec<f64>) -> Result<(Vec<f64>, f64, f64)> {
    let na = c0.len();
    let rows = sys.m.nrows() as f64;
    let q = sys.m.transpose() * &sys.m * (2.0 / rows);
    let n = sys.blocks[0][0].nrows();
    let constraints = (2 * sys.blocks.len() * n) as f64;
    let f_of = |c: &DVector<f64>| (&sys.m * c).norm_squared() / rows;
    let eye = DMatrix::<f64>::identity(n, n);

    // Lower and upper slacks at every sample, with the sign each enters
    // the derivative of `g`.
    let slacks = |c: &DVector<f64>| -> Vec<(DMatrix<f64>, f64)> {
        let cs = c.as_slice();
        sys.blocks
            .iter()
            .flat_map(|b| {
                let g = metric(b, cs);
                [(&g - &eye, 1.0), (&eye * BARRIER_CEILING - &g, -1.0)]
            })
            .collect()
    };
    let log_det_sum = |c: &DVector<f64>| -> Option<f64> {
        slacks(c).into_iter().try_fold(0.0, |acc, (w, _)| {
            let ch = w.cholesky()?;
            Some(acc + 2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
        })
    };

    let mut c = DVector::from_vec(c0);
    if log_det_sum(&c).is_none() {
        return Err(GeomError::InvalidArgument("barrier start is infeasible".into()));
    }
    let mut t = 1.0;
    loop {
        for _ in 0..100 {
            let mut grad = &q * &c * t;
            let mut hess = &q * t;
            for (block, (w, sign)) in sys.blocks.iter().flat_map(|b| [b, b]).zip(slacks(&c)) {
                let wi = w.cholesky().expect("iterate stays feasible").inverse();
                let wb: Vec<DMatrix<f64>> = block.iter().map(|ba| &wi * ba).collect();
                for a in 0..na {
                    grad[a] -= sign * wb[a].trace();
                    for bb in a..na {
                        let h = (&wb[a] * &wb[bb]).trace();
                        hess[(a, bb)] += h;
                        if bb != a {
                            hess[(bb, a)] += h;
                        }
                    }
                }
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    let ridge = 1e-12 * hess.diagonal().amax().max(1.0);
                    (hess + DMatrix::identity(na, na) * ridge)
                        .cholesky()
                        .ok_or_else(|| GeomError::InvalidArgument("barrier Hessian is singular".into()))?
                        .solve(&(-&grad))
                }
            };
            let decrement = -grad.dot(&step);
            if decrement < 1e-14 {
                break;
            }
            let phi = |c: &DVector<f64>| log_det_sum(c).map(|ld| t * f_of(c) - ld);
            let phi0 = phi(&c).expect("feasible");
            let mut alpha = 1.0;
            while alpha >= 1e-12 {
                let trial = &c + &step * alpha;
                if matches!(phi(&trial), Some(v) if v <= phi0 - 0.25 * alpha * decrement) {
                    c = trial;
                    break;
                }
                alpha *= 0.5;
            }
            if alpha < 1e-12 {
                break;
            }
        }
        let f = f_of(&c);
        let gap = constraints / t;
        if gap <= 1e-8 * f.max(1e-12) || t > 1e14 {
            return Ok((c.iter().copied().collect(), f, gap));
        }
        t *= 10.0;
    }
}

//! Residuals and verdicts for the two Frobenius conditions.
//!
//! The cyclic condition is `g(A(X,Y),Z) = g(X,A(Y,Z))`; commutativity is
//! `A(X,Y) = A(Y,X)`. A pair satisfying both is FORMAL, one satisfying only
//! the cyclic condition is WEAK. Both residuals are divided by
//! `1 + maxabs(g) * maxabs(A)` so tolerances carry across scales.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::manifold::{Chart, Tensor3, TensorField, Valence};
use crate::serial::{f17, f17_vec, pairwise_sum};

/// Tolerance for pipelines whose derivatives come from exact jets.
pub const JET_TOL: f64 = 1e-8;
/// Tolerance where finite differences enter.
pub const FD_TOL: f64 = 1e-6;

/// A metric matrix and an algebra tensor `A^k_ij` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseData {
    pub g: DMatrix<f64>,
    pub a: Tensor3,
}

impl PointwiseData {
    pub fn new(g: DMatrix<f64>, a: Tensor3) -> Result<Self> {
        let n = a.dim();
        if g.nrows() != n || g.ncols() != n {
            return Err(GeomError::ChartMismatch(n, g.nrows()));
        }
        let scale = g.amax().max(1.0);
        if (&g - g.transpose()).amax() > 1e-12 * scale {
            return Err(GeomError::NotSymmetric("g".into()));
        }
        Ok(PointwiseData { g, a })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn normalization(&self) -> f64 {
        1.0 + self.g.amax() * self.a.max_abs()
    }
}

/// `max |Σ_l (A^l_ij g_lk - A^l_jk g_il)|` without normalization.
pub fn cyclic_residual_raw(d: &PointwiseData) -> f64 {
    let n = d.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r: f64 = (0..n)
                    .map(|l| d.a[(l, i, j)] * d.g[(l, k)] - d.a[(l, j, k)] * d.g[(i, l)])
                    .sum();
                worst = nan_max(worst, r.abs());
            }
        }
    }
    worst
}

pub fn cyclic_residual(d: &PointwiseData) -> f64 {
    cyclic_residual_raw(d) / d.normalization()
}

/// `max |A^k_ij - A^k_ji|` without normalization.
pub fn commutativity_residual_raw(d: &PointwiseData) -> f64 {
    let n = d.dim();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                worst = nan_max(worst, (d.a[(k, i, j)] - d.a[(k, j, i)]).abs());
            }
        }
    }
    worst
}

pub fn commutativity_residual(d: &PointwiseData) -> f64 {
    commutativity_residual_raw(d) / d.normalization()
}

/// Maximum that lets NaN win, so a broken evaluation can never pass.
pub fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Formal,
    Weak,
    None,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Formal => "FORMAL",
            Classification::Weak => "WEAK",
            Classification::None => "NONE",
        })
    }
}

/// Summary of a residual evaluated over sample points. A pass means no
/// violation was found at the sampled points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    #[serde(serialize_with = "f17")]
    pub max_residual: f64,
    #[serde(serialize_with = "f17")]
    pub mean_residual: f64,
    #[serde(serialize_with = "f17_vec")]
    pub worst_point: Vec<f64>,
    pub samples: usize,
    #[serde(serialize_with = "f17")]
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl CheckReport {
    /// Builds a report where passing means `max <= tolerance`.
    pub fn from_samples(name: impl Into<String>, tolerance: f64, samples: &[(Vec<f64>, f64)]) -> Self {
        let mut max = 0.0;
        let mut worst_point = samples.first().map(|s| s.0.clone()).unwrap_or_default();
        for (p, r) in samples {
            if r.is_nan() || *r > max {
                max = *r;
                worst_point = p.clone();
                if r.is_nan() {
                    break;
                }
            }
        }
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let mean = if values.is_empty() {
            0.0
        } else {
            pairwise_sum(&values) / values.len() as f64
        };
        CheckReport {
            name: name.into(),
            max_residual: max,
            mean_residual: mean,
            worst_point,
            samples: samples.len(),
            tolerance,
            verdict: Verdict::from_bool(max <= tolerance),
        }
    }

    /// Evaluates `residual` at every sample point of `chart`.
    pub fn over_chart(
        name: impl Into<String>,
        tolerance: f64,
        chart: &Chart,
        mut residual: impl FnMut(&[f64]) -> Result<f64>,
    ) -> Result<Self> {
        let samples = chart
            .points()
            .into_iter()
            .map(|p| {
                let r = residual(&p)?;
                Ok((p, r))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CheckReport::from_samples(name, tolerance, &samples))
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classified {
    pub classification: Classification,
    pub cyclic: CheckReport,
    pub commutativity: CheckReport,
}

fn classification_of(cyclic: &CheckReport, commutativity: &CheckReport) -> Classification {
    match (cyclic.passed(), commutativity.passed()) {
        (true, true) => Classification::Formal,
        (true, false) => Classification::Weak,
        _ => Classification::None,
    }
}

/// Pointwise data of a (0,2) field and a (1,2) field at `p`.
pub fn pointwise(g: &TensorField, a: &TensorField, p: &[f64]) -> Result<PointwiseData> {
    let n = g.dim();
    let gv = g.values(p)?;
    let gm = DMatrix::from_row_slice(n, n, &gv);
    // Symmetrize away rounding in derived metrics.
    let gm = (&gm + gm.transpose()) * 0.5;
    PointwiseData::new(gm, Tensor3::from_vec(n, a.values(p)?)?)
}

/// Classifies `(g, A)` over the sample points of `chart`.
pub fn classify(g: &TensorField, a: &TensorField, chart: &Chart, tol: f64) -> Result<Classified> {
    if g.valence() != Valence::BILINEAR || a.valence() != Valence::ALGEBRA {
        return Err(GeomError::InvalidArgument(format!(
            "classify expects (0,2) and (1,2) fields, got {} and {}",
            g.valence(),
            a.valence()
        )));
    }
    if g.dim() != a.dim() || g.dim() != chart.dim() {
        return Err(GeomError::ChartMismatch(g.dim(), a.dim()));
    }
    let mut cyc = Vec::new();
    let mut com = Vec::new();
    for p in chart.points() {
        let d = pointwise(g, a, &p)?;
        cyc.push((p.clone(), cyclic_residual(&d)));
        com.push((p, commutativity_residual(&d)));
    }
    Ok(classify_samples(&cyc, &com, tol))
}

/// Classification of constant data, e.g. on a Lie algebra frame.
pub fn classify_pointwise(d: &PointwiseData, tol: f64) -> Classified {
    let origin = vec![0.0; d.dim()];
    classify_samples(
        &[(origin.clone(), cyclic_residual(d))],
        &[(origin, commutativity_residual(d))],
        tol,
    )
}

fn classify_samples(cyc: &[(Vec<f64>, f64)], com: &[(Vec<f64>, f64)], tol: f64) -> Classified {
    let cyclic = CheckReport::from_samples("cyclic", tol, cyc);
    let commutativity = CheckReport::from_samples("commutativity", tol, com);
    Classified {
        classification: classification_of(&cyclic, &commutativity),
        cyclic,
        commutativity,
    }
}

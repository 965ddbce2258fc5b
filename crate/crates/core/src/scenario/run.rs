use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::recipes::{
    state_index, CheckDirection, IntegralFitSpec, IntegrationSpec, MetricFitSpec, Recipe, SubsystemKind, WhichSpec,
};
use super::report::{Evidence, Report, ReportCheck, Status, REPORT_VERSION};
use super::{ConfigError, Scenario, SignatureSpec};
use crate::catalog::{
    chern_bismut, conformal, cross_product, cross_product_table, einstein_2d, field_distance, golab,
    hypersurface_forms, kahler_q_a, lyra, matrix_at, nabla_j_a, recurrent_j, residual_2_2, residual_3_19,
    ricci_codazzi_residual, selfadjoint_pair, subgeodesic_a, validate_epsilon_structure, validate_lambda_hermitian,
    Golab, Which,
};
use crate::dynamics::{
    autoparallel_system, first_integral_drift, fit_first_integral, metric_ansatz_fit, projective_path_equivalence,
    rk4_integrate, MetricAnsatz, MonomialBasis, OdeSystem, PathOptions, Trajectory,
};
use crate::error::{GeomError, Result};
use crate::expr::{CompiledExpr, ExprError, VarSpace};
use crate::frobenius::{
    commutativity_residual, cyclic_residual, pointwise, CheckReport, Classification, Verdict, FD_TOL, JET_TOL,
};
use crate::liegroup::{
    cartan_schouten, frame_torsion, orthogonality_residual, orthogonality_residual_raw, printed_deviation,
    six_deformations, weak_frobenius_verdicts, LieAlgebra, LIE_TOL,
};
use crate::manifold::{
    compatibility_residual, deformation, flat, levi_civita, ric_operator, ricci, Chart, Connection, Metric, Signature,
    Tensor3, TensorField, Valence,
};
use crate::serial::{pairwise_sum, F17};

/// Command-line overrides. `tol` replaces the tolerance of every
/// `at_most` check and of the classification.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    /// The integrated trajectory of an autoparallel recipe, with its column names.
    pub trajectory: Option<(Trajectory, Vec<String>)>,
}

/// Errors that mean the input is wrong rather than the computation
/// breaking down.
pub fn is_config_error(e: &GeomError) -> bool {
    !matches!(
        e,
        GeomError::Expr(ExprError::Domain { .. })
            | GeomError::SingularMetric(_)
            | GeomError::NotPositiveDefinite(_)
            | GeomError::NonFiniteState(_)
            | GeomError::DegenerateImmersion(_)
            | GeomError::DegenerateSecondForm(_)
            | GeomError::RankDeficientBasis(_)
    )
}

pub fn run_text(text: &str, opts: &RunOptions) -> std::result::Result<RunOutput, ConfigError> {
    run(&Scenario::from_json(text)?, opts)
}

/// Evaluates a scenario. Configuration problems, including ones only
/// discovered while building the recipe, are returned as errors; numerical
/// breakdowns produce a report with status `numerical_error`.
pub fn run(sc: &Scenario, opts: &RunOptions) -> std::result::Result<RunOutput, ConfigError> {
    sc.validate()?;
    if let Some(t) = opts.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(ConfigError::Invalid("--tol must be finite and >= 0".into()));
        }
    }
    let mut chart = sc.chart()?;
    if let Some(s) = opts.samples {
        chart = chart.with_samples(s)?;
    }
    if let Some(s) = opts.seed {
        chart = chart.with_seed(s);
    }
    let mut echo = sc.clone();
    echo.chart.samples = chart.sample_count();
    echo.chart.seed = chart.seed();

    let mut ctx = Ctx::new(sc, chart, *opts);
    if let Some(t) = opts.tol {
        ctx.notices.push(format!(
            "tolerance override {t:e} applied to at_most checks and classification"
        ));
    }
    let mut diagnostics = Vec::new();
    match ctx.evaluate() {
        Ok(()) => {}
        Err(e) if is_config_error(&e) => return Err(ConfigError::Geometry(e)),
        Err(e) => diagnostics.push(e.to_string()),
    }

    let mut checks = Vec::new();
    for name in &ctx.requested {
        if let Some(c) = ctx.checks.remove(name) {
            checks.push(c);
        }
    }
    let status = if !diagnostics.is_empty() {
        Status::NumericalError
    } else if checks.iter().all(ReportCheck::passed) {
        Status::Pass
    } else {
        Status::Fail
    };
    let report = Report {
        version: REPORT_VERSION,
        scenario: serde_json::to_value(&echo).expect("scenario serializes"),
        status,
        exit_code: status.exit_code(),
        classification: ctx.classification,
        checks,
        metrics: ctx.metrics,
        evidence: ctx.evidence,
        notices: ctx.notices,
        diagnostics,
    };
    Ok(RunOutput {
        report,
        trajectory: ctx.trajectory,
    })
}

/// Per-point Frobenius residuals.
struct PointClass {
    p: Vec<f64>,
    cyclic: f64,
    commutativity: f64,
}

type Samples = Vec<(Vec<f64>, f64)>;

struct Ctx<'a> {
    sc: &'a Scenario,
    n: usize,
    chart: Chart,
    opts: RunOptions,
    known: Vec<(&'static str, (CheckDirection, f64))>,
    requested: Vec<String>,
    checks: BTreeMap<String, ReportCheck>,
    classification: Option<Classification>,
    metrics: BTreeMap<String, F17>,
    evidence: BTreeMap<String, Evidence>,
    notices: Vec<String>,
    trajectory: Option<(Trajectory, Vec<String>)>,
}

fn classify_default(recipe: &Recipe) -> f64 {
    match recipe {
        Recipe::LieAlgebra { .. } => LIE_TOL,
        Recipe::Autoparallel { .. } => JET_TOL,
        r => r
            .known_checks()
            .into_iter()
            .find(|(k, _)| *k == "cyclic")
            .map(|(_, (_, t))| t)
            .unwrap_or(FD_TOL),
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| crate::frobenius::nan_max(m, x.abs()))
}

impl<'a> Ctx<'a> {
    fn new(sc: &'a Scenario, chart: Chart, opts: RunOptions) -> Self {
        Ctx {
            sc,
            n: sc.dim,
            chart,
            opts,
            known: sc.recipe.known_checks(),
            requested: sc.effective_checks(),
            checks: BTreeMap::new(),
            classification: None,
            metrics: BTreeMap::new(),
            evidence: BTreeMap::new(),
            notices: Vec::new(),
            trajectory: None,
        }
    }

    fn wants(&self, name: &str) -> bool {
        self.requested.iter().any(|c| c == name)
    }

    fn wants_any(&self, names: &[&str]) -> bool {
        names.iter().any(|n| self.wants(n))
    }

    fn direction(&self, name: &str) -> (CheckDirection, f64) {
        self.known
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, d)| *d)
            .expect("check names are validated")
    }

    fn tol(&self, name: &str) -> f64 {
        let (dir, default) = self.direction(name);
        if let (CheckDirection::AtMost, Some(t)) = (dir, self.opts.tol) {
            return t;
        }
        self.sc.tolerances.get(name).copied().unwrap_or(default)
    }

    fn classify_tol(&self) -> f64 {
        self.opts
            .tol
            .or_else(|| self.sc.tolerances.get("classify").copied())
            .unwrap_or_else(|| classify_default(&self.sc.recipe))
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), F17(v));
    }

    fn sample(&self, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Samples> {
        self.chart
            .points()
            .into_iter()
            .map(|p| {
                let r = f(&p)?;
                Ok((p, r))
            })
            .collect()
    }

    fn record_with_note(&mut self, name: &str, samples: &[(Vec<f64>, f64)], note: Option<String>) {
        if !self.wants(name) {
            return;
        }
        let (dir, _) = self.direction(name);
        let tol = self.tol(name);
        let base = CheckReport::from_samples(name, tol, samples);
        let verdict = match dir {
            CheckDirection::AtMost => base.verdict,
            CheckDirection::AtLeast => Verdict::from_bool(base.max_residual >= tol),
        };
        self.checks.insert(
            name.to_string(),
            ReportCheck {
                name: name.to_string(),
                anchor: self.sc.anchors.get(name).or(self.sc.anchor.as_ref()).cloned(),
                direction: dir,
                max_residual: base.max_residual,
                mean_residual: base.mean_residual,
                worst_point: base.worst_point,
                samples: base.samples,
                tolerance: tol,
                verdict,
                note,
            },
        );
    }

    fn record(&mut self, name: &str, samples: &[(Vec<f64>, f64)]) {
        self.record_with_note(name, samples, None);
    }

    /// 0/1 disagreement per point, recorded under `name`.
    fn record_logic(&mut self, name: &str, points: &[Vec<f64>], holds: impl Fn(usize) -> bool) {
        let samples: Samples = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), if holds(i) { 0.0 } else { 1.0 }))
            .collect();
        self.record(name, &samples);
    }

    /// Pointwise: the cyclic condition holds exactly where `rhs <= rhs_tol`.
    fn record_equivalence(&mut self, name: &str, cls: &[PointClass], rhs: &[(Vec<f64>, f64)], rhs_tol: f64) {
        let ct = self.classify_tol();
        let points: Vec<Vec<f64>> = cls.iter().map(|c| c.p.clone()).collect();
        self.record_logic(name, &points, |i| (cls[i].cyclic <= ct) == (rhs[i].1 <= rhs_tol));
    }

    /// Classifies `(g, A)` at every sample point and records the cyclic,
    /// commutativity and noncommutative checks.
    fn classify(&mut self, g: &TensorField, a: &TensorField) -> Result<Vec<PointClass>> {
        let mut out = Vec::new();
        for p in self.chart.points() {
            let d = pointwise(g, a, &p)?;
            out.push(PointClass {
                cyclic: cyclic_residual(&d),
                commutativity: commutativity_residual(&d),
                p,
            });
        }
        self.finish_classification(&out);
        Ok(out)
    }

    fn finish_classification(&mut self, cls: &[PointClass]) {
        let cyc: Samples = cls.iter().map(|c| (c.p.clone(), c.cyclic)).collect();
        let com: Samples = cls.iter().map(|c| (c.p.clone(), c.commutativity)).collect();
        let ct = self.classify_tol();
        let cyc_ok = CheckReport::from_samples("cyclic", ct, &cyc).passed();
        let com_ok = CheckReport::from_samples("commutativity", ct, &com).passed();
        self.classification = Some(match (cyc_ok, com_ok) {
            (true, true) => Classification::Formal,
            (true, false) => Classification::Weak,
            _ => Classification::None,
        });
        self.record("cyclic", &cyc);
        self.record("commutativity", &com);
        self.record("noncommutative", &com);
    }

    fn evaluate(&mut self) -> Result<()> {
        let sc = self.sc;
        let n = self.n;
        let sig = match sc.signature {
            SignatureSpec::Riemannian => Signature::Riemannian,
            SignatureSpec::Indefinite => Signature::Indefinite,
        };
        let g = Metric::from_exprs(&sc.metric, &self.chart, sig)?;
        match &sc.recipe {
            Recipe::Subgeodesic { theta, p, path } => {
                let th = TensorField::from_exprs(Valence::COVECTOR, n, theta)?;
                let pv = TensorField::from_exprs(Valence::VECTOR, n, p)?;
                let a = subgeodesic_a(&th, &pv, &g)?;
                let cls = self.classify(g.field(), &a)?;
                let psi = flat(&pv, &g)?;
                let r22 = self.sample(|q| Ok(residual_2_2(&th.values(q)?, &psi.values(q)?, &g.matrix(q)?)))?;
                self.record("residual_2_2", &r22);
                self.record("rigidity", &r22);
                let t = self.tol("residual_2_2");
                self.record_equivalence("prop_2_1", &cls, &r22, t);
                if let (Some(path), true) = (path, self.wants("projective_paths")) {
                    let lc = levi_civita(&g)?;
                    let other = lc.shifted(&a)?;
                    let opts = PathOptions {
                        length: path.length,
                        h: path.h,
                        ..PathOptions::default()
                    };
                    let d = projective_path_equivalence(&lc, &other, &path.x0, &path.v0, &opts)?;
                    self.record("projective_paths", &[(path.x0.clone(), d)]);
                }
            }
            Recipe::Conformal { u } => {
                let u = TensorField::scalar_expr(n, u)?;
                let c = conformal(&g, &u)?;
                self.classify(g.field(), &c.a)?;
                if self.wants("route_equivalence") {
                    let diff = c.connection_difference()?;
                    let r = self.sample(|q| field_distance(&c.a, &diff, q))?;
                    self.record("route_equivalence", &r);
                }
                let psi = flat(&c.p, &g)?;
                let r22 = self.sample(|q| Ok(residual_2_2(&c.theta.values(q)?, &psi.values(q)?, &g.matrix(q)?)))?;
                self.record("residual_2_2", &r22);
                self.record("rigidity", &r22);
            }
            Recipe::Hypersurface { immersion } => {
                let hs = hypersurface_forms(immersion, &self.chart)?;
                let r = self.sample(|q| field_distance(hs.g.field(), g.field(), q))?;
                self.record("induced_metric", &r);
                let nb = hs.nabla_b()?;
                let r = self.sample(|q| hs.codazzi_residual(&nb, q))?;
                self.record("codazzi", &r);
                let a = hs.a_field()?;
                self.classify(&hs.b, &a)?;
                let diff = hs.a_connection_difference()?;
                let r = self.sample(|q| field_distance(&a, &diff, q))?;
                self.record("route_equivalence", &r);
                let printed = hs.a_printed()?;
                let dev = self.sample(|q| field_distance(&printed, &diff, q))?;
                let worst = dev.iter().fold(0.0, |m, s| crate::frobenius::nan_max(m, s.1));
                self.metric("printed_sign_deviation", worst);
                let r = self.sample(|q| hs.umbilic_residual(q))?;
                self.record("umbilic", &r);
                let sigma = self.sample(|q| hs.umbilic_factor(q))?;
                let vals: Vec<f64> = sigma.iter().map(|s| s.1).collect();
                self.metric("umbilic_factor_mean", pairwise_sum(&vals) / vals.len() as f64);
            }
            Recipe::ShapeOperator { immersion } => {
                let hs = hypersurface_forms(immersion, &self.chart)?;
                let r = self.sample(|q| field_distance(hs.g.field(), g.field(), q))?;
                self.record("induced_metric", &r);
                let j = hs.shape_operator()?;
                let nj = nabla_j_a(&hs.g, &j)?;
                let r41 = self.sample(|q| nj.residual_4_1(q))?;
                let r42 = self.sample(|q| nj.residual_4_2(q))?;
                self.record("residual_4_1", &r41);
                self.record("residual_4_2", &r42);
                let cls = self.classify(hs.g.field(), &nj.a)?;
                self.record_prop_4_1(&cls, &r41, &r42);
            }
            Recipe::SelfadjointPair { j } => {
                let j = TensorField::from_exprs(Valence::ENDO, n, j)?;
                let pair = selfadjoint_pair(&g, &j)?;
                let r28 = self.sample(|q| pair.residual_2_8(q))?;
                self.record("residual_2_8", &r28);
                let cls = self.classify(pair.g_tilde.field(), &pair.a)?;
                let t = self.tol("residual_2_8");
                self.record_equivalence("prop_2_4", &cls, &r28, t);
            }
            Recipe::RecurrentJ { j0, phi } => {
                let j0 = TensorField::from_exprs(Valence::ENDO, n, j0)?;
                let phi = TensorField::scalar_expr(n, phi)?;
                let rec = recurrent_j(&g, &j0, &phi)?;
                let r = self.sample(|q| rec.recurrence_residual(q))?;
                self.record("recurrence", &r);
                let r29 = self.sample(|q| rec.residual_2_9(q))?;
                self.record("residual_2_9", &r29);
                self.record("rigidity", &r29);
                let cls = self.classify(rec.pair.g_tilde.field(), &rec.pair.a)?;
                let t = self.tol("residual_2_9");
                self.record_equivalence("prop_2_5", &cls, &r29, t);
            }
            Recipe::Golab {
                theta,
                f,
                epsilon,
                lambda,
            } => {
                let th = TensorField::from_exprs(Valence::COVECTOR, n, theta)?;
                let f = TensorField::from_exprs(Valence::ENDO, n, f)?;
                if let Some(eps) = epsilon {
                    validate_epsilon_structure(&f, *eps, &self.chart)?;
                }
                if let Some(l) = lambda {
                    validate_lambda_hermitian(&g, &f, *l)?;
                }
                let gl = golab(&g, &th, &f)?;
                self.golab_checks(&gl)?;
            }
            Recipe::Lyra { theta } => {
                let th = TensorField::from_exprs(Valence::COVECTOR, n, theta)?;
                let gl = lyra(&g, &th)?;
                self.golab_checks(&gl)?;
            }
            Recipe::KahlerQ { j, q } => {
                let j = TensorField::from_exprs(Valence::ENDO, n, j)?;
                let qf = TensorField::from_exprs(Valence::ALGEBRA, n, q)?;
                let a = kahler_q_a(&j, &qf, &self.chart)?;
                let r = self.sample(|p| {
                    Ok(residual_3_19(
                        &g.matrix(p)?,
                        &matrix_at(&j, p)?,
                        &Tensor3::from_vec(n, qf.values(p)?)?,
                    ))
                })?;
                self.record("residual_3_19", &r);
                self.metric(
                    "residual_3_19_max",
                    r.iter().fold(0.0, |m, s| crate::frobenius::nan_max(m, s.1)),
                );
                let cls = self.classify(g.field(), &a)?;
                let t = self.tol("residual_3_19");
                self.record_equivalence("prop_3_7", &cls, &r, t);
            }
            Recipe::ChernBismut {
                j,
                which,
                lee_form,
                codifferential,
            } => {
                let j = TensorField::from_exprs(Valence::ENDO, n, j)?;
                let cb = chern_bismut(&g, &j)?;
                let which = match which {
                    WhichSpec::Chern => Which::Chern,
                    WhichSpec::Bismut => Which::Bismut,
                };
                for (key, w) in [("a_chern_max", Which::Chern), ("a_bismut_max", Which::Bismut)] {
                    let r = self.sample(|q| Ok(max_abs(&cb.a(w).values(q)?)))?;
                    let worst = r.iter().fold(0.0, |m, s| crate::frobenius::nan_max(m, s.1));
                    self.metric(key, worst);
                    if w == which {
                        self.record("a_vanishes", &r);
                    }
                }
                let r = self.sample(|q| cb.residual_3_22(q))?;
                self.record("residual_3_22", &r);
                let r = self.sample(|q| cb.residual_3_23(q))?;
                self.record("residual_3_23", &r);
                let lee = lee_form
                    .as_ref()
                    .map(|l| TensorField::from_exprs(Valence::COVECTOR, n, l))
                    .transpose()?;
                let codiff = codifferential
                    .as_ref()
                    .map(|d| TensorField::from_exprs(Valence::COVECTOR, n, d))
                    .transpose()?;
                if let Some(lee) = &lee {
                    let r = self.sample(|q| cb.lck_residual(lee, q))?;
                    self.record("lck", &r);
                }
                match &codiff {
                    Some(d) => {
                        let r = self.sample(|q| cb.residual_3_24(d, q))?;
                        self.record("residual_3_24", &r);
                    }
                    None if self.wants("residual_3_24") => self
                        .notices
                        .push("residual_3_24 skipped: no codifferential supplied".into()),
                    None => {}
                }
                match codiff.as_ref().or(lee.as_ref()) {
                    Some(d) => {
                        let note = "trivially satisfied as printed: both sides list the same three terms";
                        let r = self.sample(|q| cb.residual_3_25(d, q))?;
                        self.record_with_note("residual_3_25", &r, Some(note.into()));
                        if self.wants("residual_3_25") {
                            self.notices.push(format!("residual_3_25: {note}"));
                        }
                    }
                    None if self.wants("residual_3_25") => self
                        .notices
                        .push("residual_3_25 skipped: no codifferential or lee_form supplied".into()),
                    None => {}
                }
                self.classify(g.field(), cb.a(which))?;
            }
            Recipe::CrossProduct { pairs } => {
                let table = cross_product_table(n)?;
                let a = TensorField::constant(Valence::ALGEBRA, n, table.as_slice().to_vec())?;
                self.classify(g.field(), &a)?;
                let mut rng = ChaCha8Rng::seed_from_u64(self.chart.seed());
                let mut norm = Vec::with_capacity(*pairs);
                let mut orth = Vec::with_capacity(*pairs);
                let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
                for _ in 0..*pairs {
                    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let z = cross_product(&table, &x, &y);
                    let lagrange = dot(&x, &x) * dot(&y, &y) - dot(&x, &y).powi(2);
                    let at: Vec<f64> = x.iter().chain(&y).copied().collect();
                    norm.push((at.clone(), (dot(&z, &z) - lagrange).abs()));
                    orth.push((at, dot(&z, &x).abs().max(dot(&z, &y).abs())));
                }
                self.record("norm_identity", &norm);
                self.record("orthogonal_product", &orth);
            }
            Recipe::NablaJ { j } => {
                let j = TensorField::from_exprs(Valence::ENDO, n, j)?;
                let nj = nabla_j_a(&g, &j)?;
                let r41 = self.sample(|q| nj.residual_4_1(q))?;
                let r42 = self.sample(|q| nj.residual_4_2(q))?;
                self.record("residual_4_1", &r41);
                self.record("residual_4_2", &r42);
                let cls = self.classify(g.field(), &nj.a)?;
                self.record_prop_4_1(&cls, &r41, &r42);
            }
            Recipe::RicciJ {} => {
                let lc = levi_civita(&g)?;
                let j = ric_operator(&g, &ricci(&lc))?;
                let nj = nabla_j_a(&g, &j)?;
                let codazzi = ricci_codazzi_residual(&g)?;
                let rc = self.sample(|q| codazzi(q))?;
                let r42 = self.sample(|q| nj.residual_4_2(q))?;
                self.record("ricci_codazzi", &rc);
                self.record("residual_4_2", &r42);
                let (tc, t42) = (self.tol("ricci_codazzi"), self.tol("residual_4_2"));
                let points: Vec<Vec<f64>> = rc.iter().map(|s| s.0.clone()).collect();
                self.record_logic("prop_4_2", &points, |i| rc[i].1 > tc || r42[i].1 <= t42);
                self.classify(g.field(), &nj.a)?;
            }
            Recipe::Einstein2d {} => {
                let e = einstein_2d(&g)?;
                let r = self.sample(|q| e.einstein_residual(q))?;
                self.record("einstein", &r);
                let lambdas = self.sample(|q| e.lambda(q))?;
                let vals: Vec<f64> = lambdas.iter().map(|s| s.1).collect();
                let mean = pairwise_sum(&vals) / vals.len() as f64;
                self.metric("lambda_mean", mean);
                let spread: Samples = lambdas.iter().map(|(p, l)| (p.clone(), (l - mean).abs())).collect();
                self.record("lambda_constant", &spread);
                let r = self.sample(|q| Ok(max_abs(&e.a.values(q)?)))?;
                self.record("a_vanishes", &r);
                if self.wants("ricci_codazzi") {
                    let codazzi = ricci_codazzi_residual(&g)?;
                    let r = self.sample(|q| codazzi(q))?;
                    self.record("ricci_codazzi", &r);
                }
                self.classify(g.field(), &e.a)?;
            }
            Recipe::LieAlgebra { brackets } => self.lie_algebra(brackets)?,
            Recipe::Autoparallel { .. } => self.autoparallel(&g)?,
        }
        Ok(())
    }

    /// Implication: self-adjoint and symmetric `∇J` give a formal structure.
    fn record_prop_4_1(&mut self, cls: &[PointClass], r41: &[(Vec<f64>, f64)], r42: &[(Vec<f64>, f64)]) {
        let (t41, t42, ct) = (self.tol("residual_4_1"), self.tol("residual_4_2"), self.classify_tol());
        let points: Vec<Vec<f64>> = cls.iter().map(|c| c.p.clone()).collect();
        self.record_logic("prop_4_1", &points, |i| {
            let premise = r41[i].1 <= t41 && r42[i].1 <= t42;
            !premise || (cls[i].cyclic <= ct && cls[i].commutativity <= ct)
        });
    }

    fn golab_checks(&mut self, gl: &Golab) -> Result<()> {
        let target = gl.torsion_target()?;
        let tors = self.sample(|q| gl.torsion_residual(&target, q))?;
        let worst = tors.iter().fold(0.0, |m, s| crate::frobenius::nan_max(m, s.1));
        self.metric("torsion_deviation", worst);
        self.record("torsion", &tors);
        let r = self.sample(|q| gl.metric_residual(q))?;
        self.record("metric", &r);
        let asym = self.sample(|q| gl.s_asymmetry(q))?;
        let worst = asym.iter().fold(0.0, |m, s| crate::frobenius::nan_max(m, s.1));
        self.metric("s_asymmetry", worst);
        let r33 = self.sample(|q| gl.residual_3_3(q))?;
        self.record("residual_3_3", &r33);
        self.record("rigidity", &r33);
        let cls = self.classify(gl.g.field(), &gl.a)?;
        let t = self.tol("residual_3_3");
        self.record_equivalence("prop_3_2", &cls, &r33, t);
        Ok(())
    }

    fn constant_metric(&self) -> Result<DMatrix<f64>> {
        let n = self.n;
        let origin = vec![0.0; n];
        let mut h = DMatrix::zeros(n, n);
        for (i, row) in self.sc.metric.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let c = CompiledExpr::parse(e, n)?;
                if !c.is_constant() {
                    return Err(GeomError::InvalidArgument(format!(
                        "lie_algebra needs a constant inner product, entry `{e}` varies"
                    )));
                }
                h[(i, j)] = c.eval(&origin)?;
            }
        }
        Ok(h)
    }

    fn lie_algebra(&mut self, brackets: &[(usize, usize, usize, f64)]) -> Result<()> {
        let n = self.n;
        let entries: Vec<(usize, usize, usize, f64)> =
            brackets.iter().map(|&(i, j, k, v)| (i - 1, j - 1, k - 1, v)).collect();
        let l = LieAlgebra::from_brackets(n, &entries, Some(self.constant_metric()?))?;
        let origin = vec![0.0; n];
        let one = |v: f64| vec![(origin.clone(), v)];
        let c = l.structure();
        let cs = cartan_schouten(&l);
        let dist = |x: &Tensor3, y: &Tensor3| x.zip_with(y, |a, b| a - b).max_abs();
        let torsion = dist(&frame_torsion(&cs.minus, &l), &c.map(|x| -x))
            .max(dist(&frame_torsion(&cs.plus, &l), c))
            .max(frame_torsion(&cs.zero, &l).max_abs());
        self.record("torsion_identities", &one(torsion));
        let pd = printed_deviation(&l);
        self.record("printed_lines", &one(pd.line1.max(pd.line2).max(pd.line3)));
        for (k, v) in [
            ("line1_deviation", pd.line1),
            ("line2_deviation", pd.line2),
            ("line3_deviation", pd.line3),
            ("line4_deviation", pd.line4),
        ] {
            self.metric(k, v);
        }
        let orth = orthogonality_residual(&l);
        self.metric("orthogonality_residual", orth);
        self.metric("orthogonality_residual_raw", orthogonality_residual_raw(&l));
        self.record("orthogonality", &one(orth));
        self.record("non_orthogonal", &one(orth));
        let lv = weak_frobenius_verdicts(&l, self.classify_tol());
        let mut weak = 0.0f64;
        let mut formal = 0.0f64;
        for (name, cl) in &lv.tensors {
            weak = weak.max(cl.cyclic.max_residual);
            formal = formal.max(cl.cyclic.max_residual).max(cl.commutativity.max_residual);
            self.evidence.insert(
                format!("classification[{name}]"),
                Evidence::Text(cl.classification.to_string()),
            );
            self.metric(&format!("cyclic[{name}]"), cl.cyclic.max_residual);
            self.metric(&format!("commutativity[{name}]"), cl.commutativity.max_residual);
        }
        self.record("weak_all", &one(weak));
        self.record("formal_all", &one(formal));
        self.record("a_prime_vanishes", &one(six_deformations(&l).a_prime.max_abs()));
        self.record("equivalence", &one(if lv.equivalence_holds { 0.0 } else { 1.0 }));
        self.record(
            "commutativity_chain",
            &one(if lv.commutativity_chain_holds { 0.0 } else { 1.0 }),
        );
        Ok(())
    }

    fn autoparallel(&mut self, g: &Metric) -> Result<()> {
        let n = self.n;
        let Recipe::Autoparallel {
            gamma,
            symmetric,
            integrate,
            integrals,
            non_integrals,
            convergence,
            integral_fit,
            metric_fit,
        } = &self.sc.recipe
        else {
            unreachable!("dispatched on the recipe kind")
        };
        let conn = Connection::from_exprs(n, gamma, *symmetric)?;
        let lc = levi_civita(g)?;
        self.classify(g.field(), &deformation(&lc, &conn)?)?;
        if self.wants("metric_compatibility") {
            let r = self.sample(|q| compatibility_residual(&conn, g, q))?;
            self.record("metric_compatibility", &r);
        }
        let sys = autoparallel_system(&conn);
        if let Some(spec) = integrate {
            self.drifts(&sys, spec, integrals, non_integrals)?;
        }
        if let (Some(spec), true) = (convergence, self.wants("rk4_order")) {
            let order = convergence_order(&sys, spec)?;
            self.metric("rk4_order", order);
            self.record("rk4_order", &[(spec.initial.clone(), (order - 4.0).abs())]);
        }
        if let (Some(spec), true) = (
            integral_fit,
            self.wants_any(&["integral_fit", "no_polynomial_integral", "planted_integrals"]),
        ) {
            self.integral_fit(&conn, spec)?;
        }
        if let (Some(spec), true) = (metric_fit, self.wants_any(&["metric_fit", "non_metric"])) {
            self.metric_fit(&conn, spec)?;
        }
        Ok(())
    }

    fn drifts(&mut self, sys: &OdeSystem, spec: &IntegrationSpec, integrals: &[String], non: &[String]) -> Result<()> {
        let traj = rk4_integrate(sys, &spec.initial, 0.0, spec.t1, spec.h)?;
        let space = VarSpace::phase(self.n);
        for (name, list) in [("drift", integrals), ("non_integral_drift", non)] {
            let mut samples = Vec::new();
            for e in list {
                let f = CompiledExpr::parse_in(e, &space)?;
                samples.push((spec.initial.clone(), first_integral_drift(&traj, &f)?));
            }
            if !list.is_empty() {
                let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
                self.evidence
                    .insert(format!("{name}_values"), Evidence::vector(&values));
                self.record(name, &samples);
            }
        }
        self.trajectory = Some((traj, sys.state_names()));
        Ok(())
    }

    fn integral_fit(&mut self, conn: &Connection, spec: &IntegralFitSpec) -> Result<()> {
        let n = self.n;
        let sys = match spec.system {
            SubsystemKind::Phase => autoparallel_system(conn),
            SubsystemKind::Velocity => velocity_system(conn)?,
        };
        let vars = spec
            .variables
            .iter()
            .map(|v| state_index(v, n, spec.system))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| GeomError::InvalidArgument(e.to_string()))?;
        let basis = MonomialBasis::total_degree(&vars, spec.degree).with_extra(&spec.extra);
        let trajs = ensemble(&sys, spec)?;
        let fit = fit_first_integral(&sys, &trajs, &basis, spec.kernel_tol)?;
        self.record("integral_fit", &[(trajs[0].states[0].clone(), fit.normalized_residual)]);
        self.record(
            "no_polynomial_integral",
            &[(trajs[0].states[0].clone(), fit.normalized_residual)],
        );
        self.metric("fit_normalized_residual", fit.normalized_residual);
        self.metric("fit_kernel_dim", fit.kernel.len() as f64);
        self.metric("fit_rows", fit.rows as f64);
        let names = sys.state_names();
        let described: Vec<String> = (0..basis.len()).map(|i| basis.describe(i, &names)).collect();
        self.evidence
            .insert("fit_basis".into(), Evidence::Text(described.join(" ")));
        self.evidence
            .insert("fit_coefficients".into(), Evidence::vector(&fit.coefficients));
        self.evidence
            .insert("fit_spectrum".into(), Evidence::vector(&fit.spectrum));
        if !spec.planted.is_empty() {
            let space = match spec.system {
                SubsystemKind::Phase => VarSpace::phase(n),
                SubsystemKind::Velocity => VarSpace::chart(n),
            };
            let states: Vec<&Vec<f64>> = trajs.iter().flat_map(|t| &t.states).collect();
            let mut samples = Vec::new();
            for e in &spec.planted {
                let f = CompiledExpr::parse_in(e, &space)?;
                let target = planted_coefficients(&f, &basis, &states)?;
                samples.push((states[0].clone(), 1.0 - fit.kernel_cosine(&target)));
            }
            self.record("planted_integrals", &samples);
        }
        Ok(())
    }

    fn metric_fit(&mut self, conn: &Connection, spec: &MetricFitSpec) -> Result<()> {
        let n = self.n;
        let vars = spec
            .variables
            .iter()
            .map(|v| state_index(v, n, SubsystemKind::Velocity))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| GeomError::InvalidArgument(e.to_string()))?;
        let ansatz = MetricAnsatz::polynomial(n, &vars, spec.degree)?;
        let fit = metric_ansatz_fit(conn, &ansatz, &self.chart)?;
        let at = self.chart.points().swap_remove(0);
        self.record("metric_fit", &[(at.clone(), fit.residual)]);
        self.record("non_metric", &[(at.clone(), fit.residual)]);
        self.metric("metric_fit_residual", fit.residual);
        if let Some(lb) = fit.residual_lower_bound {
            self.metric("metric_fit_lower_bound", lb);
        }
        self.metric("metric_fit_sigma_ratio", fit.sigma_ratio);
        self.metric("metric_fit_kernel_dim", fit.kernel_dim as f64);
        self.evidence
            .insert("metric_fit_coefficients".into(), Evidence::vector(&fit.coefficients));
        let method = serde_json::to_value(fit.method).expect("serializes");
        self.evidence.insert(
            "metric_fit_method".into(),
            Evidence::Text(method.as_str().unwrap_or_default().to_string()),
        );
        let best = ansatz.metric_at(&fit.coefficients, &at)?;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| best[(i, j)]).collect()).collect();
        self.evidence
            .insert("metric_fit_candidate_at_first_sample".into(), Evidence::matrix(&rows));
        Ok(())
    }
}

/// `v̇ = -Γ(v, v)` for a connection with constant coefficients.
pub fn velocity_system(conn: &Connection) -> Result<OdeSystem> {
    let n = conn.dim();
    let gamma = conn.coefficients(&vec![0.0; n])?;
    Ok(OdeSystem::new("velocity", n, move |v| {
        Ok((0..n)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += gamma[(k, i, j)] * v[i] * v[j];
                    }
                }
                -acc
            })
            .collect())
    }))
}

/// Seeded initial states drawn uniformly from the ensemble box.
pub fn ensemble(sys: &OdeSystem, spec: &IntegralFitSpec) -> Result<Vec<Trajectory>> {
    let e = &spec.ensemble;
    let mut rng = ChaCha8Rng::seed_from_u64(e.seed);
    (0..e.count)
        .map(|_| {
            let y0: Vec<f64> = e
                .bounds
                .iter()
                .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
                .collect();
            rk4_integrate(sys, &y0, 0.0, e.t1, e.h)
        })
        .collect()
}

/// Empirical order from runs at `h` and `h/2` against a reference at `h/16`.
pub fn convergence_order(sys: &OdeSystem, spec: &IntegrationSpec) -> Result<f64> {
    let end = |h: f64| -> Result<Vec<f64>> { Ok(rk4_integrate(sys, &spec.initial, 0.0, spec.t1, h)?.last().to_vec()) };
    let reference = end(spec.h / 16.0)?;
    let err = |y: Vec<f64>| y.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let coarse = err(end(spec.h)?);
    let fine = err(end(spec.h / 2.0)?);
    Ok((coarse / fine).log2())
}

/// Least-squares coordinates of `f` in `basis` over the recorded states;
/// rejects polynomials outside the span.
fn planted_coefficients(f: &CompiledExpr, basis: &MonomialBasis, states: &[&Vec<f64>]) -> Result<Vec<f64>> {
    let m = basis.len();
    let rows = states.len();
    let mut a = DMatrix::zeros(rows, m);
    let mut b = DVector::zeros(rows);
    for (r, y) in states.iter().enumerate() {
        for (c, e) in basis.exponents.iter().enumerate() {
            a[(r, c)] = e
                .iter()
                .zip(&basis.vars)
                .map(|(p, v)| y[*v].powi(*p as i32))
                .product::<f64>();
        }
        b[r] = f.eval(y)?;
    }
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-13 * svd.singular_values.max())
        .map_err(|e| GeomError::InvalidArgument(e.to_string()))?;
    let miss = (&a * &x - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
    if miss > 1e-8 {
        return Err(GeomError::InvalidArgument(format!(
            "planted integral is not in the span of the basis (relative miss {miss:e})"
        )));
    }
    Ok(x.iter().copied().collect())
}

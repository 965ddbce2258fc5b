use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::expr::{parse, parse_in, VarSpace};
use crate::frobenius::{FD_TOL, JET_TOL};
use crate::liegroup::LIE_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckDirection {
    /// Passes when the residual is at most the tolerance.
    AtMost,
    /// Passes when the residual reaches the threshold: evidence that a
    /// structure does not exist.
    AtLeast,
}

use CheckDirection::{AtLeast, AtMost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhichSpec {
    Chern,
    Bismut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_path_h")]
    pub h: f64,
}

fn default_length() -> f64 {
    1.0
}

fn default_path_h() -> f64 {
    1e-4
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSpec {
    /// `(x1..xn, v1..vn)`.
    pub initial: Vec<f64>,
    pub t1: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubsystemKind {
    /// The full autoparallel flow in `(x, v)`.
    #[default]
    Phase,
    /// `v̇ = -Γ(v, v)` alone, for constant coefficients; its state variables
    /// are named `x1..xn`.
    Velocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub count: usize,
    /// Box of initial states, one interval per state component.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
    pub t1: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralFitSpec {
    #[serde(default)]
    pub system: SubsystemKind,
    /// State variable names, e.g. `["x2", "v1", "v2"]`.
    pub variables: Vec<String>,
    pub degree: u32,
    /// Additional exponent vectors over `variables`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<Vec<u32>>,
    pub ensemble: EnsembleSpec,
    /// Polynomials expected to lie in the recovered kernel.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub planted: Vec<String>,
    #[serde(default = "default_kernel_tol")]
    pub kernel_tol: f64,
}

fn default_kernel_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFitSpec {
    /// Coordinates the entries may depend on, e.g. `["x1", "x2"]`.
    #[serde(default)]
    pub variables: Vec<String>,
    pub degree: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Recipe {
    Subgeodesic {
        theta: Vec<String>,
        p: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathSpec>,
    },
    Conformal {
        u: String,
    },
    Hypersurface {
        immersion: Vec<String>,
    },
    ShapeOperator {
        immersion: Vec<String>,
    },
    SelfadjointPair {
        j: Vec<String>,
    },
    RecurrentJ {
        j0: Vec<String>,
        phi: String,
    },
    Golab {
        theta: Vec<String>,
        f: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
    Lyra {
        theta: Vec<String>,
    },
    KahlerQ {
        j: Vec<String>,
        q: Vec<String>,
    },
    ChernBismut {
        j: Vec<String>,
        which: WhichSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lee_form: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        codifferential: Option<Vec<String>>,
    },
    CrossProduct {
        #[serde(default = "default_pairs")]
        pairs: usize,
    },
    NablaJ {
        j: Vec<String>,
    },
    RicciJ {},
    Einstein2d {},
    LieAlgebra {
        /// `[i, j, k, value]`, 1-based with `i < j`: `[E_i, E_j]` gains
        /// `value · E_k`.
        brackets: Vec<(usize, usize, usize, f64)>,
    },
    Autoparallel {
        /// `Γ^k_ij` in row-major order `(k, i, j)`.
        gamma: Vec<String>,
        #[serde(default = "default_true")]
        symmetric: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        integrate: Option<IntegrationSpec>,
        /// Expressions in `(x, v)` expected to be conserved.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        integrals: Vec<String>,
        /// Expressions in `(x, v)` expected to drift.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        non_integrals: Vec<String>,
        /// Coarse run for the self-convergence estimate.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        convergence: Option<IntegrationSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        integral_fit: Option<IntegralFitSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metric_fit: Option<MetricFitSpec>,
    },
}

fn default_pairs() -> usize {
    1000
}

fn exprs(what: &str, list: &[String], count: usize, space: &VarSpace) -> Result<(), ConfigError> {
    if list.len() != count {
        return Err(ConfigError::Invalid(format!(
            "`{what}` needs {count} expressions, got {}",
            list.len()
        )));
    }
    for e in list {
        parse_in(e, space).map_err(|err| ConfigError::Invalid(format!("`{what}` entry `{e}`: {err}")))?;
    }
    Ok(())
}

/// Resolves `x3` / `v1` to a state index in a phase space of `n` positions,
/// or in an `n`-dimensional first-order system.
pub(crate) fn state_index(name: &str, n: usize, kind: SubsystemKind) -> Result<usize, ConfigError> {
    let bad = || ConfigError::Invalid(format!("unknown state variable `{name}`"));
    let (family, digits) = name.split_at(name.len().min(1));
    let idx: usize = digits.parse().map_err(|_| bad())?;
    if idx == 0 || idx > n {
        return Err(bad());
    }
    match (family, kind) {
        ("x", _) => Ok(idx - 1),
        ("v", SubsystemKind::Phase) => Ok(n + idx - 1),
        _ => Err(bad()),
    }
}

impl Recipe {
    pub fn kind(&self) -> &'static str {
        match self {
            Recipe::Subgeodesic { .. } => "subgeodesic",
            Recipe::Conformal { .. } => "conformal",
            Recipe::Hypersurface { .. } => "hypersurface",
            Recipe::ShapeOperator { .. } => "shape_operator",
            Recipe::SelfadjointPair { .. } => "selfadjoint_pair",
            Recipe::RecurrentJ { .. } => "recurrent_j",
            Recipe::Golab { .. } => "golab",
            Recipe::Lyra { .. } => "lyra",
            Recipe::KahlerQ { .. } => "kahler_q",
            Recipe::ChernBismut { .. } => "chern_bismut",
            Recipe::CrossProduct { .. } => "cross_product",
            Recipe::NablaJ { .. } => "nabla_j",
            Recipe::RicciJ {} => "ricci_j",
            Recipe::Einstein2d {} => "einstein2d",
            Recipe::LieAlgebra { .. } => "lie_algebra",
            Recipe::Autoparallel { .. } => "autoparallel",
        }
    }

    /// Every check the recipe understands, with its direction and default
    /// tolerance (or threshold).
    pub fn known_checks(&self) -> Vec<(&'static str, (CheckDirection, f64))> {
        let frob = |tol: f64| {
            vec![
                ("cyclic", (AtMost, tol)),
                ("commutativity", (AtMost, tol)),
                ("noncommutative", (AtLeast, 1e-3)),
            ]
        };
        let mut out = match self {
            Recipe::Subgeodesic { .. } => vec![
                ("residual_2_2", (AtMost, JET_TOL)),
                ("prop_2_1", (AtMost, 0.0)),
                ("rigidity", (AtLeast, 1e-3)),
                ("projective_paths", (AtMost, 1e-4)),
            ],
            Recipe::Conformal { .. } => vec![
                ("route_equivalence", (AtMost, FD_TOL)),
                ("residual_2_2", (AtMost, JET_TOL)),
                ("rigidity", (AtLeast, 1e-3)),
            ],
            Recipe::Hypersurface { .. } => vec![
                ("induced_metric", (AtMost, 1e-10)),
                ("codazzi", (AtMost, 1e-7)),
                ("route_equivalence", (AtMost, FD_TOL)),
                ("umbilic", (AtMost, 1e-8)),
            ],
            Recipe::ShapeOperator { .. } => vec![
                ("induced_metric", (AtMost, 1e-10)),
                ("residual_4_1", (AtMost, 1e-7)),
                ("residual_4_2", (AtMost, 1e-7)),
                ("prop_4_1", (AtMost, 0.0)),
            ],
            Recipe::SelfadjointPair { .. } => vec![("residual_2_8", (AtMost, FD_TOL)), ("prop_2_4", (AtMost, 0.0))],
            Recipe::RecurrentJ { .. } => vec![
                ("recurrence", (AtMost, FD_TOL)),
                ("residual_2_9", (AtMost, JET_TOL)),
                ("rigidity", (AtLeast, 1e-3)),
                ("prop_2_5", (AtMost, 0.0)),
            ],
            Recipe::Golab { .. } | Recipe::Lyra { .. } => vec![
                ("torsion", (AtMost, 1e-10)),
                ("metric", (AtMost, 1e-8)),
                ("residual_3_3", (AtMost, JET_TOL)),
                ("rigidity", (AtLeast, 1e-3)),
                ("prop_3_2", (AtMost, 0.0)),
            ],
            Recipe::KahlerQ { .. } => vec![("residual_3_19", (AtMost, JET_TOL)), ("prop_3_7", (AtMost, 0.0))],
            Recipe::ChernBismut { .. } => vec![
                ("a_vanishes", (AtMost, 1e-10)),
                ("residual_3_22", (AtMost, FD_TOL)),
                ("residual_3_23", (AtMost, FD_TOL)),
                ("lck", (AtMost, 1e-8)),
                ("residual_3_24", (AtMost, FD_TOL)),
                ("residual_3_25", (AtMost, 1e-12)),
            ],
            Recipe::CrossProduct { .. } => vec![
                ("norm_identity", (AtMost, 1e-10)),
                ("orthogonal_product", (AtMost, 1e-12)),
            ],
            Recipe::NablaJ { .. } => vec![
                ("residual_4_1", (AtMost, 1e-7)),
                ("residual_4_2", (AtMost, 1e-7)),
                ("prop_4_1", (AtMost, 0.0)),
            ],
            Recipe::RicciJ {} => vec![
                ("ricci_codazzi", (AtMost, 1e-5)),
                ("residual_4_2", (AtMost, 1e-5)),
                ("prop_4_2", (AtMost, 0.0)),
            ],
            Recipe::Einstein2d {} => vec![
                ("einstein", (AtMost, 1e-4)),
                ("lambda_constant", (AtMost, 1e-4)),
                ("a_vanishes", (AtMost, 1e-4)),
                ("ricci_codazzi", (AtMost, 1e-5)),
            ],
            Recipe::LieAlgebra { .. } => vec![
                ("torsion_identities", (AtMost, LIE_TOL)),
                ("printed_lines", (AtMost, LIE_TOL)),
                ("orthogonality", (AtMost, LIE_TOL)),
                ("non_orthogonal", (AtLeast, 1e-3)),
                ("weak_all", (AtMost, LIE_TOL)),
                ("formal_all", (AtMost, LIE_TOL)),
                ("a_prime_vanishes", (AtMost, LIE_TOL)),
                ("equivalence", (AtMost, 0.0)),
                ("commutativity_chain", (AtMost, 0.0)),
            ],
            Recipe::Autoparallel { .. } => vec![
                ("drift", (AtMost, 1e-8)),
                ("non_integral_drift", (AtLeast, 1e-3)),
                ("rk4_order", (AtMost, 0.2)),
                ("integral_fit", (AtMost, 1e-6)),
                ("planted_integrals", (AtMost, 1e-6)),
                ("no_polynomial_integral", (AtLeast, 1e-3)),
                ("metric_fit", (AtMost, 1e-8)),
                ("non_metric", (AtLeast, 1e-2)),
                ("metric_compatibility", (AtMost, 1e-9)),
            ],
        };
        let tol = match self {
            Recipe::Hypersurface { .. } | Recipe::RicciJ {} | Recipe::Einstein2d {} => FD_TOL,
            Recipe::ShapeOperator { .. } | Recipe::NablaJ { .. } => 1e-7,
            Recipe::SelfadjointPair { .. } | Recipe::RecurrentJ { .. } => FD_TOL,
            Recipe::ChernBismut { .. } => FD_TOL,
            Recipe::LieAlgebra { .. } => LIE_TOL,
            _ => JET_TOL,
        };
        if !matches!(self, Recipe::LieAlgebra { .. } | Recipe::Autoparallel { .. }) {
            out.extend(frob(tol));
        }
        out
    }

    pub fn default_checks(&self) -> Vec<&'static str> {
        match self {
            Recipe::Subgeodesic { path, .. } => {
                let mut v = vec!["cyclic", "commutativity", "residual_2_2", "prop_2_1"];
                if path.is_some() {
                    v.push("projective_paths");
                }
                v
            }
            Recipe::Conformal { .. } => vec!["route_equivalence", "rigidity"],
            Recipe::Hypersurface { .. } => {
                vec![
                    "induced_metric",
                    "codazzi",
                    "route_equivalence",
                    "cyclic",
                    "commutativity",
                ]
            }
            Recipe::ShapeOperator { .. } => {
                vec![
                    "induced_metric",
                    "residual_4_1",
                    "residual_4_2",
                    "prop_4_1",
                    "cyclic",
                    "commutativity",
                ]
            }
            Recipe::SelfadjointPair { .. } => vec!["residual_2_8", "prop_2_4"],
            Recipe::RecurrentJ { .. } => vec!["recurrence", "prop_2_5"],
            Recipe::Golab { .. } | Recipe::Lyra { .. } => vec!["torsion", "metric", "prop_3_2"],
            Recipe::KahlerQ { .. } => vec!["prop_3_7"],
            Recipe::ChernBismut { lee_form, .. } => {
                let mut v = vec!["residual_3_22", "residual_3_23", "residual_3_25"];
                if lee_form.is_some() {
                    v.push("lck");
                }
                v
            }
            Recipe::CrossProduct { .. } => vec!["cyclic", "noncommutative", "norm_identity", "orthogonal_product"],
            Recipe::NablaJ { .. } => vec!["residual_4_1", "residual_4_2", "prop_4_1"],
            Recipe::RicciJ {} => vec!["ricci_codazzi", "residual_4_2", "prop_4_2"],
            Recipe::Einstein2d {} => vec!["einstein", "lambda_constant", "a_vanishes"],
            Recipe::LieAlgebra { .. } => vec![
                "torsion_identities",
                "printed_lines",
                "equivalence",
                "commutativity_chain",
            ],
            Recipe::Autoparallel { .. } => vec!["drift"],
        }
    }

    /// Structural validation: every expression parses in the right space
    /// and every parameter has the right shape.
    pub fn validate(&self, n: usize) -> Result<(), ConfigError> {
        let chart = VarSpace::chart(n);
        let phase = VarSpace::phase(n);
        match self {
            Recipe::Subgeodesic { theta, p, path } => {
                exprs("theta", theta, n, &chart)?;
                exprs("p", p, n, &chart)?;
                if let Some(path) = path {
                    if path.x0.len() != n || path.v0.len() != n {
                        return Err(ConfigError::Invalid(format!("path x0 and v0 need {n} components")));
                    }
                    if !(path.length > 0.0 && path.h > 0.0) {
                        return Err(ConfigError::Invalid("path length and h must be positive".into()));
                    }
                }
            }
            Recipe::Conformal { u } => exprs("u", std::slice::from_ref(u), 1, &chart)?,
            Recipe::Hypersurface { immersion } | Recipe::ShapeOperator { immersion } => {
                exprs("immersion", immersion, n + 1, &chart)?
            }
            Recipe::SelfadjointPair { j } | Recipe::NablaJ { j } => exprs("j", j, n * n, &chart)?,
            Recipe::RecurrentJ { j0, phi } => {
                exprs("j0", j0, n * n, &chart)?;
                exprs("phi", std::slice::from_ref(phi), 1, &chart)?;
            }
            Recipe::Golab {
                theta,
                f,
                epsilon,
                lambda,
            } => {
                exprs("theta", theta, n, &chart)?;
                exprs("f", f, n * n, &chart)?;
                for (what, v) in [("epsilon", epsilon), ("lambda", lambda)] {
                    if let Some(v) = v {
                        if v.abs() != 1.0 {
                            return Err(ConfigError::Invalid(format!("{what} must be +1 or -1")));
                        }
                    }
                }
            }
            Recipe::Lyra { theta } => exprs("theta", theta, n, &chart)?,
            Recipe::KahlerQ { j, q } => {
                exprs("j", j, n * n, &chart)?;
                exprs("q", q, n * n * n, &chart)?;
            }
            Recipe::ChernBismut {
                j,
                lee_form,
                codifferential,
                ..
            } => {
                exprs("j", j, n * n, &chart)?;
                if let Some(l) = lee_form {
                    exprs("lee_form", l, n, &chart)?;
                }
                if let Some(d) = codifferential {
                    exprs("codifferential", d, n, &chart)?;
                }
            }
            Recipe::CrossProduct { pairs } => {
                if n != 3 && n != 7 {
                    return Err(ConfigError::Invalid(format!(
                        "cross products exist in dims 3 and 7, not {n}"
                    )));
                }
                if *pairs == 0 {
                    return Err(ConfigError::Invalid("pairs must be positive".into()));
                }
            }
            Recipe::RicciJ {} => {}
            Recipe::Einstein2d {} => {
                if n != 2 {
                    return Err(ConfigError::Invalid("einstein2d needs dim 2".into()));
                }
            }
            Recipe::LieAlgebra { brackets } => {
                for &(i, j, k, _) in brackets {
                    if !(1 <= i && i < j && j <= n && 1 <= k && k <= n) {
                        return Err(ConfigError::Invalid(format!(
                            "bracket entry ({i}, {j}, {k}) needs 1 <= i < j <= {n} and 1 <= k <= {n}"
                        )));
                    }
                }
            }
            Recipe::Autoparallel {
                gamma,
                symmetric,
                integrate,
                integrals,
                non_integrals,
                convergence,
                integral_fit,
                metric_fit,
            } => {
                exprs("gamma", gamma, n * n * n, &chart)?;
                if *symmetric {
                    for k in 0..n {
                        for i in 0..n {
                            for j in i + 1..n {
                                let (a, b) = (&gamma[(k * n + i) * n + j], &gamma[(k * n + j) * n + i]);
                                if parse(a, n).ok() != parse(b, n).ok() {
                                    return Err(ConfigError::Invalid(format!(
                                        "gamma is declared symmetric but entries ({}, {}, {}) and ({}, {}, {}) differ",
                                        k + 1,
                                        i + 1,
                                        j + 1,
                                        k + 1,
                                        j + 1,
                                        i + 1
                                    )));
                                }
                            }
                        }
                    }
                }
                for e in integrals.iter().chain(non_integrals) {
                    parse_in(e, &phase).map_err(|err| ConfigError::Invalid(format!("integral `{e}`: {err}")))?;
                }
                for spec in [integrate, convergence].into_iter().flatten() {
                    if spec.initial.len() != 2 * n {
                        return Err(ConfigError::Invalid(format!(
                            "initial state needs {} components",
                            2 * n
                        )));
                    }
                    if !(spec.h > 0.0 && spec.t1 > 0.0) {
                        return Err(ConfigError::Invalid("t1 and h must be positive".into()));
                    }
                }
                if let Some(fit) = integral_fit {
                    let m = match fit.system {
                        SubsystemKind::Phase => 2 * n,
                        SubsystemKind::Velocity => {
                            if gamma
                                .iter()
                                .any(|g| !parse(g, n).map(|e| e.is_constant()).unwrap_or(false))
                            {
                                return Err(ConfigError::Invalid(
                                    "the velocity subsystem needs constant gamma".into(),
                                ));
                            }
                            n
                        }
                    };
                    if fit.variables.is_empty() {
                        return Err(ConfigError::Invalid("integral_fit needs at least one variable".into()));
                    }
                    for v in &fit.variables {
                        state_index(v, n, fit.system)?;
                    }
                    if fit.extra.iter().any(|e| e.len() != fit.variables.len()) {
                        return Err(ConfigError::Invalid("extra exponents must match `variables`".into()));
                    }
                    let e = &fit.ensemble;
                    if e.count == 0 || e.bounds.len() != m || !(e.h > 0.0 && e.t1 > 0.0) {
                        return Err(ConfigError::Invalid(format!(
                            "ensemble needs count >= 1, {m} bounds and positive t1, h"
                        )));
                    }
                    let space = match fit.system {
                        SubsystemKind::Phase => phase,
                        SubsystemKind::Velocity => chart,
                    };
                    for e in &fit.planted {
                        parse_in(e, &space).map_err(|err| ConfigError::Invalid(format!("planted `{e}`: {err}")))?;
                    }
                }
                if let Some(mf) = metric_fit {
                    for v in &mf.variables {
                        state_index(v, n, SubsystemKind::Velocity)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that need optional parameters.
    pub fn validate_checks(&self, checks: &[String]) -> Result<(), ConfigError> {
        let needs = |c: &str, ok: bool, what: &str| -> Result<(), ConfigError> {
            if checks.iter().any(|x| x == c) && !ok {
                return Err(ConfigError::Invalid(format!("check `{c}` needs `{what}`")));
            }
            Ok(())
        };
        match self {
            Recipe::Subgeodesic { path, .. } => needs("projective_paths", path.is_some(), "path"),
            Recipe::ChernBismut {
                lee_form,
                codifferential,
                ..
            } => {
                needs("lck", lee_form.is_some(), "lee_form")?;
                let _ = codifferential;
                Ok(())
            }
            Recipe::Golab { epsilon, lambda, .. } => {
                let _ = (epsilon, lambda);
                Ok(())
            }
            Recipe::Autoparallel {
                integrate,
                integrals,
                non_integrals,
                convergence,
                integral_fit,
                metric_fit,
                ..
            } => {
                needs(
                    "drift",
                    integrate.is_some() && !integrals.is_empty(),
                    "integrate and integrals",
                )?;
                needs(
                    "non_integral_drift",
                    integrate.is_some() && !non_integrals.is_empty(),
                    "integrate and non_integrals",
                )?;
                needs("rk4_order", convergence.is_some(), "convergence")?;
                for c in ["integral_fit", "no_polynomial_integral"] {
                    needs(c, integral_fit.is_some(), "integral_fit")?;
                }
                needs(
                    "planted_integrals",
                    integral_fit.as_ref().is_some_and(|f| !f.planted.is_empty()),
                    "integral_fit.planted",
                )?;
                for c in ["metric_fit", "non_metric"] {
                    needs(c, metric_fit.is_some(), "metric_fit")?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

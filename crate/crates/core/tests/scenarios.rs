use frobenius_core::frobenius::Classification;
use frobenius_core::scenario::{
    bundled, bundled_names, find_bundled, run, run_text, ConfigError, RunOptions, Scenario, Status,
};

const CONFORMAL: &str = r#"{
  "name": "conformal_test",
  "dim": 2,
  "chart": {"bounds": [[-1, 1], [-1, 1]], "samples": 8, "seed": 3},
  "metric": [["1", "0"], ["0", "1"]],
  "recipe": {"kind": "conformal", "u": "x1"},
  "checks": ["route_equivalence"]
}"#;

#[test]
fn every_bundled_scenario_validates_and_names_its_anchor() {
    let all = bundled();
    assert!(all.len() >= 19);
    for b in all {
        let sc = b.scenario().unwrap_or_else(|e| panic!("{}: {e}", b.name));
        assert_eq!(sc.name, b.name);
        assert!(sc.anchor.is_some(), "{} has no anchor", b.name);
    }
    for required in [
        "conformal_r2",
        "paraboloid",
        "sphere",
        "ellipsoid",
        "lyra_r2",
        "so3",
        "affine2d",
        "heisenberg",
        "abelian3",
        "kahler_flat_q",
        "lck_r4",
        "cross3",
        "cross7",
        "einstein_s2",
        "bates",
        "halphen",
    ] {
        assert!(find_bundled(required).is_some(), "missing {required}");
    }
    for prefix in ["subgeodesic_", "selfadjoint_", "golab_"] {
        assert!(
            bundled_names().iter().any(|n| n.starts_with(prefix)),
            "no {prefix}* scenario"
        );
    }
}

#[test]
fn bundled_scenarios_have_expected_outcomes() {
    for b in bundled() {
        let report = run(&b.scenario().unwrap(), &RunOptions::default()).unwrap().report;
        let want = if b.name == "lyra_r2" { 1 } else { 0 };
        let failing: Vec<_> = report.checks.iter().filter(|c| !c.passed()).map(|c| &c.name).collect();
        assert_eq!(
            report.exit_code, want,
            "{}: failing {failing:?}, diagnostics {:?}",
            b.name, report.diagnostics
        );
        assert!(report.diagnostics.is_empty(), "{}", b.name);
        assert!(
            report.checks.iter().all(|c| c.anchor.is_some()),
            "{}: check without anchor",
            b.name
        );
    }
}

#[test]
fn lyra_negative_control() {
    let report = run(
        &find_bundled("lyra_r2").unwrap().scenario().unwrap(),
        &RunOptions::default(),
    )
    .unwrap()
    .report;
    assert_eq!(report.status, Status::Fail);
    assert_eq!(report.classification, Some(Classification::None));
    let cyclic = report.check("cyclic").unwrap();
    assert!((cyclic.max_residual - 1.0).abs() <= 1e-9);
    assert_eq!(cyclic.worst_point.len(), 2);
}

#[test]
fn conformal_x1_is_not_formal() {
    // u = x1 on the plane gives a nonzero cyclic defect 2θ(X)g(Y,Z) - 2θ(Z)g(X,Y).
    let report = run(
        &find_bundled("conformal_r2").unwrap().scenario().unwrap(),
        &RunOptions::default(),
    )
    .unwrap()
    .report;
    assert_eq!(report.exit_code, 0);
    assert!(report.check("route_equivalence").unwrap().max_residual <= 1e-6);
    assert_eq!(report.classification, Some(Classification::None));
}

#[test]
fn reports_are_deterministic_and_echo_the_scenario() {
    let sc = find_bundled("golab_r2").unwrap().scenario().unwrap();
    let a = run(&sc, &RunOptions::default()).unwrap().report;
    let b = run(&sc, &RunOptions::default()).unwrap().report;
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.scenario["name"], "golab_r2");
    assert!(a.to_json().ends_with("}\n"));
    let opts = RunOptions {
        samples: Some(5),
        seed: Some(99),
        ..Default::default()
    };
    let c = run(&sc, &opts).unwrap().report;
    assert_eq!(c.scenario["chart"]["samples"], 5);
    assert_eq!(c.scenario["chart"]["seed"], 99);
    assert!(c.checks.iter().all(|ch| ch.samples == 5 || ch.samples == 1));
}

#[test]
fn missing_metric_is_a_schema_error() {
    let text = CONFORMAL.replace(r#""metric": [["1", "0"], ["0", "1"]],"#, "");
    match Scenario::from_json(&text) {
        Err(ConfigError::Schema(msg)) => assert!(msg.contains("metric"), "{msg}"),
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn configuration_errors_are_caught_before_evaluation() {
    let cases = [
        (r#""u": "x1""#, r#""u": "x1 +""#),
        (r#""u": "x1""#, r#""u": "x3""#),
        (r#""checks": ["route_equivalence"]"#, r#""checks": ["no_such_check"]"#),
        (r#""samples": 8"#, r#""samples": 0"#),
        (
            r#""kind": "conformal", "u": "x1""#,
            r#""kind": "conformal", "u": "x1", "extra": 1"#,
        ),
    ];
    for (from, to) in cases {
        let text = CONFORMAL.replace(from, to);
        assert_ne!(text, CONFORMAL);
        assert!(Scenario::from_json(&text).is_err(), "accepted {to}");
    }
    let golab = r#"{
      "name": "bad_golab", "dim": 2,
      "chart": {"bounds": [[-1, 1], [-1, 1]], "samples": 4, "seed": 1},
      "metric": [["1", "0"], ["0", "1"]],
      "recipe": {"kind": "golab", "theta": ["1", "0"], "f": ["1", "0", "0", "1"], "epsilon": -1}
    }"#;
    assert!(matches!(run_text(golab, &RunOptions::default()), Err(_)));
}

#[test]
fn non_positive_metric_is_a_numerical_error() {
    let text = CONFORMAL.replace(r#"[["1", "0"], ["0", "1"]]"#, r#"[["x1", "0"], ["0", "1"]]"#);
    let report = run_text(&text, &RunOptions::default()).unwrap().report;
    assert_eq!(report.status, Status::NumericalError);
    assert_eq!(report.exit_code, 3);
    assert!(!report.diagnostics.is_empty());
    assert!(report.to_json().contains("numerical_error"));
}

#[test]
fn tolerance_precedence() {
    let base = run_text(CONFORMAL, &RunOptions::default()).unwrap().report;
    let default_tol = base.check("route_equivalence").unwrap().tolerance;
    let with_file = CONFORMAL.replace(r#""checks""#, r#""tolerances": {"route_equivalence": 0.5}, "checks""#);
    let r = run_text(&with_file, &RunOptions::default()).unwrap().report;
    assert_eq!(r.check("route_equivalence").unwrap().tolerance, 0.5);
    let opts = RunOptions {
        tol: Some(1e-3),
        ..Default::default()
    };
    let r = run_text(&with_file, &opts).unwrap().report;
    assert_eq!(r.check("route_equivalence").unwrap().tolerance, 1e-3);
    assert_ne!(default_tol, 0.5);
}

#[test]
fn floats_are_written_with_seventeen_digits() {
    let report = run(
        &find_bundled("einstein_s2").unwrap().scenario().unwrap(),
        &RunOptions::default(),
    )
    .unwrap()
    .report;
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let lambda = json["metrics"]["lambda_mean"].as_f64().unwrap();
    assert_eq!(lambda, report.metric("lambda_mean").unwrap());
}

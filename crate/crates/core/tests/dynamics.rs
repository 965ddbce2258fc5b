use frobenius_core::catalog::{projective_a, subgeodesic_a};
use frobenius_core::dynamics::*;
use frobenius_core::expr::{CompiledExpr, VarSpace};
use frobenius_core::manifold::{levi_civita, Chart, Connection, Metric, Signature, TensorField, Valence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `log2(e(h) / e(h/2))` with the error measured against an `h/16` run.
fn convergence_order(sys: &OdeSystem, y0: &[f64], t1: f64, h: f64) -> f64 {
    let reference = rk4_integrate(sys, y0, 0.0, t1, h / 16.0).unwrap();
    let coarse = rk4_integrate(sys, y0, 0.0, t1, h).unwrap();
    let fine = rk4_integrate(sys, y0, 0.0, t1, h / 2.0).unwrap();
    let e1 = max_diff(coarse.last(), reference.last());
    let e2 = max_diff(fine.last(), reference.last());
    (e1 / e2).log2()
}

#[test]
fn bates_rhs_matches_printed_ode() {
    let sys = autoparallel_system(&bates_connection());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let f = sys.rhs(&y).unwrap();
        // ẍ + (y/(1+y²)) ẋ ẏ = 0, ÿ = 0
        let xdd = -(y[1] / (1.0 + y[1] * y[1])) * y[2] * y[3];
        assert!((f[2] - xdd).abs() <= 1e-12);
        assert!(f[3].abs() <= 1e-12);
        assert_eq!(&f[..2], &y[2..]);
    }
}

#[test]
fn halphen_autoparallels_match_velocity_system() {
    let sys = autoparallel_system(&halphen_connection());
    let first = halphen_system();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let acc = &sys.rhs(&y).unwrap()[3..];
        let want = first.rhs(&y[3..]).unwrap();
        assert!(max_diff(acc, &want) <= 1e-12);
    }
}

#[test]
fn rk4_order_on_bates_and_halphen() {
    let bates = autoparallel_system(&bates_connection());
    let p = convergence_order(&bates, &[0.0, 0.5, 1.0, 0.8], 4.0, 0.2);
    assert!((p - 4.0).abs() <= 0.2, "bates order {p}");
    let p = convergence_order(&halphen_system(), &[1.0, 2.0, 3.0], 0.3, 0.03);
    assert!((p - 4.0).abs() <= 0.2, "halphen order {p}");
}

#[test]
fn halphen_short_horizon_stays_finite() {
    let traj = rk4_integrate(&halphen_system(), &[1.0, 2.0, 3.0], 0.0, 0.3, 1e-3).unwrap();
    assert!(traj.states.iter().flatten().all(|v| v.is_finite()));
    assert_eq!(*traj.times.last().unwrap(), 0.3);
}

#[test]
fn second_bates_integral_drift_is_fourth_order() {
    // F1 = v2 is conserved exactly by RK4 (v̇2 ≡ 0), so only F2 shows a rate.
    let sys = autoparallel_system(&bates_connection());
    let f2 = CompiledExpr::parse_in("v1*sqrt(1 + x2^2)", &VarSpace::phase(2)).unwrap();
    let y0 = [0.0, -1.0, 1.5, 1.0];
    let coarse = rk4_integrate(&sys, &y0, 0.0, 4.0, 0.2).unwrap();
    let fine = rk4_integrate(&sys, &y0, 0.0, 4.0, 0.05).unwrap();
    let ratio = first_integral_drift(&coarse, &f2).unwrap() / first_integral_drift(&fine, &f2).unwrap();
    assert!(ratio >= 64.0 && ratio <= 1024.0, "ratio {ratio}");
}

#[test]
fn exact_conserved_quantity_has_tiny_residual() {
    let sys = OdeSystem::new("rotation", 2, |y| Ok(vec![y[1], -y[0]]));
    let traj = rk4_integrate(&sys, &[1.0, 0.0], 0.0, 3.0, 1e-2).unwrap();
    let fit = fit_first_integral(&sys, &[traj], &MonomialBasis::total_degree(&[0, 1], 2), 1e-6).unwrap();
    assert!(fit.normalized_residual <= 1e-8);
}

#[test]
fn halphen_ensemble_has_no_quartic_integral() {
    let sys = halphen_system();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trajs: Vec<_> = (0..20)
        .map(|_| {
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..1.5)).collect();
            rk4_integrate(&sys, &y, 0.0, 0.3, 1e-3).unwrap()
        })
        .collect();
    let fit = fit_first_integral(&sys, &trajs, &MonomialBasis::total_degree(&[0, 1, 2], 4), 1e-6).unwrap();
    assert!(fit.normalized_residual >= 1e-3, "{}", fit.normalized_residual);
    assert!(fit.kernel.is_empty());
}

fn sphere() -> (Metric, Connection) {
    let chart = Chart::new(vec![(0.5, 2.6), (-3.0, 3.0)], 64, 1, 0.05).unwrap();
    let g = Metric::from_exprs(&[vec!["1", "0"], vec!["0", "sin(x1)^2"]], &chart, Signature::Riemannian).unwrap();
    let lc = levi_civita(&g).unwrap();
    (g, lc)
}

#[test]
fn sphere_projective_change_keeps_paths() {
    let (_, lc) = sphere();
    let theta = TensorField::from_exprs(Valence::COVECTOR, 2, &["0.3", "0"]).unwrap();
    let other = lc.shifted(&projective_a(&theta).unwrap()).unwrap();
    let opts = PathOptions::default();
    let d = projective_path_equivalence(&lc, &other, &[1.2, 1.0], &[0.6, 0.8], &opts).unwrap();
    assert!(d <= 1e-4, "{d}");
    let same = projective_path_equivalence(&lc, &lc, &[1.2, 1.0], &[0.6, 0.8], &opts).unwrap();
    assert!(same <= 1e-10);
}

#[test]
fn non_projective_change_moves_paths() {
    let (g, lc) = sphere();
    let theta = TensorField::zero(Valence::COVECTOR, 2);
    let p = TensorField::from_exprs(Valence::VECTOR, 2, &["0", "1"]).unwrap();
    let other = lc.shifted(&subgeodesic_a(&theta, &p, &g).unwrap()).unwrap();
    let d = projective_path_equivalence(&lc, &other, &[1.2, 1.0], &[0.6, 0.8], &PathOptions::default()).unwrap();
    assert!(d > 1e-2, "{d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn planted_quadratic_integral_is_recovered(omega in 0.3f64..3.0, x0 in 0.2f64..1.5, y0 in -1.0f64..1.0) {
        // ẋ = ω y, ẏ = -ω x conserves x² + y².
        let sys = OdeSystem::new("oscillator", 2, move |y| Ok(vec![omega * y[1], -omega * y[0]]));
        let traj = rk4_integrate(&sys, &[x0, y0], 0.0, 4.0, 1e-2).unwrap();
        let basis = MonomialBasis::total_degree(&[0, 1], 2);
        let fit = fit_first_integral(&sys, &[traj], &basis, 1e-6).unwrap();
        let planted = basis.vector(&[(vec![2, 0], 1.0), (vec![0, 2], 1.0)]).unwrap();
        let norm = planted.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos: f64 = fit.coefficients.iter().zip(&planted).map(|(a, b)| a * b).sum::<f64>() / norm;
        prop_assert!(cos.abs() >= 0.999, "cosine {}", cos);
    }

    #[test]
    fn metric_round_trip(a in 0.2f64..2.0, b in 0.2f64..2.0) {
        let chart = Chart::cube(2, -1.0, 1.0, 32, 5).unwrap();
        let e11 = format!("1 + {a}*x2^2");
        let e22 = format!("1 + {b}*x1^2");
        let g = Metric::from_exprs(&[vec![e11.as_str(), "0"], vec!["0", e22.as_str()]], &chart, Signature::Riemannian).unwrap();
        let fit = metric_ansatz_fit(&levi_civita(&g).unwrap(), &MetricAnsatz::polynomial(2, &[0, 1], 2).unwrap(), &chart).unwrap();
        prop_assert!(fit.residual <= 1e-8, "residual {}", fit.residual);
        let ansatz = MetricAnsatz::polynomial(2, &[0, 1], 2).unwrap();
        let p = [0.4, -0.3];
        let got = ansatz.metric_at(&fit.coefficients, &p).unwrap();
        let want = g.matrix(&p).unwrap();
        let cos = got.dot(&want) / (got.norm() * want.norm());
        prop_assert!(cos >= 0.999, "cosine {}", cos);
    }
}

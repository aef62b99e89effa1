use imkg::integrator::{
    convergence_study, imex_step, integrate, integrate_final, IntegratorError, NewtonConfig, Reference, SplitProblem,
};
use imkg::problems::{dahlquist_split, hevi_problem, Params};
use imkg::registry::{lookup, registry};
use imkg::stability::{imkg_explicit_polynomial, implicit_stability_function};
use imkg::tableau::{ButcherTableau, DoubleTableau};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn complex(x: &[f64]) -> Complex64 {
    Complex64::new(x[0], x[1])
}

fn clean_methods() -> Vec<DoubleTableau> {
    registry().into_iter().filter(|e| e.is_clean()).map(|e| e.tableau()).collect()
}

#[test]
fn one_step_reproduces_explicit_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = NewtonConfig::default();
    for entry in registry() {
        let p = imkg_explicit_polynomial(&entry.coefficients);
        let t = entry.tableau();
        for _ in 0..5 {
            let lambda = Complex64::new(rng.gen_range(-2.0..0.5), rng.gen_range(-2.0..2.0));
            let dt = rng.gen_range(0.1..1.0);
            let prob = dahlquist_split(lambda, Complex64::new(0.0, 0.0));
            let (x1, _) = imex_step(&t, &prob, &[1.0, 0.0], 0.0, dt, &cfg).unwrap();
            let want = p.eval(lambda * dt);
            assert!((complex(&x1) - want).norm() < 1e-13, "{} {lambda} {dt}", entry.name());
        }
    }
}

#[test]
fn one_step_reproduces_implicit_stability_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = NewtonConfig::default();
    for entry in registry() {
        let t = entry.tableau();
        let r = implicit_stability_function(t.implicit_part());
        for _ in 0..5 {
            let lambda = Complex64::new(rng.gen_range(-20.0..0.0), rng.gen_range(-20.0..20.0));
            let prob = dahlquist_split(Complex64::new(0.0, 0.0), lambda);
            let (x1, stats) = imex_step(&t, &prob, &[1.0, 0.0], 0.0, 0.5, &cfg).unwrap();
            let want = r.eval(lambda * 0.5);
            assert!((complex(&x1) - want).norm() < 1e-13 * (1.0 + want.norm()), "{} {lambda}", entry.name());
            assert_eq!(stats.newton_iterations, t.implicit_stage_count());
        }
    }
}

#[test]
fn zero_tendencies_leave_the_state_alone() {
    let prob = dahlquist_split(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).with_initial(Complex64::new(0.3, -0.7));
    let x0 = prob.initial_state();
    for t in clean_methods() {
        let x = integrate_final(&t, &prob, &x0, 0.0, 3.0, 0.25, &NewtonConfig::default()).unwrap();
        assert_eq!(x, x0, "{}", t.name());
    }
    let still = hevi_problem(0.0, 0.0);
    let x0 = still.initial_state();
    let traj = integrate(&lookup("343a").unwrap().tableau(), &still, &x0, 0.0, 2.0, 0.1, &NewtonConfig::default()).unwrap();
    assert!(traj.states.iter().all(|x| *x == x0));
}

#[test]
fn fsal_uses_q_nonstiff_evaluations_per_step() {
    let prob = hevi_problem(1.0, 3.0);
    let x0 = prob.initial_state();
    for entry in registry() {
        let t = entry.tableau();
        let q = entry.coefficients.q();
        let (_, stats) = imex_step(&t, &prob, &x0, 0.0, 0.1, &NewtonConfig::default()).unwrap();
        assert_eq!(stats.n_evaluations, q, "{}", entry.name());
        let traj = integrate(&t, &prob, &x0, 0.0, 1.0, 0.1, &NewtonConfig::default()).unwrap();
        assert_eq!(traj.n_evaluations, 10 * q);
        assert_eq!(traj.newton_iterations.len(), 10);
    }
}

#[test]
fn last_step_lands_on_the_end_time() {
    let prob = hevi_problem(1.0, 1.0);
    let t = lookup("232a").unwrap().tableau();
    let traj = integrate(&t, &prob, &prob.initial_state(), 0.0, 1.0, 0.3, &NewtonConfig::default()).unwrap();
    assert_eq!(traj.times.len(), 5);
    assert_eq!(traj.final_time(), 1.0);
    let x = integrate_final(&t, &prob, &prob.initial_state(), 0.0, 1.0, 0.3, &NewtonConfig::default()).unwrap();
    assert_eq!(traj.final_state(), &x[..]);
    assert!(traj.final_error.is_some());
}

#[test]
fn oscillation_on_the_axis_limit_keeps_its_modulus() {
    let t = lookup("232a").unwrap().tableau();
    let prob = dahlquist_split(Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0));
    let x = integrate_final(&t, &prob, &[1.0, 0.0], 0.0, 200.0, 2.0, &NewtonConfig::default()).unwrap();
    assert!((complex(&x).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn stepping_past_the_stability_bound_blows_up() {
    let t = lookup("232a").unwrap().tableau();
    let prob = hevi_problem(1.0, 0.0);
    let err = integrate(&t, &prob, &prob.initial_state(), 0.0, 1e5, 2.5, &NewtonConfig::default()).unwrap_err();
    match err {
        IntegratorError::BlowUp { step, norm, .. } => {
            assert!(step < 100, "{step}");
            assert!(norm > 1e12);
        }
        other => panic!("expected blow-up, got {other}"),
    }
}

#[test]
fn hevi_norm_stays_bounded_inside_the_stable_region() {
    let t = lookup("232b").unwrap().tableau();
    for (kx, kz, dt) in [(1.0, 10.0, 1.5), (1.0, 30.0, 1.0), (0.5, 40.0, 2.0)] {
        let prob = hevi_problem(kx, kz);
        let x0 = prob.initial_state();
        let n0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let traj = integrate(&t, &prob, &x0, 0.0, 1e4 * dt, dt, &NewtonConfig::default()).unwrap();
        let worst = traj
            .states
            .iter()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert!(worst <= 10.0 * n0, "kx {kx} kz {kz} dt {dt}: {worst} vs {n0}");
    }
}

#[test]
fn a_stable_methods_damp_stiff_decay() {
    let prob = dahlquist_split(Complex64::new(0.0, 0.0), Complex64::new(-1e6, 0.0));
    for name in ["232a", "232b", "254c", "342a"] {
        let t = lookup(name).unwrap().tableau();
        let traj = integrate(&t, &prob, &[1.0, 0.0], 0.0, 10.0, 1.0, &NewtonConfig::default()).unwrap();
        assert!(traj.states.iter().all(|x| complex(x).norm() <= 1.0), "{name}");
    }
}

#[test]
fn forward_euler_pair_is_first_order() {
    let e = ButcherTableau::from_rows(&[vec![0.0]], &[1.0]).unwrap();
    let t = DoubleTableau::new("euler", e.clone(), e).unwrap();
    let prob = dahlquist_split(Complex64::new(-0.5, 1.0), Complex64::new(-0.5, 0.0));
    let dts = [0.04, 0.02, 0.01, 0.005, 0.0025];
    let table = convergence_study(&t, &prob, &[1.0, 0.0], &dts, 1.0, &NewtonConfig::default(), Reference::Exact).unwrap();
    assert!((table.order - 1.0).abs() < 0.1, "{}", table.order);
}

#[test]
fn third_order_methods_converge_on_dahlquist() {
    let prob = dahlquist_split(Complex64::new(0.0, 2.0), Complex64::new(-1.0, 0.5));
    let dts = [0.1, 0.05, 0.025, 0.0125];
    for name in ["342a", "343a"] {
        let t = lookup(name).unwrap().tableau();
        let table = convergence_study(&t, &prob, &[1.0, 0.0], &dts, 2.0, &NewtonConfig::tight(), Reference::Exact).unwrap();
        assert!((table.order - 3.0).abs() < 0.15, "{name}: {}", table.order);
    }
}

#[test]
fn exact_reference_needs_an_exact_solution() {
    let prob = imkg::problems::column_problem(&Params::new()).unwrap();
    let t = lookup("232a").unwrap().tableau();
    let err = convergence_study(&t, &prob, &prob.initial_state(), &[0.5, 0.25], 1.0, &NewtonConfig::default(), Reference::Exact)
        .unwrap_err();
    assert!(matches!(err, IntegratorError::ReferenceUnavailable(_)));
    let err = convergence_study(
        &t,
        &prob,
        &prob.initial_state(),
        &[0.5],
        1.0,
        &NewtonConfig::default(),
        Reference::SelfReference { factor: 4 },
    )
    .unwrap_err();
    assert!(matches!(err, IntegratorError::Config(_)));
}

#[test]
fn invalid_arguments_are_rejected() {
    let prob = hevi_problem(1.0, 1.0);
    let t = lookup("232a").unwrap().tableau();
    let cfg = NewtonConfig::default();
    for dt in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(integrate(&t, &prob, &prob.initial_state(), 0.0, 1.0, dt, &cfg), Err(IntegratorError::InvalidStep(_))));
    }
    assert!(matches!(imex_step(&t, &prob, &[1.0], 0.0, 0.1, &cfg), Err(IntegratorError::Dimension { expected: 6, found: 1 })));
    let bad = NewtonConfig { epsilon: -1.0, ..NewtonConfig::default() };
    assert!(integrate(&t, &prob, &prob.initial_state(), 0.0, 1.0, 0.1, &bad).is_err());
}

/// `x' = x²`, stiff, with no Jacobian supplied.
struct Quadratic;

impl SplitProblem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        1
    }

    fn nonstiff(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        out[0] = 0.0;
        Ok(())
    }

    fn stiff(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        out[0] = x[0] * x[0];
        Ok(())
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.5]
    }
}

#[test]
fn nonlinear_stage_with_finite_difference_jacobian() {
    // x(t) = x0 / (1 - x0 t)
    let t = lookup("232a").unwrap().tableau();
    let dts = [0.1, 0.05, 0.025, 0.0125];
    let mut errs = Vec::new();
    for dt in dts {
        let traj = integrate(&t, &Quadratic, &[0.5], 0.0, 1.0, dt, &NewtonConfig::tight()).unwrap();
        assert!(traj.newton_iterations.iter().all(|&k| k <= 20 * t.implicit_stage_count()));
        errs.push((traj.final_state()[0] - 1.0).abs());
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.6).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn newton_failure_reports_the_stage() {
    // g = E + h g² has no real root once 4 h E > 1.
    let t = lookup("232a").unwrap().tableau();
    let err = integrate(&t, &Quadratic, &[10.0], 0.0, 1.0, 1.0, &NewtonConfig::default()).unwrap_err();
    let IntegratorError::Step { step, source, .. } = err else {
        panic!("expected a step failure, got {err}");
    };
    assert_eq!(step, 0);
    match *source {
        IntegratorError::NewtonDiverged { stage, iterations, .. } => {
            assert!(stage >= 1);
            assert!(iterations <= 20);
        }
        IntegratorError::SingularJacobian { stage } => assert!(stage >= 1),
        other => panic!("unexpected {other}"),
    }
}
